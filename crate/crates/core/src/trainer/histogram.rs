use serde::{Deserialize, Serialize};

use crate::engine::Network;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidInput("histogram needs at least one bin".into()));
        }
        let (mut lo, mut hi) = range.unwrap_or_else(|| {
            values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
        });
        if values.is_empty() && range.is_none() {
            (lo, hi) = (0.0, 1.0);
        }
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!("bad histogram range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            if v < lo || v > hi {
                continue;
            }
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lower,upper,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s += &format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c);
        }
        s
    }
}

/// Histogram of the reconstructed weights of the `layer`-th parameterized
/// layer (0-based, counting only layers with weights).
pub fn weight_histogram(
    net: &Network,
    layer: usize,
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<Histogram> {
    let idx = net.parameterized().nth(layer).ok_or_else(|| {
        Error::InvalidInput(format!(
            "network has {} weight layers, asked for #{layer}",
            net.parameterized().count()
        ))
    })?;
    let store = net.params()[idx].as_ref().expect("parameterized layer");
    Histogram::build(&store.weights::<f64>(), bins, range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_is_flat() {
        let values: Vec<f64> = (-4..4).map(|v| v as f64 + 0.5).collect();
        let h = Histogram::build(&values, 8, Some((-4.0, 4.0))).unwrap();
        assert_eq!(h.counts, vec![1; 8]);
        assert_eq!(h.edges.len(), 9);
    }

    #[test]
    fn all_zero_is_single_spike() {
        let h = Histogram::build(&[0.0; 10], 5, None).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 10);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        let spike = h.counts.iter().position(|&c| c > 0).unwrap();
        assert!(h.edges[spike] <= 0.0 && 0.0 <= h.edges[spike + 1]);
    }

    #[test]
    fn maximum_lands_in_last_bin() {
        let h = Histogram::build(&[0.0, 1.0, 2.0], 2, None).unwrap();
        assert_eq!(h.counts, vec![1, 2]);
        assert!(Histogram::build(&[1.0], 0, None).is_err());
    }
}
