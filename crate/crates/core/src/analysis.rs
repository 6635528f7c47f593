//! Bit significance of conventionally trained weights.
//!
//! A float layer is turned into integers by dividing by its smallest
//! non-zero magnitude and rounding. The lowest magnitude bits of those
//! integers can then be overwritten to see how much they matter.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{Network, ParamStore};
use crate::error::{Error, Result};
use crate::trainer::{evaluate, sparsity};

/// Largest magnitude of the 32-bit integer encoding.
pub const MAX_MAGNITUDE: i64 = (1 << 31) - 1;

/// Layer weights as `scale * values`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerizedLayer {
    pub values: Vec<i64>,
    /// Smallest non-zero magnitude of the original weights.
    pub scale: f64,
    /// Magnitude bits needed for the largest value.
    pub m: u32,
    /// How many low bits may be changed: `max(m - 3, 0)`.
    pub p_max: u32,
}

pub fn integerize(weights: &[f64]) -> Result<IntegerizedLayer> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::Numeric(format!("cannot integerize {w}")));
    }
    let scale = weights
        .iter()
        .map(|w| w.abs())
        .filter(|&a| a > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !scale.is_finite() {
        return Err(Error::InvalidInput("layer has no non-zero weight".into()));
    }
    let values: Vec<i64> = weights
        .iter()
        .map(|&w| {
            let q = (w / scale).round();
            q.clamp(-(MAX_MAGNITUDE as f64), MAX_MAGNITUDE as f64) as i64
        })
        .collect();
    let max = values.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
    let m = u64::BITS - max.leading_zeros();
    Ok(IntegerizedLayer {
        values,
        scale,
        m,
        p_max: m.saturating_sub(3),
    })
}

impl IntegerizedLayer {
    pub fn reconstruct(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64 * self.scale).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    Zero,
    One,
    Random,
}

impl PerturbMode {
    pub const ALL: [PerturbMode; 3] = [PerturbMode::Zero, PerturbMode::One, PerturbMode::Random];
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbMode::Zero => "zero",
            PerturbMode::One => "one",
            PerturbMode::Random => "random",
        })
    }
}

impl FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(PerturbMode::Zero),
            "one" => Ok(PerturbMode::One),
            "random" => Ok(PerturbMode::Random),
            _ => Err(Error::InvalidInput(format!(
                "unknown perturbation mode {s:?} (expected zero, one or random)"
            ))),
        }
    }
}

/// Overwrites magnitude bits `0..p` of one signed integer; the sign and the
/// higher bits are kept.
pub fn perturb_value(v: i64, p: u32, mode: PerturbMode, rng: &mut impl Rng) -> i64 {
    if p == 0 {
        return v;
    }
    let low = if p >= 63 { u64::MAX >> 1 } else { (1u64 << p) - 1 };
    let mag = v.unsigned_abs() & !low;
    let mag = match mode {
        PerturbMode::Zero => mag,
        PerturbMode::One => mag | low,
        PerturbMode::Random => mag | (rng.gen::<u64>() & low),
    };
    if v < 0 {
        -(mag as i64)
    } else {
        mag as i64
    }
}

/// Perturbed copy of the layer's integers. `p` is clamped to `p_max`.
pub fn perturb_low_bits(
    layer: &IntegerizedLayer,
    p: u32,
    mode: PerturbMode,
    seed: u64,
) -> Vec<i64> {
    let p = p.min(layer.p_max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    layer
        .values
        .iter()
        .map(|&v| perturb_value(v, p, mode, &mut rng))
        .collect()
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    /// Perturbed weight layer, or `None` for all layers at once.
    pub layer: Option<usize>,
    pub p: u32,
    pub mode: PerturbMode,
    /// `None` for the deterministic modes.
    pub seed: Option<u64>,
    pub test_acc: f64,
    pub sparsity: f64,
}

pub const ANALYSIS_HEADER: &str = "layer,p,mode,seed,test_acc,sparsity";

impl AnalysisRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.layer.map_or("all".to_string(), |l| l.to_string()),
            self.p,
            self.mode,
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.test_acc,
            self.sparsity
        )
    }
}

pub fn write_analysis_csv<W: Write>(out: &mut W, rows: &[AnalysisRow]) -> Result<()> {
    writeln!(out, "{ANALYSIS_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisPlan {
    pub p_values: Vec<u32>,
    pub modes: Vec<PerturbMode>,
    pub seeds: Vec<u64>,
    /// Weight layer to perturb (0-based among weight layers); all if `None`.
    pub layer: Option<usize>,
}

impl AnalysisPlan {
    /// `p = 0..=p_max` for every mode.
    pub fn up_to(p_max: u32, modes: &[PerturbMode], seeds: &[u64]) -> Self {
        Self {
            p_values: (0..=p_max).collect(),
            modes: modes.to_vec(),
            seeds: seeds.to_vec(),
            layer: None,
        }
    }
}

/// Integerized copy of every float layer of `net`, keyed by layer index.
pub fn integerize_network(net: &Network) -> Result<Vec<(usize, IntegerizedLayer)>> {
    net.parameterized()
        .map(|i| match net.params()[i].as_ref().expect("weights") {
            ParamStore::Float { values, .. } => Ok((i, integerize(values)?)),
            ParamStore::Bits(_) => Err(Error::Unsupported(format!(
                "layer {i} is a bit-plane layer; analysis expects float weights"
            ))),
        })
        .collect()
}

fn with_weights(net: &Network, layers: &[(usize, Vec<f64>)]) -> Result<Network> {
    let mut out = net.clone();
    for (i, values) in layers {
        let shape = net.params()[*i].as_ref().expect("weights").shape().to_vec();
        *out.param_mut(*i).expect("weights") = ParamStore::Float {
            shape,
            values: values.clone(),
        };
    }
    Ok(out)
}

/// Accuracy and sparsity for each `(p, mode, seed)`. The `p = 0` rows
/// evaluate the unmodified network. Perturbed networks use
/// `scale * perturbed integers` as weights.
pub fn analyze(net: &Network, data: &Dataset, plan: &AnalysisPlan) -> Result<Vec<AnalysisRow>> {
    let layers = integerize_network(net)?;
    let targets: Vec<&(usize, IntegerizedLayer)> = match plan.layer {
        None => layers.iter().collect(),
        Some(l) => vec![layers.get(l).ok_or_else(|| {
            Error::InvalidInput(format!("network has {} weight layers, asked for #{l}", layers.len()))
        })?],
    };
    if plan.seeds.is_empty() && plan.modes.contains(&PerturbMode::Random) {
        return Err(Error::InvalidInput("random mode needs at least one seed".into()));
    }
    let base = (evaluate(net, data)?, sparsity(net));
    let mut rows = Vec::new();
    for &p in &plan.p_values {
        for &mode in &plan.modes {
            let seeds: Vec<Option<u64>> = match mode {
                PerturbMode::Random => plan.seeds.iter().map(|&s| Some(s)).collect(),
                _ => vec![None],
            };
            for seed in seeds {
                let (test_acc, sp) = if p == 0 {
                    base
                } else {
                    let perturbed: Vec<(usize, Vec<f64>)> = targets
                        .iter()
                        .map(|(i, layer)| {
                            // every layer gets its own stream
                            let s = seed.unwrap_or(0) ^ ((*i as u64) << 32);
                            let ints = perturb_low_bits(layer, p, mode, s);
                            (*i, ints.iter().map(|&v| v as f64 * layer.scale).collect())
                        })
                        .collect();
                    let pnet = with_weights(net, &perturbed)?;
                    (evaluate(&pnet, data)?, sparsity(&pnet))
                };
                rows.push(AnalysisRow {
                    layer: plan.layer,
                    p,
                    mode,
                    seed,
                    test_acc,
                    sparsity: sp,
                });
            }
        }
    }
    Ok(rows)
}
