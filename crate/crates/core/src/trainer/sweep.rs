use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{TrainConfig, TrainData};
use super::metrics::MetricsRecord;
use super::run::{train, TrainOutcome};
use crate::bits::BitMask;
use crate::error::{Error, Result};

/// Best-epoch result of one run inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub k: usize,
    pub mask: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub run: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub test_acc: f64,
    pub sparsity: f64,
    pub final_sparsity: f64,
}

/// Min/mean/max over the repeats of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub k: usize,
    pub mask: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub sparsity_min: f64,
    pub sparsity_mean: f64,
    pub sparsity_max: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub summary: Vec<SummaryRow>,
    pub runs: Vec<SweepRun>,
}

fn min_mean_max(v: &[f64]) -> (f64, f64, f64) {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, v.iter().sum::<f64>() / v.len() as f64, max)
}

impl SummaryRow {
    pub fn from_runs(k: usize, mask: &BitMask, p: Option<usize>, runs: &[SweepRun]) -> Self {
        let acc: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
        let sp: Vec<f64> = runs.iter().map(|r| r.sparsity).collect();
        let (min, mean, max) = min_mean_max(&acc);
        let (sparsity_min, sparsity_mean, sparsity_max) = min_mean_max(&sp);
        Self {
            k,
            mask: mask.to_string(),
            p,
            min,
            mean,
            max,
            sparsity_min,
            sparsity_mean,
            sparsity_max,
            n_runs: runs.len(),
        }
    }
}

impl SweepResult {
    fn push(&mut self, config: &TrainConfig, p: Option<usize>, outcome: &TrainOutcome) {
        let mask = config.mask();
        let runs: Vec<SweepRun> = outcome
            .runs
            .iter()
            .map(|r| SweepRun {
                k: config.k,
                mask: mask.to_string(),
                p,
                run: r.run,
                seed: r.seed,
                best_epoch: r.best_epoch,
                test_acc: r.best_test_acc,
                sparsity: r.best_sparsity,
                final_sparsity: r.final_sparsity(),
            })
            .collect();
        self.summary.push(SummaryRow::from_runs(config.k, &mask, p, &runs));
        self.runs.extend(runs);
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    pub fn write_runs_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "k,mask,p,run,seed,best_epoch,test_acc,sparsity,final_sparsity")?;
        for r in &self.runs {
            let p = r.p.map(|p| p.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.k, r.mask, p, r.run, r.seed, r.best_epoch, r.test_acc, r.sparsity, r.final_sparsity
            )?;
        }
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>3} {:>34} {:>3} {:>7} {:>7} {:>7} {:>8} {:>8} {:>8} {:>4}\n",
            "k", "mask", "p", "acc_min", "acc_avg", "acc_max", "sp_min", "sp_avg", "sp_max", "runs"
        );
        for r in &self.summary {
            let p = r.p.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
            s += &format!(
                "{:>3} {:>34} {:>3} {:>7.4} {:>7.4} {:>7.4} {:>8.5} {:>8.5} {:>8.5} {:>4}\n",
                r.k, r.mask, p, r.min, r.mean, r.max, r.sparsity_min, r.sparsity_mean, r.sparsity_max, r.n_runs
            );
        }
        s
    }
}

type Observer<'a> = &'a (dyn Fn(&TrainConfig, &MetricsRecord) + Sync);

fn run_settings(
    settings: Vec<(TrainConfig, Option<usize>)>,
    data: &TrainData,
    observer: Observer<'_>,
) -> Result<SweepResult> {
    if settings.is_empty() {
        return Err(Error::Config("sweep needs at least one setting".into()));
    }
    let mut result = SweepResult::default();
    for (cfg, p) in settings {
        cfg.validate()?;
        let outcome = train(&cfg, data, &|m| observer(&cfg, m))?;
        result.push(&cfg, p, &outcome);
    }
    Ok(result)
}

/// All-bits-trainable runs at each bit depth.
pub fn sweep_bit_depths(
    config: &TrainConfig,
    depths: &[usize],
    data: &TrainData,
    observer: Observer<'_>,
) -> Result<SweepResult> {
    let settings = depths
        .iter()
        .map(|&k| (config.with_bits(k, BitMask::all(k)), None))
        .collect();
    run_settings(settings, data, observer)
}

/// One setting per trainability mask; the bit depth is each mask's length.
pub fn sweep_masks(
    config: &TrainConfig,
    masks: &[BitMask],
    data: &TrainData,
    observer: Observer<'_>,
) -> Result<SweepResult> {
    let settings = masks
        .iter()
        .map(|m| (config.with_bits(m.len(), m.clone()), None))
        .collect();
    run_settings(settings, data, observer)
}

/// Freezes the `p` lowest magnitude bits for each `p` and trains the rest.
/// `p = 0` trains everything, `p = k-1` only the sign.
pub fn sweep_trainable_prefix(
    config: &TrainConfig,
    k: usize,
    frozen: &[usize],
    data: &TrainData,
    observer: Observer<'_>,
) -> Result<SweepResult> {
    let settings = frozen
        .iter()
        .map(|&p| Ok((config.with_bits(k, BitMask::with_frozen_low_bits(k, p)?), Some(p))))
        .collect::<Result<Vec<_>>>()?;
    run_settings(settings, data, observer)
}
