use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const METRICS_HEADER: &str = "run,epoch,train_loss,train_acc,test_acc,sparsity,lr";

/// One epoch of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run: usize,
    /// Zero-based epoch index (the one the LR schedule sees).
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub sparsity: f64,
    pub lr: f64,
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.run, self.epoch, self.train_loss, self.train_acc, self.test_acc, self.sparsity, self.lr
        )
    }
}

pub fn write_metrics_csv<'a, W: Write>(
    out: &mut W,
    records: impl IntoIterator<Item = &'a MetricsRecord>,
) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}
