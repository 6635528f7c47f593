//! Training loops, repeated-seed sweeps, metrics and integer folding.

mod config;
mod fold;
mod histogram;
mod metrics;
mod run;
mod sweep;

pub use config::{DatasetKind, TrainConfig, TrainData, CONFIG_VERSION};
pub use fold::{argmax_agreement, fold, IntegerLayer, IntegerNetwork};
pub use histogram::{weight_histogram, Histogram};
pub use metrics::{write_metrics_csv, MetricsRecord, METRICS_HEADER};
pub use run::{
    build_network, evaluate, evaluate_with, predictions_f64, sparsity, train, train_run, RunResult,
    TrainOutcome,
};
pub use sweep::{
    sweep_bit_depths, sweep_masks, sweep_trainable_prefix, SummaryRow, SweepResult, SweepRun,
};
