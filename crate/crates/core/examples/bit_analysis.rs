//! Train a conventional float network, integerize each layer and perturb
//! its low-order bits.
//!
//! cargo run --release --example bit_analysis

use bitwise::analysis::{analyze, integerize_network, AnalysisPlan, PerturbMode};
use bitwise::data::{Dataset, Split};
use bitwise::engine::Architecture;
use bitwise::trainer::{train, TrainConfig, TrainData};

fn main() -> bitwise::Result<()> {
    let cfg = TrainConfig {
        architecture: Architecture::Mlp(vec![6, 64, 8]),
        quantized: false,
        epochs: 5,
        repeats: 1,
        base_lr: 3e-3,
        ..TrainConfig::default()
    };
    let data = TrainData {
        train: Dataset::gaussian_blobs(2000, 6, 8, 1, Split::Train),
        test: Dataset::gaussian_blobs(500, 6, 8, 2, Split::Test),
    };
    let net = train(&cfg, &data, &|_| {})?.runs.remove(0).best;

    for (layer, l) in integerize_network(&net)? {
        println!("layer {layer}: m = {} bits, p_max = {}", l.m, l.p_max);
    }
    let plan = AnalysisPlan::up_to(8, &[PerturbMode::Zero, PerturbMode::One, PerturbMode::Random], &[1]);
    println!("\n{:>3} {:>7} {:>9} {:>9}", "p", "mode", "test acc", "zeros");
    for row in analyze(&net, &data.test, &plan)? {
        println!("{:>3} {:>7} {:>9.4} {:>9.4}", row.p, row.mode.to_string(), row.test_acc, row.sparsity);
    }
    Ok(())
}
