//! Conv6 on CIFAR-10 with 4-bit weights.
//!
//! cargo run --release --example conv6_cifar -- <cifar-10-batches-bin> [epochs] [train-limit]

use bitwise::engine::Architecture;
use bitwise::trainer::{train, DatasetKind, TrainConfig, TrainData};

fn main() -> bitwise::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next() else {
        eprintln!("usage: conv6_cifar <cifar-10-batches-bin> [epochs] [train-limit]");
        std::process::exit(2);
    };
    let cfg = TrainConfig {
        architecture: Architecture::Conv6,
        dataset: DatasetKind::Cifar10,
        data_dir: Some(dir.into()),
        k: 4,
        base_lr: 3e-4,
        milestones: vec![],
        epochs: args.next().map_or(2, |e| e.parse().expect("epochs")),
        train_limit: args.next().map(|n| n.parse().expect("train limit")),
        repeats: 1,
        ..TrainConfig::default()
    };
    let data = TrainData::load(&cfg)?;
    train(&cfg, &data, &|m| {
        println!("epoch {:>3}  loss {:.4}  train {:.4}  test {:.4}  zeros {:.4}", m.epoch, m.train_loss, m.train_acc, m.test_acc, m.sparsity)
    })?;
    Ok(())
}
