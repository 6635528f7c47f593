//! Weight histograms of the first layer at k=2 and k=8.
//!
//! cargo run --release --example weight_histogram

use bitwise::data::{Dataset, Split};
use bitwise::engine::Architecture;
use bitwise::trainer::{train, weight_histogram, TrainConfig, TrainData};

fn main() -> bitwise::Result<()> {
    let data = TrainData {
        train: Dataset::gaussian_blobs(2000, 6, 8, 1, Split::Train),
        test: Dataset::gaussian_blobs(500, 6, 8, 2, Split::Test),
    };
    for k in [2, 8] {
        let cfg = TrainConfig {
            architecture: Architecture::Mlp(vec![6, 64, 8]),
            k,
            epochs: 5,
            repeats: 1,
            base_lr: 3e-3,
            ..TrainConfig::default()
        };
        let net = train(&cfg, &data, &|_| {})?.runs.remove(0).last;
        let hist = weight_histogram(&net, 0, 15, None)?;
        println!("k={k}");
        let peak = *hist.counts.iter().max().unwrap() as f64;
        for (i, &c) in hist.counts.iter().enumerate() {
            let bar = "#".repeat((40.0 * c as f64 / peak).round() as usize);
            println!("{:>9.4} {:>5} {bar}", hist.edges[i], c);
        }
        println!();
    }
    Ok(())
}
