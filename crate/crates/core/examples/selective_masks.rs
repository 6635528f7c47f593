//! Train with every trainable mask at k=2, then with growing frozen
//! low-bit prefixes at k=4.
//!
//! cargo run --release --example selective_masks -- [mnist-dir]

use bitwise::bits::BitMask;
use bitwise::data::{Dataset, Split};
use bitwise::engine::Architecture;
use bitwise::trainer::{sweep_masks, sweep_trainable_prefix, TrainConfig, TrainData};

fn main() -> bitwise::Result<()> {
    let (cfg, data) = match std::env::args().nth(1) {
        Some(dir) => {
            let cfg = TrainConfig { data_dir: Some(dir.into()), epochs: 3, repeats: 2, ..TrainConfig::default() };
            let data = TrainData::load(&cfg)?;
            (cfg, data)
        }
        None => (
            TrainConfig {
                architecture: Architecture::Mlp(vec![6, 64, 8]),
                epochs: 8,
                repeats: 2,
                base_lr: 3e-3,
                ..TrainConfig::default()
            },
            TrainData {
                train: Dataset::gaussian_blobs(2000, 6, 8, 1, Split::Train),
                test: Dataset::gaussian_blobs(500, 6, 8, 2, Split::Test),
            },
        ),
    };

    let masks = BitMask::enumerate_nonzero(2);
    let result = sweep_masks(&cfg, &masks, &data, &|_, _| {})?;
    println!("k=2, every mask\n{}", result.table());

    let result = sweep_trainable_prefix(&cfg, 4, &[0, 1, 2, 3], &data, &|_, _| {})?;
    println!("k=4, low bits frozen\n{}", result.table());
    Ok(())
}
