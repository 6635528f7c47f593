//! Train LeNet-300-100 with 2-bit weights on MNIST and save the best model.
//!
//! cargo run --release --example train_lenet -- <mnist-dir> [epochs]
//!
//! Without a directory, a small MLP is trained on synthetic blobs instead.

use bitwise::data::{Dataset, Split};
use bitwise::engine::Architecture;
use bitwise::model_io::{self, BitEncoding};
use bitwise::trainer::{train, TrainConfig, TrainData};

fn main() -> bitwise::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next();
    let epochs = args.next().map_or(5, |e| e.parse().expect("epochs"));
    let (cfg, data) = match dir {
        Some(dir) => {
            let cfg = TrainConfig { data_dir: Some(dir.into()), epochs, repeats: 1, ..TrainConfig::default() };
            let data = TrainData::load(&cfg)?;
            (cfg, data)
        }
        None => blobs(epochs),
    };

    let outcome = train(&cfg, &data, &|m| {
        println!(
            "epoch {:>3}  loss {:.4}  train {:.4}  test {:.4}  zeros {:.4}  lr {:.1e}",
            m.epoch, m.train_loss, m.train_acc, m.test_acc, m.sparsity, m.lr
        )
    })?;
    let best = outcome.best_run();
    println!("best test accuracy {:.4} at epoch {}", best.best_test_acc, best.best_epoch);

    let path = std::env::temp_dir().join("lenet_k2.bwtm");
    model_io::save(&best.best, &path, BitEncoding::Packed)?;
    println!("saved {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    Ok(())
}

fn blobs(epochs: usize) -> (TrainConfig, TrainData) {
    let cfg = TrainConfig {
        architecture: Architecture::Mlp(vec![6, 64, 8]),
        epochs,
        repeats: 1,
        base_lr: 3e-3,
        ..TrainConfig::default()
    };
    let data = TrainData {
        train: Dataset::gaussian_blobs(2000, 6, 8, 1, Split::Train),
        test: Dataset::gaussian_blobs(500, 6, 8, 2, Split::Test),
    };
    (cfg, data)
}
