//! Fold the per-layer scales of a bitwise network into one input scale and
//! check that the integer network predicts exactly the same classes.
//!
//! cargo run --release --example fold_integer

use bitwise::data::{Dataset, Split};
use bitwise::engine::Architecture;
use bitwise::model_io;
use bitwise::trainer::{argmax_agreement, fold, train, TrainConfig, TrainData};

fn main() -> bitwise::Result<()> {
    let cfg = TrainConfig {
        architecture: Architecture::Mlp(vec![6, 64, 32, 8]),
        k: 4,
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

    let folded = fold(&net)?;
    println!("input scale a = {:e}", folded.input_scale());
    for layer in folded.weights().iter().flatten() {
        let lo = layer.values.iter().min().unwrap();
        let hi = layer.values.iter().max().unwrap();
        println!("layer {:?}: integers in [{lo}, {hi}]", layer.shape);
    }
    let agreement = argmax_agreement(&net, &folded, &data.test)?;
    println!("argmax agreement {:.6}", agreement);

    let path = std::env::temp_dir().join("folded.bwti");
    model_io::save_integer(&folded, &path)?;
    println!("saved {}", path.display());
    Ok(())
}
