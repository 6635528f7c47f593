//! Hide a text in the frozen low-order planes, train the remaining planes,
//! and read the text back.
//!
//! cargo run --release --example embed_payload

use bitwise::data::{Dataset, Split};
use bitwise::engine::Architecture;
use bitwise::stego;
use bitwise::trainer::{build_network, evaluate, train_run, TrainConfig, TrainData};

const TEXT: &str = "\
Tyger Tyger, burning bright,
In the forests of the night;
What immortal hand or eye,
Could frame thy fearful symmetry?
";

fn main() -> bitwise::Result<()> {
    let cfg = TrainConfig {
        architecture: Architecture::Mlp(vec![6, 64, 8]),
        k: 8,
        mask: Some("11100000".parse()?),
        epochs: 5,
        repeats: 1,
        base_lr: 3e-3,
        ..TrainConfig::default()
    };
    let data = TrainData {
        train: Dataset::gaussian_blobs(2000, 6, 8, 1, Split::Train),
        test: Dataset::gaussian_blobs(500, 6, 8, 2, Split::Test),
    };

    let mut net = build_network(&cfg, cfg.seed)?;
    println!("capacity {} bytes, payload {} bytes", stego::capacity_bytes(&net), TEXT.len());
    stego::embed(&mut net, TEXT.as_bytes())?;

    let run = train_run(&cfg, 0, &data, Some(net), &mut |_| {})?;
    println!("trained for {} epochs, test accuracy {:.4}", cfg.epochs, evaluate(&run.last, &data.test)?);

    let back = stego::extract(&run.last)?;
    assert_eq!(back, TEXT.as_bytes());
    print!("{}", String::from_utf8_lossy(&back));
    Ok(())
}
