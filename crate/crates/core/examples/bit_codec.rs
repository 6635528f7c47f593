//! Encode a weight bit by bit, then check the exponent offset and chance
//! sparsity for a few bit depths.
//!
//! cargo run --example bit_codec

use bitwise::bits::{chance_sparsity, find_alpha, representable_std, BitMask, BitPlaneTensor};

fn main() -> bitwise::Result<()> {
    // sign first, magnitude LSB last
    let pattern = "1001001010001000";
    let bits: Vec<bool> = pattern.chars().rev().map(|c| c == '1').collect();
    let mask: BitMask = "1111000000001111".parse()?;
    for alpha in [0.0, -15.0] {
        let t = BitPlaneTensor::from_bits(16, &[1], &bits, alpha, mask.clone())?;
        println!("{pattern} at alpha={alpha:>5}: {}", t.reconstruct::<f64>()[0]);
    }

    println!("\n{:>3} {:>12} {:>12} {:>14}", "k", "alpha", "std", "chance zeros");
    for k in [2, 4, 8, 16, 32] {
        let alpha = find_alpha(k, 784);
        println!(
            "{k:>3} {alpha:>12.5} {:>12.6} {:>14.3e}",
            representable_std(k, alpha),
            chance_sparsity(k)
        );
    }
    println!("target std sqrt(2/784) = {:.6}", (2.0f64 / 784.0).sqrt());
    Ok(())
}
