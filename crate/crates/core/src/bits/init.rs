use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{check_depth, find_alpha, step, BitMask, BitPlaneTensor};
use crate::error::{Error, Result};

/// Offset added to a tensor's stream id for zero-avoidance redraws, so a
/// redraw never shifts the primary draws of any other weight.
const REDRAW_STREAM: u64 = 1 << 62;

impl BitPlaneTensor {
    /// Random initialization with a Kaiming-matched exponent offset.
    ///
    /// Every virtual bit is drawn from `N(0, 2/fan_in)`, so each bit is a
    /// fair coin. Weights whose magnitude bits all came out 0 get their
    /// magnitude planes redrawn until nonzero. `stream` separates tensors
    /// that share a seed (one stream per layer).
    pub fn kaiming(
        k: usize,
        shape: &[usize],
        fan_in: usize,
        mask: BitMask,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        check_depth(k)?;
        if fan_in == 0 {
            return Err(Error::InvalidInput("fan-in must be positive".into()));
        }
        let len: usize = shape.iter().product();
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0f32, std as f32).expect("finite std");

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut x: Vec<f32> = (0..k * len).map(|_| normal.sample(&mut rng)).collect();

        let mut redraw = ChaCha8Rng::seed_from_u64(seed);
        redraw.set_stream(stream | REDRAW_STREAM);
        for e in 0..len {
            while (0..k - 1).all(|i| !step(x[i * len + e])) {
                for i in 0..k - 1 {
                    x[i * len + e] = normal.sample(&mut redraw);
                }
            }
        }

        let alpha = find_alpha(k, fan_in);
        Self::new(k, shape, x, alpha, mask)
    }
}
