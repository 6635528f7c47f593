//! Bit-plane weight representation.
//!
//! A layer's weight tensor is stored as `k` stacked planes of real-valued
//! *virtual bits*. Each virtual bit passes through a unit step to give a
//! binary coefficient; plane `k-1` is the sign and planes `0..k-1` are the
//! magnitude, scaled by a per-layer exponent offset `alpha`:
//!
//! ```text
//! w = (sum_{i=0}^{k-2} a_i 2^(i+alpha)) * (-1)^(a_{k-1}),   a = H(x)
//! ```
//!
//! Gradients flow back to the virtual bits through an identity
//! straight-through estimator; planes switched off in the [`BitMask`] never
//! receive gradient.

mod alpha;
mod init;
mod mask;
mod pack;

pub use alpha::{chance_sparsity, find_alpha, representable_std};
pub use mask::BitMask;
pub use pack::{pack_bools, unpack_bools, unpack_bits};

use crate::error::{Error, Result};
use crate::real::Real;

/// Largest supported bit depth; magnitudes are held in a `u64`.
pub const MAX_BITS: usize = 64;

/// Unit step: 0 for `x <= 0`, 1 otherwise.
pub fn heaviside(x: f64) -> Result<u8> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("heaviside of non-finite {x}")));
    }
    Ok(u8::from(x > 0.0))
}

#[inline(always)]
pub(crate) fn step(x: f32) -> bool {
    x > 0.0
}

/// Per-layer stack of `k` virtual-bit planes.
///
/// `x` is plane-major: plane `i` occupies `x[i*len .. (i+1)*len]`, elements
/// within a plane are row-major over `shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitPlaneTensor {
    k: usize,
    shape: Vec<usize>,
    len: usize,
    x: Vec<f32>,
    alpha: f64,
    mask: BitMask,
}

impl BitPlaneTensor {
    pub fn new(k: usize, shape: &[usize], x: Vec<f32>, alpha: f64, mask: BitMask) -> Result<Self> {
        check_depth(k)?;
        if mask.len() != k {
            return Err(Error::InvalidInput(format!(
                "mask has {} bits, tensor has {k}",
                mask.len()
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidInput("alpha must be finite".into()));
        }
        let len: usize = shape.iter().product();
        if x.len() != k * len {
            return Err(Error::shape(&[k * len], &[x.len()]));
        }
        Ok(Self {
            k,
            shape: shape.to_vec(),
            len,
            x,
            alpha,
            mask,
        })
    }

    /// Builds a tensor whose virtual bits are `+1` / `-1` for the given bit
    /// values. `bits` is plane-major like the `x` layout.
    pub fn from_bits(
        k: usize,
        shape: &[usize],
        bits: &[bool],
        alpha: f64,
        mask: BitMask,
    ) -> Result<Self> {
        let x = bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        Self::new(k, shape, x, alpha, mask)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of weights (elements per plane).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mask(&self) -> &BitMask {
        &self.mask
    }

    pub fn virtual_bits(&self) -> &[f32] {
        &self.x
    }

    pub fn virtual_bits_mut(&mut self) -> &mut [f32] {
        &mut self.x
    }

    pub fn plane(&self, i: usize) -> &[f32] {
        &self.x[i * self.len..(i + 1) * self.len]
    }

    pub fn plane_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.x[i * self.len..(i + 1) * self.len]
    }

    pub fn sign_plane(&self) -> usize {
        self.k - 1
    }

    pub fn bit(&self, plane: usize, element: usize) -> bool {
        step(self.x[plane * self.len + element])
    }

    /// Overwrites one bit by setting its virtual bit to `+1` or `-1`.
    pub fn set_bit(&mut self, plane: usize, element: usize, value: bool) {
        self.x[plane * self.len + element] = if value { 1.0 } else { -1.0 };
    }

    /// All bit values, plane-major.
    pub fn bits(&self) -> Vec<bool> {
        self.x.iter().map(|&v| step(v)).collect()
    }

    pub fn magnitude(&self, element: usize) -> u64 {
        (0..self.k - 1).fold(0u64, |acc, i| acc | (u64::from(self.bit(i, element)) << i))
    }

    pub fn is_negative(&self, element: usize) -> bool {
        self.bit(self.k - 1, element)
    }

    /// Unsigned magnitudes and sign flags for every element.
    pub fn magnitudes_and_signs(&self) -> (Vec<u64>, Vec<bool>) {
        let mut mags = vec![0u64; self.len];
        for i in 0..self.k - 1 {
            for (m, &v) in mags.iter_mut().zip(self.plane(i)) {
                *m |= u64::from(step(v)) << i;
            }
        }
        let signs = self.plane(self.k - 1).iter().map(|&v| step(v)).collect();
        (mags, signs)
    }

    /// Signed integer weights `w / 2^alpha`.
    pub fn integer_weights(&self) -> Vec<i64> {
        let (mags, signs) = self.magnitudes_and_signs();
        mags.into_iter()
            .zip(signs)
            .map(|(m, s)| {
                let m = m as i64;
                if s {
                    -m
                } else {
                    m
                }
            })
            .collect()
    }

    pub fn scale(&self) -> f64 {
        self.alpha.exp2()
    }

    /// Largest representable magnitude, `(2^(k-1) - 1) 2^alpha`.
    pub fn max_magnitude(&self) -> f64 {
        max_integer(self.k) as f64 * self.scale()
    }

    /// Number of weights whose magnitude bits are all zero.
    pub fn zero_count(&self) -> usize {
        let (mags, _) = self.magnitudes_and_signs();
        mags.iter().filter(|&&m| m == 0).count()
    }

    pub fn reconstruct<T: Real>(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.len];
        self.reconstruct_into(&mut out);
        out
    }

    pub fn reconstruct_into<T: Real>(&self, out: &mut [T]) {
        assert_eq!(out.len(), self.len);
        let (mags, signs) = self.magnitudes_and_signs();
        let scale = self.scale();
        for ((o, m), s) in out.iter_mut().zip(mags).zip(signs) {
            let v = m as f64 * scale;
            *o = T::of(if s { -v } else { v });
        }
    }

    pub(crate) fn set_mask(&mut self, mask: BitMask) -> Result<()> {
        if mask.len() != self.k {
            return Err(Error::InvalidInput(format!(
                "mask has {} bits, tensor has {}",
                mask.len(),
                self.k
            )));
        }
        self.mask = mask;
        Ok(())
    }
}

/// `2^(k-1) - 1`, the largest magnitude on `k` sign-and-magnitude bits.
pub fn max_integer(k: usize) -> u64 {
    (1u64 << (k - 1)) - 1
}

pub(crate) fn check_depth(k: usize) -> Result<()> {
    if !(2..=MAX_BITS).contains(&k) {
        return Err(Error::InvalidInput(format!(
            "bit depth must be in 2..={MAX_BITS}, got {k}"
        )));
    }
    Ok(())
}

/// Gradient of the loss with respect to every virtual bit, given the
/// gradient with respect to the reconstructed weights.
///
/// The step function's derivative is replaced by 1. The sign factor is
/// differentiated through `(-1)^s = 1 - 2s`, so the magnitude plane `i`
/// receives `g 2^(i+alpha) (1 - 2 a_s)` and the sign plane receives
/// `-2 g |w|`. Planes switched off in the mask get exactly zero.
pub fn ste_backward<T: Real>(grad_w: &[T], t: &BitPlaneTensor) -> Result<Vec<T>> {
    if grad_w.len() != t.len {
        return Err(Error::shape(&t.shape, &[grad_w.len()]));
    }
    let n = t.len;
    let mut out = vec![T::zero(); t.k * n];
    let (mags, signs) = t.magnitudes_and_signs();
    let scale = t.scale();
    for plane in 0..t.k {
        if !t.mask.is_trainable(plane) {
            continue;
        }
        let dst = &mut out[plane * n..(plane + 1) * n];
        if plane == t.k - 1 {
            for e in 0..n {
                let mag = mags[e] as f64 * scale;
                dst[e] = T::of(-2.0 * grad_w[e].as_f64() * mag);
            }
        } else {
            let w = scale * (plane as f64).exp2();
            for e in 0..n {
                let sign = if signs[e] { -1.0 } else { 1.0 };
                dst[e] = T::of(grad_w[e].as_f64() * w * sign);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_tensor(alpha: f64) -> BitPlaneTensor {
        let mask: BitMask = "1111000000001111".parse().unwrap();
        let pattern = "1001001010001000";
        let mut bits = vec![false; 16];
        for (pos, ch) in pattern.chars().enumerate() {
            bits[15 - pos] = ch == '1';
        }
        BitPlaneTensor::from_bits(16, &[1], &bits, alpha, mask).unwrap()
    }

    #[test]
    fn heaviside_examples() {
        assert_eq!(heaviside(0.0).unwrap(), 0);
        assert_eq!(heaviside(-3.7).unwrap(), 0);
        assert_eq!(heaviside(0.25).unwrap(), 1);
        assert!(heaviside(f64::NAN).is_err());
        assert!(heaviside(f64::INFINITY).is_err());
    }

    #[test]
    fn table_one_pattern() {
        let t = table_tensor(0.0);
        assert_eq!(t.reconstruct::<f64>(), vec![-4744.0]);
        assert_eq!(t.integer_weights(), vec![-4744]);
        assert_eq!(table_tensor(-15.0).reconstruct::<f64>(), vec![-0.144775390625]);
    }

    #[test]
    fn zero_magnitude_is_zero_for_either_sign() {
        for sign in [false, true] {
            let t = BitPlaneTensor::from_bits(4, &[1], &[false, false, false, sign], -3.0, BitMask::all(4))
                .unwrap();
            assert_eq!(t.reconstruct::<f64>()[0], 0.0);
            assert_eq!(t.zero_count(), 1);
        }
    }

    #[test]
    fn two_bit_negative_one() {
        let t = BitPlaneTensor::from_bits(2, &[1], &[true, true], 0.0, BitMask::all(2)).unwrap();
        assert_eq!(t.reconstruct::<f64>(), vec![-1.0]);
    }

    #[test]
    fn ste_two_bit_example() {
        let t = BitPlaneTensor::from_bits(2, &[1], &[true, false], 0.0, BitMask::all(2)).unwrap();
        let g = ste_backward(&[1.0f64], &t).unwrap();
        assert_eq!(g, vec![1.0, -2.0]);
    }

    #[test]
    fn ste_masked_and_zero_gradients() {
        let t = BitPlaneTensor::from_bits(
            3,
            &[2],
            &[true, false, true, true, false, true],
            -1.0,
            "101".parse().unwrap(),
        )
        .unwrap();
        let g = ste_backward(&[0.7f64, -1.3], &t).unwrap();
        assert_eq!(&g[2..4], &[0.0, 0.0]);
        assert!(g[0] != 0.0 && g[4] != 0.0);

        let z = ste_backward(&[0.0f64, 0.0], &t).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));

        assert!(matches!(
            ste_backward(&[1.0f64], &t),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(BitPlaneTensor::new(1, &[1], vec![0.0], 0.0, BitMask::all(2)).is_err());
        assert!(BitPlaneTensor::new(3, &[2], vec![0.0; 6], 0.0, BitMask::all(2)).is_err());
        assert!(BitPlaneTensor::new(2, &[2], vec![0.0; 3], 0.0, BitMask::all(2)).is_err());
        assert!(BitPlaneTensor::new(2, &[2], vec![0.0; 4], f64::NAN, BitMask::all(2)).is_err());
    }

    #[test]
    fn max_magnitude_bound() {
        let t = BitPlaneTensor::from_bits(5, &[1], &[true; 5], -2.0, BitMask::all(5)).unwrap();
        assert_eq!(t.reconstruct::<f64>()[0], -t.max_magnitude());
        assert_eq!(max_integer(5), 15);
        assert_eq!(max_integer(64), (1u64 << 63) - 1);
    }
}
