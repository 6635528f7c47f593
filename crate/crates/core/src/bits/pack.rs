//! Bit serialization shared by model files and payload embedding.
//!
//! Order: plane index ascending (lowest magnitude bit first, sign plane
//! last), row-major elements within a plane, least significant bit first
//! within each byte. The tail of the last byte is zero.

use super::{BitMask, BitPlaneTensor};
use crate::error::{Error, Result};

pub fn pack_bools<I: IntoIterator<Item = bool>>(bits: I) -> Vec<u8> {
    let mut out = Vec::new();
    for (i, b) in bits.into_iter().enumerate() {
        if i % 8 == 0 {
            out.push(0);
        }
        if b {
            *out.last_mut().unwrap() |= 1 << (i % 8);
        }
    }
    out
}

pub fn unpack_bools(bytes: &[u8], count: usize) -> Result<Vec<bool>> {
    let expected = count.div_ceil(8);
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{count} bits need {expected} bytes, got {}",
            bytes.len()
        )));
    }
    Ok((0..count).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

/// Unpacks the bit planes of a `k`-bit tensor of the given shape.
pub fn unpack_bits(bytes: &[u8], k: usize, shape: &[usize]) -> Result<Vec<bool>> {
    let len: usize = shape.iter().product();
    unpack_bools(bytes, k * len)
}

impl BitPlaneTensor {
    pub fn pack_bits(&self) -> Vec<u8> {
        pack_bools(self.bits())
    }

    pub fn from_packed(
        k: usize,
        shape: &[usize],
        bytes: &[u8],
        alpha: f64,
        mask: BitMask,
    ) -> Result<Self> {
        let bits = unpack_bits(bytes, k, shape)?;
        Self::from_bits(k, shape, &bits, alpha, mask)
    }
}
