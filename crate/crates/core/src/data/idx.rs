//! IDX container: big-endian magic `0x0000_TTNN` (type code `TT`, `NN`
//! dimensions), `NN` big-endian `u32` sizes, then the raw elements. Only
//! unsigned-byte payloads (type `0x08`) are supported, which covers MNIST.

use crate::error::{Error, Result};

const UBYTE: u8 = 0x08;

/// Magic for a rank-3 unsigned-byte tensor (MNIST images).
pub const IMAGES_MAGIC: u32 = 0x0000_0803;
/// Magic for a rank-1 unsigned-byte tensor (MNIST labels).
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    let header = bytes
        .get(..4)
        .ok_or_else(|| Error::Format("IDX file shorter than its magic number".into()))?;
    if header[0] != 0 || header[1] != 0 {
        let magic = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
        return Err(Error::Format(format!("bad IDX magic {magic:#010x}")));
    }
    if header[2] != UBYTE {
        return Err(Error::Format(format!(
            "unsupported IDX element type {:#04x}",
            header[2]
        )));
    }
    let ndim = header[3] as usize;
    let dims_end = 4 + 4 * ndim;
    let dim_bytes = bytes
        .get(4..dims_end)
        .ok_or_else(|| Error::Format("IDX header truncated".into()))?;
    let dims: Vec<usize> = dim_bytes
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("IDX dimensions {dims:?} overflow")))?;
    let payload = &bytes[dims_end..];
    if payload.len() != count {
        return Err(Error::Format(format!(
            "IDX declares {count} elements but carries {} bytes",
            payload.len()
        )));
    }
    Ok(IdxTensor {
        dims,
        data: payload.to_vec(),
    })
}

impl IdxTensor {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.data.len());
        out.extend_from_slice(&[0, 0, UBYTE, self.dims.len() as u8]);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    pub fn magic(&self) -> u32 {
        u32::from_be_bytes([0, 0, UBYTE, self.dims.len() as u8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_fixture() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3];
        for d in [1u32, 2, 2] {
            b.extend_from_slice(&d.to_be_bytes());
        }
        b.extend_from_slice(&[0, 128, 255, 64]);
        b
    }

    #[test]
    fn parses_image_fixture() {
        let t = parse_idx(&image_fixture()).unwrap();
        assert_eq!(t.dims, vec![1, 2, 2]);
        assert_eq!(t.data, vec![0, 128, 255, 64]);
        assert_eq!(t.magic(), IMAGES_MAGIC);
    }

    #[test]
    fn parses_label_fixture() {
        let mut b = LABELS_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&3u32.to_be_bytes());
        b.extend_from_slice(&[7, 2, 1]);
        let t = parse_idx(&b).unwrap();
        assert_eq!(t.dims, vec![3]);
        assert_eq!(t.data, vec![7, 2, 1]);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut b = image_fixture();
        b[..4].copy_from_slice(&0xDEAD_BEEFu32.to_be_bytes());
        assert!(matches!(parse_idx(&b), Err(Error::Format(_))));
        let mut b = image_fixture();
        b[2] = 0x0D;
        assert!(matches!(parse_idx(&b), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_truncation_and_trailing_bytes() {
        let b = image_fixture();
        assert!(parse_idx(&b[..b.len() - 1]).is_err());
        assert!(parse_idx(&b[..10]).is_err());
        assert!(parse_idx(&b[..2]).is_err());
        let mut long = b.clone();
        long.push(0);
        assert!(parse_idx(&long).is_err());
    }

    #[test]
    fn rejects_overflowing_dimensions() {
        let mut b = vec![0, 0, 8, 4];
        for _ in 0..4 {
            b.extend_from_slice(&u32::MAX.to_be_bytes());
        }
        assert!(matches!(parse_idx(&b), Err(Error::Format(_))));
    }

    #[test]
    fn write_round_trip() {
        let b = image_fixture();
        assert_eq!(parse_idx(&b).unwrap().to_bytes(), b);
    }
}
