//! Byte payloads stored in the frozen bit planes of a quantized network.
//!
//! The carrier is every untrainable plane of every bit-plane layer: layers
//! in network order, planes ascending, elements row-major. A payload is
//! written as a frame: `"BWP1"`, big-endian `u32` length, big-endian CRC32
//! (IEEE) of the payload, then the payload. Bytes are laid out LSB first,
//! the same order as [`crate::bits::pack_bools`].

use crate::engine::Network;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BWP1";
pub const HEADER_BYTES: usize = 12;
pub const HEADER_BITS: u64 = HEADER_BYTES as u64 * 8;

/// (layer index, plane, elements) of each carrier plane in order.
fn carrier_planes(net: &Network) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (layer, t) in net.bit_tensors() {
        for plane in t.mask().untrainable_planes() {
            out.push((layer, plane, t.len()));
        }
    }
    out
}

/// Total bits available in untrainable planes, before framing.
pub fn raw_capacity(net: &Network) -> u64 {
    carrier_planes(net).iter().map(|&(_, _, n)| n as u64).sum()
}

/// Usable payload bits: carrier bits minus the 96-bit frame header.
pub fn capacity(net: &Network) -> u64 {
    raw_capacity(net).saturating_sub(HEADER_BITS)
}

/// Largest payload in whole bytes.
pub fn capacity_bytes(net: &Network) -> u64 {
    capacity(net) / 8
}

pub fn frame(payload: &[u8]) -> Result<Vec<u8>> {
    let len = u32::try_from(payload.len())
        .map_err(|_| Error::InvalidInput("payload longer than 4 GiB".into()))?;
    let mut out = Vec::with_capacity(HEADER_BYTES + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&crc32fast::hash(payload).to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Writes `payload` into the carrier. Virtual bits become `+1` for a 1 bit
/// and `-1` for a 0 bit; trainable planes are not touched.
pub fn embed(net: &mut Network, payload: &[u8]) -> Result<()> {
    let planes = carrier_planes(net);
    let available: u64 = planes.iter().map(|&(_, _, n)| n as u64).sum();
    if available == 0 {
        return Err(Error::NoCarrier);
    }
    let bytes = frame(payload)?;
    let needed = bytes.len() as u64 * 8;
    if needed > available {
        return Err(Error::Capacity { needed, available });
    }
    let mut bits = bytes
        .iter()
        .flat_map(|&b| (0..8).map(move |i| (b >> i) & 1 == 1));
    'outer: for (layer, plane, n) in planes {
        let t = net
            .param_mut(layer)
            .and_then(|p| p.as_bits_mut())
            .expect("carrier layer holds bit planes");
        for e in 0..n {
            match bits.next() {
                Some(bit) => t.set_bit(plane, e, bit),
                None => break 'outer,
            }
        }
    }
    Ok(())
}

struct Reader<'a> {
    net: &'a Network,
    planes: Vec<(usize, usize, usize)>,
    plane: usize,
    element: usize,
}

impl Reader<'_> {
    fn next_bit(&mut self) -> Option<bool> {
        while let Some(&(layer, plane, n)) = self.planes.get(self.plane) {
            if self.element < n {
                let t = self.net.params()[layer].as_ref()?.as_bits()?;
                let bit = t.bit(plane, self.element);
                self.element += 1;
                return Some(bit);
            }
            self.plane += 1;
            self.element = 0;
        }
        None
    }

    fn read(&mut self, count: usize) -> Option<Vec<u8>> {
        (0..count)
            .map(|_| {
                (0..8).try_fold(0u8, |acc, i| Some(acc | (u8::from(self.next_bit()?) << i)))
            })
            .collect()
    }
}

/// Reads back a framed payload, checking magic, length and CRC.
pub fn extract(net: &Network) -> Result<Vec<u8>> {
    let planes = carrier_planes(net);
    let available: u64 = planes.iter().map(|&(_, _, n)| n as u64).sum();
    if available == 0 {
        return Err(Error::NoCarrier);
    }
    let mut reader = Reader {
        net,
        planes,
        plane: 0,
        element: 0,
    };
    let header = reader
        .read(HEADER_BYTES)
        .ok_or_else(|| Error::CorruptPayload("carrier smaller than a frame header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::CorruptPayload("missing magic".into()));
    }
    let len = u32::from_be_bytes(header[4..8].try_into().unwrap()) as u64;
    let crc = u32::from_be_bytes(header[8..12].try_into().unwrap());
    if HEADER_BITS + len * 8 > available {
        return Err(Error::CorruptPayload(format!(
            "declared length {len} bytes exceeds the carrier"
        )));
    }
    let payload = reader.read(len as usize).expect("length checked against carrier");
    if crc32fast::hash(&payload) != crc {
        return Err(Error::CorruptPayload("CRC mismatch".into()));
    }
    Ok(payload)
}
