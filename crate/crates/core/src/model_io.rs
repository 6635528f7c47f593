//! Binary model files.
//!
//! All integers are little-endian.
//!
//! ```text
//! model   := "BWTM" version:u16 shape layers
//! int     := "BWTI" version:u16 scale:f64 shape int_layers
//! shape   := ndim:u8 dim:u32*
//! layers  := count:u32 (layer params)*
//! layer   := 0 inputs:u32 outputs:u32                       dense
//!          | 1 kh:u32 kw:u32 cin:u32 cout:u32 stride:u32 pad:u8  conv (pad 0 same, 1 valid)
//!          | 2 | 3 | 4                                      relu, maxpool 2x2, flatten
//! params  := 0                                              no weights
//!          | 1 f64*                                         float weights
//!          | 2 k:u8 alpha:f64 mask:[u8; k] x:f32*           virtual bits, plane-major
//!          | 3 k:u8 alpha:f64 mask:[u8; k] bits:[u8]        packed bits
//! ```
//!
//! Weight counts follow from the layer descriptor. The mask is the ASCII
//! string form (sign first). Packed bits use [`BitPlaneTensor::pack_bits`]
//! and load back with virtual bits of exactly `+1` / `-1`. Integer layers
//! store `k:u8` followed by `i64` weights, or a single `0` byte.

use std::fs;
use std::path::Path;

use crate::bits::{BitMask, BitPlaneTensor};
use crate::engine::{LayerSpec, Network, Padding, ParamStore};
use crate::error::{Error, Result};
use crate::trainer::{IntegerLayer, IntegerNetwork};

pub const MODEL_MAGIC: &[u8; 4] = b"BWTM";
pub const INTEGER_MAGIC: &[u8; 4] = b"BWTI";
pub const FORMAT_VERSION: u16 = 1;

/// How bit-plane layers are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitEncoding {
    /// Full `f32` virtual bits; training can resume exactly.
    #[default]
    VirtualBits,
    /// One bit per plane and weight; keeps the weights, drops the margins.
    Packed,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn shape(&mut self, shape: &[usize]) -> Result<()> {
        let n = u8::try_from(shape.len()).map_err(|_| Error::Format("too many dimensions".into()))?;
        self.u8(n);
        shape.iter().try_for_each(|&d| self.u32(d))
    }

    fn layer(&mut self, spec: &LayerSpec) -> Result<()> {
        match *spec {
            LayerSpec::Dense { inputs, outputs } => {
                self.u8(0);
                self.u32(inputs)?;
                self.u32(outputs)?;
            }
            LayerSpec::Conv2d { kernel_h, kernel_w, in_channels, out_channels, stride, padding } => {
                self.u8(1);
                for v in [kernel_h, kernel_w, in_channels, out_channels, stride] {
                    self.u32(v)?;
                }
                self.u8(match padding {
                    Padding::Same => 0,
                    Padding::Valid => 1,
                });
            }
            LayerSpec::Relu => self.u8(2),
            LayerSpec::MaxPool2x2 => self.u8(3),
            LayerSpec::Flatten => self.u8(4),
        }
        Ok(())
    }

    fn bit_header(&mut self, t: &BitPlaneTensor) {
        self.u8(t.k() as u8);
        self.f64(t.alpha());
        self.bytes(t.mask().to_string().as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::Format(format!(
                "not a {} file",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        Ok(())
    }

    fn shape(&mut self) -> Result<Vec<usize>> {
        let n = self.u8()? as usize;
        (0..n).map(|_| self.u32()).collect()
    }

    fn layer(&mut self) -> Result<LayerSpec> {
        Ok(match self.u8()? {
            0 => LayerSpec::Dense { inputs: self.u32()?, outputs: self.u32()? },
            1 => {
                let kernel_h = self.u32()?;
                let kernel_w = self.u32()?;
                let in_channels = self.u32()?;
                let out_channels = self.u32()?;
                let stride = self.u32()?;
                let padding = match self.u8()? {
                    0 => Padding::Same,
                    1 => Padding::Valid,
                    p => return Err(Error::Format(format!("unknown padding tag {p}"))),
                };
                LayerSpec::Conv2d { kernel_h, kernel_w, in_channels, out_channels, stride, padding }
            }
            2 => LayerSpec::Relu,
            3 => LayerSpec::MaxPool2x2,
            4 => LayerSpec::Flatten,
            t => return Err(Error::Format(format!("unknown layer tag {t}"))),
        })
    }

    fn bit_header(&mut self) -> Result<(usize, f64, BitMask)> {
        let k = self.u8()? as usize;
        let alpha = self.f64()?;
        let text = std::str::from_utf8(self.take(k)?)
            .map_err(|_| Error::Format("mask is not ASCII".into()))?;
        let mask: BitMask = text.parse().map_err(|e: Error| Error::Format(e.to_string()))?;
        Ok((k, alpha, mask))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn weight_shape(spec: &LayerSpec) -> Result<Vec<usize>> {
    spec.param_shape()
        .ok_or_else(|| Error::Format("weights stored for a layer without parameters".into()))
}

fn format_err(e: Error) -> Error {
    match e {
        Error::Format(_) => e,
        other => Error::Format(other.to_string()),
    }
}

pub fn to_bytes(net: &Network, encoding: BitEncoding) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.bytes(MODEL_MAGIC);
    w.u16(FORMAT_VERSION);
    w.shape(net.input_shape())?;
    w.u32(net.layers().len())?;
    for (spec, p) in net.layers().iter().zip(net.params()) {
        w.layer(spec)?;
        match p {
            None => w.u8(0),
            Some(ParamStore::Float { values, .. }) => {
                w.u8(1);
                values.iter().for_each(|&v| w.f64(v));
            }
            Some(ParamStore::Bits(t)) => match encoding {
                BitEncoding::VirtualBits => {
                    w.u8(2);
                    w.bit_header(t);
                    for v in t.virtual_bits() {
                        w.bytes(&v.to_le_bytes());
                    }
                }
                BitEncoding::Packed => {
                    w.u8(3);
                    w.bit_header(t);
                    w.bytes(&t.pack_bits());
                }
            },
        }
    }
    Ok(w.0)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header(MODEL_MAGIC)?;
    let input_shape = r.shape()?;
    let count = r.u32()?;
    let mut layers = Vec::new();
    let mut params = Vec::new();
    for _ in 0..count {
        let spec = r.layer()?;
        let store = match r.u8()? {
            0 => None,
            1 => {
                let shape = weight_shape(&spec)?;
                let n: usize = shape.iter().product();
                let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("layer too large".into()))?)?;
                let values = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Some(ParamStore::Float { shape, values })
            }
            2 => {
                let shape = weight_shape(&spec)?;
                let (k, alpha, mask) = r.bit_header()?;
                let n: usize = shape.iter().product::<usize>() * k;
                let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Format("layer too large".into()))?)?;
                let x = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Some(ParamStore::Bits(
                    BitPlaneTensor::new(k, &shape, x, alpha, mask).map_err(format_err)?,
                ))
            }
            3 => {
                let shape = weight_shape(&spec)?;
                let (k, alpha, mask) = r.bit_header()?;
                let n: usize = shape.iter().product::<usize>() * k;
                let raw = r.take(n.div_ceil(8))?;
                Some(ParamStore::Bits(
                    BitPlaneTensor::from_packed(k, &shape, raw, alpha, mask).map_err(format_err)?,
                ))
            }
            f => return Err(Error::Format(format!("unknown parameter flag {f}"))),
        };
        layers.push(spec);
        params.push(store);
    }
    r.finish()?;
    Network::new(&input_shape, layers, params).map_err(format_err)
}

pub fn save(net: &Network, path: &Path, encoding: BitEncoding) -> Result<()> {
    fs::write(path, to_bytes(net, encoding)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Network> {
    from_bytes(&fs::read(path)?)
}

pub fn integer_to_bytes(net: &IntegerNetwork) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.bytes(INTEGER_MAGIC);
    w.u16(FORMAT_VERSION);
    w.f64(net.input_scale());
    w.shape(net.input_shape())?;
    w.u32(net.layers().len())?;
    for (spec, layer) in net.layers().iter().zip(net.weights()) {
        w.layer(spec)?;
        match layer {
            None => w.u8(0),
            Some(l) => {
                w.u8(l.k as u8);
                l.values.iter().for_each(|v| w.bytes(&v.to_le_bytes()));
            }
        }
    }
    Ok(w.0)
}

pub fn integer_from_bytes(bytes: &[u8]) -> Result<IntegerNetwork> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header(INTEGER_MAGIC)?;
    let scale = r.f64()?;
    let input_shape = r.shape()?;
    let count = r.u32()?;
    let mut layers = Vec::new();
    let mut weights = Vec::new();
    for _ in 0..count {
        let spec = r.layer()?;
        let k = r.u8()? as usize;
        weights.push(if k == 0 {
            None
        } else {
            let shape = weight_shape(&spec)?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("layer too large".into()))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Some(IntegerLayer { k, shape, values })
        });
        layers.push(spec);
    }
    r.finish()?;
    IntegerNetwork::new(scale, &input_shape, layers, weights).map_err(format_err)
}

pub fn save_integer(net: &IntegerNetwork, path: &Path) -> Result<()> {
    fs::write(path, integer_to_bytes(net)?)?;
    Ok(())
}

pub fn load_integer(path: &Path) -> Result<IntegerNetwork> {
    integer_from_bytes(&fs::read(path)?)
}
