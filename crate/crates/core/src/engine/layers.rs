//! Layer kinds and their batched forward/backward kernels.
//!
//! Activations are NHWC. Dense weights are `(inputs, outputs)`, convolution
//! kernels `(kernel_h, kernel_w, in_channels, out_channels)`. No layer has a
//! bias.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::real::{gemm, Op, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Symmetric zero padding of `(kernel - 1) / 2` on each side.
    Same,
    Valid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv2d {
        kernel_h: usize,
        kernel_w: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        padding: Padding,
    },
    Relu,
    #[serde(rename = "maxpool2x2")]
    MaxPool2x2,
    Flatten,
}

impl LayerSpec {
    pub fn is_parameterized(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    pub fn param_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => Some(vec![inputs, outputs]),
            LayerSpec::Conv2d {
                kernel_h,
                kernel_w,
                in_channels,
                out_channels,
                ..
            } => Some(vec![kernel_h, kernel_w, in_channels, out_channels]),
            _ => None,
        }
    }

    /// Number of inputs feeding one output unit.
    pub fn fan_in(&self) -> Option<usize> {
        match *self {
            LayerSpec::Dense { inputs, .. } => Some(inputs),
            LayerSpec::Conv2d {
                kernel_h,
                kernel_w,
                in_channels,
                ..
            } => Some(kernel_h * kernel_w * in_channels),
            _ => None,
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if input != [inputs] {
                    return Err(Error::shape(&[inputs], input));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv2d {
                kernel_h,
                kernel_w,
                in_channels,
                out_channels,
                stride,
                padding,
            } => {
                if kernel_h == 0 || kernel_w == 0 || stride == 0 {
                    return Err(Error::InvalidInput("conv kernel and stride must be >= 1".into()));
                }
                let [h, w, c] = input else {
                    return Err(Error::shape(&[0, 0, in_channels], input));
                };
                if *c != in_channels {
                    return Err(Error::shape(&[*h, *w, in_channels], input));
                }
                let (ph, pw) = pads(kernel_h, kernel_w, padding);
                let oh = (h + 2 * ph).checked_sub(kernel_h).map(|v| v / stride + 1);
                let ow = (w + 2 * pw).checked_sub(kernel_w).map(|v| v / stride + 1);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![oh, ow, out_channels]),
                    _ => Err(Error::InvalidInput(format!(
                        "kernel {kernel_h}x{kernel_w} larger than input {h}x{w}"
                    ))),
                }
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool2x2 => {
                let [h, w, c] = input else {
                    return Err(Error::InvalidInput("maxpool expects an HWC input".into()));
                };
                if *h < 2 || *w < 2 {
                    return Err(Error::InvalidInput("maxpool input smaller than 2x2".into()));
                }
                Ok(vec![h / 2, w / 2, *c])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

fn pads(kh: usize, kw: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Same => ((kh - 1) / 2, (kw - 1) / 2),
        Padding::Valid => (0, 0),
    }
}

pub(crate) fn dense_forward<T: Real>(
    input: &Tensor<T>,
    w: &[T],
    inputs: usize,
    outputs: usize,
) -> Tensor<T> {
    let b = input.batch();
    let mut out = vec![T::zero(); b * outputs];
    gemm(b, inputs, outputs, input.data(), Op::Plain, w, Op::Plain, T::zero(), &mut out);
    Tensor::new(&[b, outputs], out).expect("dense output shape")
}

/// Returns (grad_input, grad_weight).
pub(crate) fn dense_backward<T: Real>(
    input: &Tensor<T>,
    w: &[T],
    grad_out: &Tensor<T>,
    inputs: usize,
    outputs: usize,
) -> (Tensor<T>, Vec<T>) {
    let b = input.batch();
    let mut gw = vec![T::zero(); inputs * outputs];
    gemm(inputs, b, outputs, input.data(), Op::Transposed, grad_out.data(), Op::Plain, T::zero(), &mut gw);
    let mut gi = vec![T::zero(); b * inputs];
    gemm(b, outputs, inputs, grad_out.data(), Op::Plain, w, Op::Transposed, T::zero(), &mut gi);
    (
        Tensor::new(input.shape(), gi).expect("dense grad shape"),
        gw,
    )
}

pub(crate) struct ConvGeometry {
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    stride: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeometry {
    pub(crate) fn new(spec: &LayerSpec, input_shape: &[usize]) -> Result<Self> {
        let LayerSpec::Conv2d {
            kernel_h,
            kernel_w,
            in_channels,
            out_channels,
            stride,
            padding,
        } = *spec
        else {
            return Err(Error::InvalidInput("not a conv layer".into()));
        };
        let out = spec.output_shape(&input_shape[1..])?;
        let (ph, pw) = pads(kernel_h, kernel_w, padding);
        Ok(Self {
            h: input_shape[1],
            w: input_shape[2],
            cin: in_channels,
            kh: kernel_h,
            kw: kernel_w,
            cout: out_channels,
            stride,
            ph,
            pw,
            oh: out[0],
            ow: out[1],
        })
    }

    /// Input row/col for an output position and kernel tap, if inside.
    #[inline]
    fn source(&self, o: usize, k: usize, pad: usize, limit: usize) -> Option<usize> {
        (o * self.stride + k).checked_sub(pad).filter(|&v| v < limit)
    }
}

pub(crate) fn conv_forward<T: Real>(input: &Tensor<T>, w: &[T], g: &ConvGeometry) -> Tensor<T> {
    let b = input.batch();
    let mut out = vec![T::zero(); b * g.oh * g.ow * g.cout];
    let x = input.data();
    for n in 0..b {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o0 = ((n * g.oh + oy) * g.ow + ox) * g.cout;
                let acc = &mut out[o0..o0 + g.cout];
                for ky in 0..g.kh {
                    let Some(iy) = g.source(oy, ky, g.ph, g.h) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.source(ox, kx, g.pw, g.w) else { continue };
                        let i0 = ((n * g.h + iy) * g.w + ix) * g.cin;
                        let w0 = (ky * g.kw + kx) * g.cin * g.cout;
                        for ci in 0..g.cin {
                            let v = x[i0 + ci];
                            if v == T::zero() {
                                continue;
                            }
                            let row = &w[w0 + ci * g.cout..w0 + (ci + 1) * g.cout];
                            for (a, &wv) in acc.iter_mut().zip(row) {
                                *a = *a + v * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[b, g.oh, g.ow, g.cout], out).expect("conv output shape")
}

pub(crate) fn conv_backward<T: Real>(
    input: &Tensor<T>,
    w: &[T],
    grad_out: &Tensor<T>,
    g: &ConvGeometry,
) -> (Tensor<T>, Vec<T>) {
    let b = input.batch();
    let x = input.data();
    let go = grad_out.data();
    let mut gi = vec![T::zero(); x.len()];
    let mut gw = vec![T::zero(); w.len()];
    for n in 0..b {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o0 = ((n * g.oh + oy) * g.ow + ox) * g.cout;
                let gout = &go[o0..o0 + g.cout];
                for ky in 0..g.kh {
                    let Some(iy) = g.source(oy, ky, g.ph, g.h) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.source(ox, kx, g.pw, g.w) else { continue };
                        let i0 = ((n * g.h + iy) * g.w + ix) * g.cin;
                        let w0 = (ky * g.kw + kx) * g.cin * g.cout;
                        for ci in 0..g.cin {
                            let r = w0 + ci * g.cout;
                            let row = &w[r..r + g.cout];
                            let mut s = T::zero();
                            for (&gv, &wv) in gout.iter().zip(row) {
                                s = s + gv * wv;
                            }
                            gi[i0 + ci] = gi[i0 + ci] + s;
                            let v = x[i0 + ci];
                            if v != T::zero() {
                                for (gwv, &gv) in gw[r..r + g.cout].iter_mut().zip(gout) {
                                    *gwv = *gwv + v * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (Tensor::new(input.shape(), gi).expect("conv grad shape"), gw)
}

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub(crate) fn relu_backward<T: Real>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data).expect("relu grad shape")
}

/// Returns the pooled tensor and, for every output, the flat input index it
/// was taken from.
pub(crate) fn maxpool_forward<T: Real>(input: &Tensor<T>) -> (Tensor<T>, Vec<usize>) {
    let (b, h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]);
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(b * oh * ow * c);
    let mut arg = Vec::with_capacity(b * oh * ow * c);
    for n in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = ((n * h + 2 * oy) * w + 2 * ox) * c + ch;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((n * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    out.push(x[best]);
                    arg.push(best);
                }
            }
        }
    }
    (
        Tensor::new(&[b, oh, ow, c], out).expect("pool output shape"),
        arg,
    )
}

pub(crate) fn maxpool_backward<T: Real>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let mut gi = Tensor::zeros(input_shape);
    let d = gi.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        d[idx] = d[idx] + g;
    }
    gi
}
