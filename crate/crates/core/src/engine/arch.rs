//! Reference architectures.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::layers::{LayerSpec, Padding};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    /// 784-300-100-10 fully connected ReLU network for 28×28×1 inputs.
    Lenet300,
    /// Reduced VGG-style convnet for 32×32×3 inputs: two 3×3 convs per stage
    /// (16, 32, 64 channels) each followed by 2×2 max pooling, then dense
    /// 1024-256-256-10.
    Conv6,
    /// Fully connected ReLU stack on flattened inputs, written
    /// `mlp:IN-H1-...-OUT`.
    Mlp(Vec<usize>),
}

impl Architecture {
    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            Architecture::Lenet300 => vec![28, 28, 1],
            Architecture::Conv6 => vec![32, 32, 3],
            Architecture::Mlp(sizes) => vec![1, sizes[0], 1],
        }
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        match self {
            Architecture::Lenet300 => mlp(&[784, 300, 100, 10]),
            Architecture::Conv6 => {
                let conv = |cin, cout| LayerSpec::Conv2d {
                    kernel_h: 3,
                    kernel_w: 3,
                    in_channels: cin,
                    out_channels: cout,
                    stride: 1,
                    padding: Padding::Same,
                };
                let mut layers = Vec::new();
                for (cin, cout) in [(3, 16), (16, 32), (32, 64)] {
                    layers.extend([
                        conv(cin, cout),
                        LayerSpec::Relu,
                        conv(cout, cout),
                        LayerSpec::Relu,
                        LayerSpec::MaxPool2x2,
                    ]);
                }
                let mut dense = mlp(&[4 * 4 * 64, 256, 256, 10]);
                layers.append(&mut dense);
                layers
            }
            Architecture::Mlp(sizes) => mlp(sizes),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Architecture::Mlp(sizes) => *sizes.last().unwrap(),
            _ => 10,
        }
    }
}

/// Flatten followed by dense layers with ReLU between them.
fn mlp(sizes: &[usize]) -> Vec<LayerSpec> {
    let mut layers = vec![LayerSpec::Flatten];
    for (i, pair) in sizes.windows(2).enumerate() {
        if i > 0 {
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::Dense {
            inputs: pair[0],
            outputs: pair[1],
        });
    }
    layers
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Lenet300 => f.write_str("lenet300"),
            Architecture::Conv6 => f.write_str("conv6"),
            Architecture::Mlp(sizes) => {
                let parts: Vec<String> = sizes.iter().map(ToString::to_string).collect();
                write!(f, "mlp:{}", parts.join("-"))
            }
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lenet300" | "lenet300_100" | "lenet" => Ok(Architecture::Lenet300),
            "conv6" => Ok(Architecture::Conv6),
            _ => {
                let spec = s
                    .strip_prefix("mlp:")
                    .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))?;
                let sizes = spec
                    .split('-')
                    .map(|p| p.parse::<usize>().ok().filter(|&v| v > 0))
                    .collect::<Option<Vec<_>>>()
                    .filter(|v| v.len() >= 2)
                    .ok_or_else(|| Error::Config(format!("bad mlp sizes in {s:?}")))?;
                Ok(Architecture::Mlp(sizes))
            }
        }
    }
}

impl Serialize for Architecture {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Architecture {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}
