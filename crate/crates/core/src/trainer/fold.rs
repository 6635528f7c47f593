use crate::bits::max_integer;
use crate::data::Dataset;
use crate::engine::{LayerSpec, Network, ParamStore, Tensor};
use crate::error::{Error, Result};

const CHUNK: usize = 1000;

/// Integer weights `Θ` of one layer on `k` sign-and-magnitude bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerLayer {
    pub k: usize,
    pub shape: Vec<usize>,
    pub values: Vec<i64>,
}

/// A quantized network with every per-layer scale `2^alpha` moved into one
/// input factor `a`, so the layers hold plain integers.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerNetwork {
    input_scale: f64,
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    weights: Vec<Option<IntegerLayer>>,
}

/// Folds every `2^alpha_l` into `a = 2^(sum alpha_l)`. Exact: no rounding
/// happens, only the bits are read back as integers.
pub fn fold(net: &Network) -> Result<IntegerNetwork> {
    let mut alpha = 0.0f64;
    let mut weights = Vec::with_capacity(net.layers().len());
    for (i, p) in net.params().iter().enumerate() {
        weights.push(match p {
            None => None,
            Some(ParamStore::Float { .. }) => {
                return Err(Error::Unsupported(format!(
                    "layer {i} holds float weights; only bit-plane layers fold to integers"
                )))
            }
            Some(ParamStore::Bits(t)) => {
                alpha += t.alpha();
                Some(IntegerLayer {
                    k: t.k(),
                    shape: t.shape().to_vec(),
                    values: t.integer_weights(),
                })
            }
        });
    }
    IntegerNetwork::new(
        alpha.exp2(),
        net.input_shape(),
        net.layers().to_vec(),
        weights,
    )
}

impl IntegerNetwork {
    pub fn new(
        input_scale: f64,
        input_shape: &[usize],
        layers: Vec<LayerSpec>,
        weights: Vec<Option<IntegerLayer>>,
    ) -> Result<Self> {
        if !(input_scale.is_finite() && input_scale > 0.0) {
            return Err(Error::InvalidInput(format!("input scale must be positive, got {input_scale}")));
        }
        for (i, w) in weights.iter().flatten().enumerate() {
            crate::bits::check_depth(w.k)?;
            let limit = max_integer(w.k);
            if let Some(v) = w.values.iter().find(|v| v.unsigned_abs() > limit) {
                return Err(Error::InvalidInput(format!(
                    "integer layer {i}: |{v}| exceeds {limit} on {} bits",
                    w.k
                )));
            }
            if w.values.len() != w.shape.iter().product::<usize>() {
                return Err(Error::shape(&w.shape, &[w.values.len()]));
            }
        }
        let net = Self {
            input_scale,
            input_shape: input_shape.to_vec(),
            layers,
            weights,
        };
        net.as_network()?;
        Ok(net)
    }

    /// The folded factor `a`.
    pub fn input_scale(&self) -> f64 {
        self.input_scale
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &[Option<IntegerLayer>] {
        &self.weights
    }

    /// The same structure with `Θ` as real weights and no input scaling.
    pub fn as_network(&self) -> Result<Network> {
        let params = self
            .weights
            .iter()
            .map(|w| {
                w.as_ref().map(|w| ParamStore::Float {
                    shape: w.shape.clone(),
                    values: w.values.iter().map(|&v| v as f64).collect(),
                })
            })
            .collect();
        Network::new(&self.input_shape, self.layers.clone(), params)
    }

    /// Logits on `a * x`; equal to the source network's logits on `x`.
    pub fn logits(&self, batch: &Tensor<f64>) -> Result<Tensor<f64>> {
        let a = self.input_scale;
        self.as_network()?.logits(&batch.map(|v| v * a))
    }

    /// Class predictions on raw `x`. Since `a > 0` the scale does not move
    /// the argmax, so the integer network runs on `x` directly.
    pub fn predict(&self, batch: &Tensor<f64>) -> Result<Vec<usize>> {
        self.as_network()?.predict(batch)
    }

    /// Predictions on every sample of `data`.
    pub fn predictions(&self, data: &Dataset) -> Result<Vec<usize>> {
        let net = self.as_network()?;
        let idx: Vec<usize> = (0..data.len()).collect();
        let mut out = Vec::with_capacity(data.len());
        for chunk in idx.chunks(CHUNK) {
            let (x, _) = data.gather::<f64>(chunk, 1.0);
            out.extend(net.predict(&x)?);
        }
        Ok(out)
    }
}

/// Fraction of samples on which the integer and source networks pick the
/// same class (source evaluated in `f64`).
pub fn argmax_agreement(source: &Network, folded: &IntegerNetwork, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(1.0);
    }
    let a = super::run::predictions_f64(source, data)?;
    let b = folded.predictions(data)?;
    let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    Ok(same as f64 / data.len() as f64)
}
