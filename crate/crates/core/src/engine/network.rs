use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{self, ConvGeometry, LayerSpec};
use super::tensor::Tensor;
use crate::bits::{BitMask, BitPlaneTensor};
use crate::error::{Error, Result};
use crate::real::Real;

/// Where a parameterized layer keeps its weights.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamStore {
    /// Weights rebuilt from trainable bit planes.
    Bits(BitPlaneTensor),
    /// Plain real weights (conventional training).
    Float { shape: Vec<usize>, values: Vec<f64> },
}

impl ParamStore {
    pub fn shape(&self) -> &[usize] {
        match self {
            ParamStore::Bits(t) => t.shape(),
            ParamStore::Float { shape, .. } => shape,
        }
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights<T: Real>(&self) -> Vec<T> {
        match self {
            ParamStore::Bits(t) => t.reconstruct(),
            ParamStore::Float { values, .. } => values.iter().map(|&v| T::of(v)).collect(),
        }
    }

    pub fn as_bits(&self) -> Option<&BitPlaneTensor> {
        match self {
            ParamStore::Bits(t) => Some(t),
            ParamStore::Float { .. } => None,
        }
    }

    pub fn as_bits_mut(&mut self) -> Option<&mut BitPlaneTensor> {
        match self {
            ParamStore::Bits(t) => Some(t),
            ParamStore::Float { .. } => None,
        }
    }
}

/// How freshly built parameterized layers store their weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightMode {
    Float,
    Bits { k: usize, mask: BitMask },
}

/// Bias-free feed-forward network.
#[derive(Debug, Clone)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    params: Vec<Option<ParamStore>>,
    /// Per-sample input shape of every layer followed by the output shape.
    shapes: Vec<Vec<usize>>,
    version: u64,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape
            && self.layers == other.layers
            && self.params == other.params
    }
}

/// Activations saved by [`Network::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    version: u64,
    inputs: Vec<Tensor<T>>,
    weights: Vec<Option<Vec<T>>>,
    pool_args: Vec<Option<Vec<usize>>>,
    output_shape: Vec<usize>,
}

impl Network {
    pub fn new(
        input_shape: &[usize],
        layers: Vec<LayerSpec>,
        params: Vec<Option<ParamStore>>,
    ) -> Result<Self> {
        if layers.len() != params.len() {
            return Err(Error::InvalidInput(format!(
                "{} layers but {} parameter slots",
                layers.len(),
                params.len()
            )));
        }
        let mut shapes = vec![input_shape.to_vec()];
        for (i, (spec, p)) in layers.iter().zip(&params).enumerate() {
            let next = spec.output_shape(shapes.last().unwrap())?;
            match (spec.param_shape(), p) {
                (Some(want), Some(store)) if store.shape() == want.as_slice() => {}
                (Some(want), Some(store)) => return Err(Error::shape(&want, store.shape())),
                (Some(_), None) => {
                    return Err(Error::InvalidInput(format!("layer {i} is missing its weights")))
                }
                (None, Some(_)) => {
                    return Err(Error::InvalidInput(format!("layer {i} takes no weights")))
                }
                (None, None) => {}
            }
            shapes.push(next);
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            params,
            shapes,
            version: 0,
        })
    }

    /// Fresh network. Bit-plane layers use [`BitPlaneTensor::kaiming`];
    /// float layers draw from `N(0, 2/fan_in)`. Layer `i` uses RNG stream `i`.
    pub fn init(
        input_shape: &[usize],
        layers: Vec<LayerSpec>,
        mode: &WeightMode,
        seed: u64,
    ) -> Result<Self> {
        if let WeightMode::Bits { k, mask } = mode {
            if mask.len() != *k {
                return Err(Error::InvalidInput(format!(
                    "mask {mask} does not have {k} bits"
                )));
            }
        }
        let mut params = Vec::with_capacity(layers.len());
        for (i, spec) in layers.iter().enumerate() {
            let store = match (spec.param_shape(), spec.fan_in()) {
                (Some(shape), Some(fan_in)) => Some(match mode {
                    WeightMode::Float => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(i as u64);
                        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                            .expect("finite std");
                        let n: usize = shape.iter().product();
                        ParamStore::Float {
                            values: (0..n).map(|_| normal.sample(&mut rng)).collect(),
                            shape,
                        }
                    }
                    WeightMode::Bits { k, mask } => ParamStore::Bits(BitPlaneTensor::kaiming(
                        *k,
                        &shape,
                        fan_in,
                        mask.clone(),
                        seed,
                        i as u64,
                    )?),
                }),
                _ => None,
            };
            params.push(store);
        }
        Self::new(input_shape, layers, params)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Option<ParamStore>] {
        &self.params
    }

    /// Mutable access to one layer's weights. Invalidates outstanding
    /// forward caches.
    pub fn param_mut(&mut self, layer: usize) -> Option<&mut ParamStore> {
        self.version += 1;
        self.params.get_mut(layer).and_then(Option::as_mut)
    }

    /// Indices of the layers that carry weights.
    pub fn parameterized(&self) -> impl Iterator<Item = usize> + '_ {
        self.params
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_some())
            .map(|(i, _)| i)
    }

    /// Bit-plane tensors in layer order.
    pub fn bit_tensors(&self) -> impl Iterator<Item = (usize, &BitPlaneTensor)> {
        self.params
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().and_then(ParamStore::as_bits).map(|t| (i, t)))
    }

    pub fn weight_count(&self) -> usize {
        self.params.iter().flatten().map(ParamStore::len).sum()
    }

    pub fn weights<T: Real>(&self) -> Vec<Option<Vec<T>>> {
        self.params
            .iter()
            .map(|p| p.as_ref().map(ParamStore::weights))
            .collect()
    }

    fn check_batch<T: Real>(&self, batch: &Tensor<T>) -> Result<()> {
        if batch.shape().len() != self.input_shape.len() + 1
            || batch.shape()[1..] != self.input_shape[..]
        {
            let mut want = vec![batch.batch()];
            want.extend_from_slice(&self.input_shape);
            return Err(Error::shape(&want, batch.shape()));
        }
        Ok(())
    }

    /// Logits only, without keeping activations.
    pub fn logits<T: Real>(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let weights = self.weights::<T>();
        self.logits_with(&weights, batch)
    }

    /// Logits using externally supplied weights (same layout as
    /// [`Network::weights`]).
    pub fn logits_with<T: Real>(
        &self,
        weights: &[Option<Vec<T>>],
        batch: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for (i, spec) in self.layers.iter().enumerate() {
            x = self.layer_forward(i, spec, weights[i].as_deref(), &x)?.0;
        }
        Ok(x)
    }

    pub fn predict<T: Real>(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        Ok(self.logits(batch)?.argmax_rows())
    }

    fn layer_forward<T: Real>(
        &self,
        i: usize,
        spec: &LayerSpec,
        w: Option<&[T]>,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, Option<Vec<usize>>)> {
        Ok(match *spec {
            LayerSpec::Dense { inputs, outputs } => {
                let w = w.ok_or_else(|| Error::InvalidInput(format!("layer {i} has no weights")))?;
                (layers::dense_forward(x, w, inputs, outputs), None)
            }
            LayerSpec::Conv2d { .. } => {
                let w = w.ok_or_else(|| Error::InvalidInput(format!("layer {i} has no weights")))?;
                let g = ConvGeometry::new(spec, x.shape())?;
                (layers::conv_forward(x, w, &g), None)
            }
            LayerSpec::Relu => (layers::relu(x), None),
            LayerSpec::MaxPool2x2 => {
                let (y, arg) = layers::maxpool_forward(x);
                (y, Some(arg))
            }
            LayerSpec::Flatten => {
                let b = x.batch();
                let n = x.sample_len();
                (x.clone().reshaped(&[b, n])?, None)
            }
        })
    }

    pub fn forward<T: Real>(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_batch(batch)?;
        let weights = self.weights::<T>();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pool_args = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (i, spec) in self.layers.iter().enumerate() {
            let (y, arg) = self.layer_forward(i, spec, weights[i].as_deref(), &x)?;
            inputs.push(x);
            pool_args.push(arg);
            x = y;
        }
        let cache = ForwardCache {
            version: self.version,
            inputs,
            weights,
            pool_args,
            output_shape: x.shape().to_vec(),
        };
        Ok((x, cache))
    }

    /// Gradients of the loss with respect to each layer's (reconstructed)
    /// weights, aligned with [`Network::layers`].
    pub fn backward<T: Real>(
        &self,
        cache: &ForwardCache<T>,
        grad_logits: &Tensor<T>,
    ) -> Result<Vec<Option<Vec<T>>>> {
        if cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(Error::InvalidInput(
                "forward cache is stale or belongs to another network".into(),
            ));
        }
        if grad_logits.shape() != cache.output_shape.as_slice() {
            return Err(Error::shape(&cache.output_shape, grad_logits.shape()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.layers.len()];
        let mut g = grad_logits.clone();
        for (i, spec) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            g = match *spec {
                LayerSpec::Dense { inputs, outputs } => {
                    let w = cache.weights[i].as_deref().expect("dense weights");
                    let (gi, gw) = layers::dense_backward(input, w, &g, inputs, outputs);
                    grads[i] = Some(gw);
                    gi
                }
                LayerSpec::Conv2d { .. } => {
                    let w = cache.weights[i].as_deref().expect("conv weights");
                    let geom = ConvGeometry::new(spec, input.shape())?;
                    let (gi, gw) = layers::conv_backward(input, w, &g, &geom);
                    grads[i] = Some(gw);
                    gi
                }
                LayerSpec::Relu => layers::relu_backward(input, &g),
                LayerSpec::MaxPool2x2 => {
                    let arg = cache.pool_args[i].as_deref().expect("pool indices");
                    layers::maxpool_backward(input.shape(), arg, &g)
                }
                LayerSpec::Flatten => g.reshaped(input.shape())?,
            };
        }
        Ok(grads)
    }

    /// Applies `mask` to every bit-plane layer. Only valid before training:
    /// the trainer never changes masks afterwards.
    pub fn set_masks(&mut self, mask: &BitMask) -> Result<()> {
        self.version += 1;
        for p in self.params.iter_mut().flatten() {
            if let ParamStore::Bits(t) = p {
                t.set_mask(mask.clone())?;
            }
        }
        Ok(())
    }
}
