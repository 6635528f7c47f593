//! Adam on virtual bits (bit-plane layers) and raw weights (float layers),
//! plus the step learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::network::{Network, ParamStore};
use crate::bits::BitPlaneTensor;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moments for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<P> {
    m: Vec<P>,
    v: Vec<P>,
    t: u64,
}

/// Per-step scalars shared by every element.
#[derive(Clone, Copy)]
struct StepScalars {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    bias1: f64,
    bias2: f64,
}

impl StepScalars {
    fn new(config: &AdamConfig, lr: f64, t: u64) -> Self {
        let t = t as i32;
        Self {
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
            lr,
            bias1: 1.0 - config.beta1.powi(t),
            bias2: 1.0 - config.beta2.powi(t),
        }
    }

    #[inline(always)]
    fn update<P: Real>(&self, x: &mut P, m: &mut P, v: &mut P, g: P) {
        let b1 = P::of(self.beta1);
        let b2 = P::of(self.beta2);
        *m = b1 * *m + (P::one() - b1) * g;
        *v = b2 * *v + (P::one() - b2) * g * g;
        // moments of a parameter whose gradient stays zero decay into the
        // subnormal range, where arithmetic is orders of magnitude slower
        if m.abs() < P::min_positive_value() {
            *m = P::zero();
        }
        if *v < P::min_positive_value() {
            *v = P::zero();
        }
        let m_hat = *m / P::of(self.bias1);
        let v_hat = *v / P::of(self.bias2);
        *x = *x - P::of(self.lr) * m_hat / (v_hat.sqrt() + P::of(self.eps));
    }
}

impl<P: Real> AdamState<P> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![P::zero(); len],
            v: vec![P::zero(); len],
            t: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[P], &[P]) {
        (&self.m, &self.v)
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [P], grads: &[P], lr: f64, config: &AdamConfig) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(&[self.m.len()], &[params.len(), grads.len()]));
        }
        self.t += 1;
        let s = StepScalars::new(config, lr, self.t);
        for (((x, m), v), &g) in params.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(grads) {
            s.update(x, m, v, g);
        }
        Ok(())
    }
}

impl AdamState<f32> {
    /// Straight-through backward and Adam update of a bit-plane tensor in one
    /// pass. Frozen planes are skipped entirely, so their virtual bits and
    /// moments never change. Equivalent to [`crate::bits::ste_backward`]
    /// followed by [`AdamState::step`].
    pub fn step_bit_planes<T: Real>(
        &mut self,
        tensor: &mut BitPlaneTensor,
        grad_w: &[T],
        lr: f64,
        config: &AdamConfig,
    ) -> Result<()> {
        let n = tensor.len();
        let k = tensor.k();
        if grad_w.len() != n || self.m.len() != k * n {
            return Err(Error::shape(&[n], &[grad_w.len()]));
        }
        self.t += 1;
        let s = StepScalars::new(config, lr, self.t);
        let (mags, signs) = tensor.magnitudes_and_signs();
        let scale = tensor.scale();
        let mask = tensor.mask().clone();
        let x = tensor.virtual_bits_mut();
        let mut g = vec![0.0f32; n];
        for plane in (0..k).filter(|&p| mask.is_trainable(p)) {
            if plane == k - 1 {
                for e in 0..n {
                    g[e] = (-2.0 * grad_w[e].as_f64() * (mags[e] as f64 * scale)) as f32;
                }
            } else {
                let w = scale * (plane as f64).exp2();
                for e in 0..n {
                    let sign = if signs[e] { -1.0 } else { 1.0 };
                    g[e] = (grad_w[e].as_f64() * w * sign) as f32;
                }
            }
            let r = plane * n..(plane + 1) * n;
            for (((xv, m), v), &gv) in x[r.clone()]
                .iter_mut()
                .zip(&mut self.m[r.clone()])
                .zip(&mut self.v[r])
                .zip(&g)
            {
                s.update(xv, m, v, gv);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum LayerState {
    Bits(AdamState<f32>),
    Float(AdamState<f64>),
}

/// Adam over every parameterized layer of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    states: Vec<Option<LayerState>>,
}

impl Adam {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        let states = net
            .params()
            .iter()
            .map(|p| {
                p.as_ref().map(|store| match store {
                    ParamStore::Bits(t) => LayerState::Bits(AdamState::new(t.k() * t.len())),
                    ParamStore::Float { values, .. } => LayerState::Float(AdamState::new(values.len())),
                })
            })
            .collect();
        Self { config, states }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Applies one update given weight gradients from [`Network::backward`].
    pub fn step<T: Real>(&mut self, net: &mut Network, grads: &[Option<Vec<T>>], lr: f64) -> Result<()> {
        if grads.len() != self.states.len() {
            return Err(Error::InvalidInput("gradient list does not match network".into()));
        }
        for (i, (state, grad)) in self.states.iter_mut().zip(grads).enumerate() {
            let (Some(state), Some(grad)) = (state.as_mut(), grad.as_ref()) else {
                continue;
            };
            let store = net
                .param_mut(i)
                .ok_or_else(|| Error::InvalidInput(format!("layer {i} has no weights")))?;
            match (state, store) {
                (LayerState::Bits(s), ParamStore::Bits(t)) => {
                    s.step_bit_planes(t, grad, lr, &self.config)?;
                }
                (LayerState::Float(s), ParamStore::Float { values, .. }) => {
                    let g: Vec<f64> = grad.iter().map(|v| v.as_f64()).collect();
                    s.step(values, &g, lr, &self.config)?;
                }
                _ => return Err(Error::InvalidInput(format!("layer {i} changed storage kind"))),
            }
        }
        Ok(())
    }
}

/// `base_lr` divided by 10 for every milestone epoch already reached.
pub fn lr_schedule(epoch: usize, base_lr: f64, milestones: &[usize]) -> f64 {
    let passed = milestones.iter().filter(|&&m| epoch >= m).count();
    base_lr / 10f64.powi(passed as i32)
}
