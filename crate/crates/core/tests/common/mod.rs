#![allow(dead_code)]

use std::fs;
use std::path::Path;

use bitwise::data::IdxTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes a small MNIST-shaped dataset: class `c` lights a 7x7 block whose
/// position depends on `c`, plus noise.
pub fn write_synthetic_mnist(dir: &Path, train: usize, test: usize) {
    for (prefix, count, seed) in [("train", train, 1u64), ("t10k", test, 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images = Vec::with_capacity(count * 784);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let c = i % 10;
            let (r0, c0) = ((c / 4) * 9 + 1, (c % 4) * 7);
            for r in 0..28 {
                for col in 0..28 {
                    let lit = (r0..r0 + 7).contains(&r) && (c0..c0 + 7).contains(&col);
                    let base: u8 = if lit { 200 } else { 0 };
                    images.push(base.saturating_add(rng.gen_range(0..40)));
                }
            }
            labels.push(c as u8);
        }
        let img = IdxTensor { dims: vec![count, 28, 28], data: images };
        let lab = IdxTensor { dims: vec![count], data: labels };
        fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), img.to_bytes()).unwrap();
        fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), lab.to_bytes()).unwrap();
    }
}

use bitwise::bits::{ste_backward, BitMask, BitPlaneTensor};
use bitwise::engine::{softmax_cross_entropy, LayerSpec, Network, ParamStore, Tensor};

pub const H: f64 = 1e-4;

pub fn random_batch(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn labels(b: usize, classes: usize) -> Vec<u8> {
    (0..b).map(|i| (i % classes) as u8).collect()
}

pub fn loss(net: &Network, x: &Tensor<f64>, y: &[u8]) -> f64 {
    softmax_cross_entropy(&net.logits::<f64>(x).unwrap(), y).unwrap().0
}

pub fn float_values(net: &mut Network, layer: usize) -> &mut Vec<f64> {
    match net.param_mut(layer).unwrap() {
        ParamStore::Float { values, .. } => values,
        ParamStore::Bits(_) => panic!("float layer expected"),
    }
}

/// `|a - b| / |b|` in the Euclidean norm.
pub fn relative(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

/// Largest relative error, over weight layers, between backprop and
/// central differences of the loss.
pub fn float_network_fd_error(mut net: Network, x: &Tensor<f64>, y: &[u8]) -> f64 {
    let (logits, cache) = net.forward::<f64>(x).unwrap();
    let (_, g) = softmax_cross_entropy(&logits, y).unwrap();
    let grads = net.backward(&cache, &g).unwrap();
    let mut worst = 0.0f64;
    for layer in net.parameterized().collect::<Vec<_>>() {
        let analytic = grads[layer].clone().unwrap();
        let mut numeric = vec![0.0; analytic.len()];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let orig = float_values(&mut net, layer)[i];
            float_values(&mut net, layer)[i] = orig + H;
            let up = loss(&net, x, y);
            float_values(&mut net, layer)[i] = orig - H;
            let down = loss(&net, x, y);
            float_values(&mut net, layer)[i] = orig;
            *slot = (up - down) / (2.0 * H);
        }
        worst = worst.max(relative(&analytic, &numeric));
    }
    worst
}

/// Weights from continuous coefficients: magnitudes sum `a_i 2^(i+alpha)`,
/// sign factor `1 - 2 a_sign`.
pub fn relaxed_weights(a: &[f64], k: usize, n: usize, alpha: f64) -> Vec<f64> {
    (0..n)
        .map(|e| {
            let mag: f64 = (0..k - 1).map(|i| a[i * n + e] * 2f64.powf(i as f64 + alpha)).sum();
            mag * (1.0 - 2.0 * a[(k - 1) * n + e])
        })
        .collect()
}

/// Straight-through gradients of a one-layer bit-plane network against
/// central differences of the relaxed decomposition. Returns the largest
/// per-plane relative error and whether every frozen plane got exactly 0.
pub fn ste_vs_relaxed(k: usize, mask: &str, alpha: f64, seed: u64) -> (f64, bool) {
    let (inputs, outputs) = (4, 3);
    let n = inputs * outputs;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<bool> = (0..k * n).map(|_| rng.gen_bool(0.5)).collect();
    let mask: BitMask = mask.parse().unwrap();
    let t = BitPlaneTensor::from_bits(k, &[inputs, outputs], &bits, alpha, mask.clone()).unwrap();
    let a: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
    for (r, w) in relaxed_weights(&a, k, n, alpha).iter().zip(t.reconstruct::<f64>()) {
        assert!((r - w).abs() <= 4.0 * f64::EPSILON * w.abs());
    }

    let layers = vec![LayerSpec::Dense { inputs, outputs }];
    let x = random_batch(&[6, inputs], seed + 1);
    let y = labels(6, outputs);
    let net = Network::new(&[inputs], layers.clone(), vec![Some(ParamStore::Bits(t.clone()))]).unwrap();
    let (logits, cache) = net.forward::<f64>(&x).unwrap();
    let (_, g) = softmax_cross_entropy(&logits, &y).unwrap();
    let grad_w = net.backward(&cache, &g).unwrap()[0].clone().unwrap();
    let ste = ste_backward(&grad_w, &t).unwrap();

    let relaxed_loss = |a: &[f64]| {
        let w = relaxed_weights(a, k, n, alpha);
        let store = ParamStore::Float { shape: vec![inputs, outputs], values: w };
        loss(&Network::new(&[inputs], layers.clone(), vec![Some(store)]).unwrap(), &x, &y)
    };
    let mut numeric = vec![0.0; k * n];
    for (j, slot) in numeric.iter_mut().enumerate() {
        let mut up = a.clone();
        up[j] += H;
        let mut down = a.clone();
        down[j] -= H;
        *slot = (relaxed_loss(&up) - relaxed_loss(&down)) / (2.0 * H);
    }
    let mut worst = 0.0f64;
    let mut frozen_zero = true;
    for plane in 0..k {
        let r = plane * n..(plane + 1) * n;
        if mask.is_trainable(plane) {
            worst = worst.max(relative(&ste[r.clone()], &numeric[r]));
        } else {
            frozen_zero &= ste[r].iter().all(|&v| v == 0.0);
        }
    }
    (worst, frozen_zero)
}

/// Direct evaluation of the sign-and-magnitude sum.
pub fn brute_force(bits: &[bool], alpha: f64) -> f64 {
    let k = bits.len();
    let mut mag = 0.0;
    for (i, &b) in bits[..k - 1].iter().enumerate() {
        if b {
            mag += 2f64.powf(i as f64 + alpha);
        }
    }
    if bits[k - 1] {
        -mag
    } else {
        mag
    }
}
