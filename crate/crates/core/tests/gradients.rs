mod common;

use bitwise::bits::{BitMask, BitPlaneTensor};
use bitwise::engine::{LayerSpec, Network, Padding, WeightMode};
use common::{brute_force, float_network_fd_error, float_values, labels, random_batch, ste_vs_relaxed};

#[test]
fn two_layer_dense_matches_finite_differences() {
    let layers = vec![
        LayerSpec::Dense { inputs: 6, outputs: 8 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 8, outputs: 4 },
    ];
    let net = Network::init(&[6], layers, &WeightMode::Float, 11).unwrap();
    let err = float_network_fd_error(net, &random_batch(&[5, 6], 1), &labels(5, 4));
    assert!(err <= 1e-4, "{err:e}");
}

#[test]
fn every_layer_kind_matches_finite_differences() {
    for (padding, stride) in [(Padding::Same, 1), (Padding::Valid, 1), (Padding::Same, 2)] {
        let conv = LayerSpec::Conv2d {
            kernel_h: 3,
            kernel_w: 3,
            in_channels: 2,
            out_channels: 3,
            stride,
            padding,
        };
        let conv_out = conv.output_shape(&[8, 8, 2]).unwrap();
        let pooled = [conv_out[0] / 2, conv_out[1] / 2, conv_out[2]];
        let flat = pooled.iter().product();
        let layers = vec![
            conv,
            LayerSpec::Relu,
            LayerSpec::MaxPool2x2,
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: flat, outputs: 3 },
        ];
        let net = Network::init(&[8, 8, 2], layers, &WeightMode::Float, 3).unwrap();
        let err = float_network_fd_error(net, &random_batch(&[3, 8, 8, 2], 2), &labels(3, 3));
        assert!(err <= 1e-4, "{padding:?} stride {stride}: {err:e}");
    }
}

#[test]
fn straight_through_gradients_match_relaxed_decomposition() {
    for (k, mask, alpha, seed) in [(5, "11011", -3.0, 7), (2, "11", 0.0, 1), (8, "11100000", -4.5, 2)] {
        let (err, frozen_zero) = ste_vs_relaxed(k, mask, alpha, seed);
        assert!(err <= 1e-6, "k={k} mask={mask}: {err:e}");
        assert!(frozen_zero);
    }
}

#[test]
fn reconstruction_matches_brute_force_for_small_depths() {
    for k in 2..=4usize {
        for alpha in [-3.0, 0.0, 1.5] {
            for code in 0..1u32 << k {
                let bits: Vec<bool> = (0..k).map(|i| code >> i & 1 == 1).collect();
                let t = BitPlaneTensor::from_bits(k, &[1], &bits, alpha, BitMask::all(k)).unwrap();
                let w = t.reconstruct::<f64>()[0];
                let want = brute_force(&bits, alpha);
                if alpha.fract() == 0.0 {
                    assert_eq!(w, want, "k={k} code={code:b}");
                } else {
                    // m 2^alpha vs a sum of 2^(i+alpha): equal up to rounding
                    assert!((w - want).abs() <= 4.0 * f64::EPSILON * want.abs(), "k={k} code={code:b}");
                }
                assert_eq!(w == 0.0, bits[..k - 1].iter().all(|b| !b));
            }
        }
    }
}

#[test]
fn relu_networks_are_positively_homogeneous() {
    let layers = vec![
        LayerSpec::Conv2d {
            kernel_h: 3,
            kernel_w: 3,
            in_channels: 1,
            out_channels: 2,
            stride: 1,
            padding: Padding::Same,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2x2,
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: 8, outputs: 5 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 5, outputs: 3 },
    ];
    let net = Network::init(&[4, 4, 1], layers, &WeightMode::Float, 9).unwrap();
    let x = random_batch(&[4, 4, 4, 1], 3);
    let base = net.logits::<f64>(&x).unwrap();
    let c: f64 = 1.7;
    let mut scaled = net.clone();
    for i in net.parameterized().collect::<Vec<_>>() {
        float_values(&mut scaled, i).iter_mut().for_each(|v| *v *= c);
    }
    let got = scaled.logits::<f64>(&x).unwrap();
    for (a, b) in base.data().iter().zip(got.data()) {
        let want = a * c.powi(3);
        assert!((b - want).abs() <= 1e-6 * want.abs().max(1e-12), "{b} vs {want}");
    }
}
