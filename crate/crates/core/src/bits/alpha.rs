use super::max_integer;

const SEARCH_LOW: f64 = -128.0;
const SEARCH_HIGH: f64 = 128.0;
const MAX_ITERATIONS: usize = 200;

/// Standard deviation of weights drawn uniformly from the nonzero values
/// representable on `k` bits, `{±m 2^alpha : m = 1..2^(k-1)-1}`.
///
/// The distribution is symmetric, so this is the root of the mean square
/// `2^(2 alpha) (M+1)(2M+1)/6`.
pub fn representable_std(k: usize, alpha: f64) -> f64 {
    let m = max_integer(k) as f64;
    let mean_square = (m + 1.0) * (2.0 * m + 1.0) / 6.0;
    alpha.exp2() * mean_square.sqrt()
}

/// Exponent offset that gives a layer's initial weights the Kaiming He
/// standard deviation `sqrt(2 / fan_in)`, found by bisection.
pub fn find_alpha(k: usize, fan_in: usize) -> f64 {
    assert!(k >= 2, "bit depth must be at least 2");
    assert!(fan_in >= 1, "fan-in must be positive");
    let target = (2.0 / fan_in as f64).sqrt();
    let (mut lo, mut hi) = (SEARCH_LOW, SEARCH_HIGH);
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if representable_std(k, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Probability that a uniformly random `k`-bit sign-and-magnitude weight is
/// exactly zero: every one of the `k-1` magnitude bits must be 0.
pub fn chance_sparsity(k: usize) -> f64 {
    assert!(k >= 2, "bit depth must be at least 2");
    (-((k - 1) as f64)).exp2()
}
