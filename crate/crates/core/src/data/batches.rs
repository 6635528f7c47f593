use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sample order for one epoch: a pure function of `(seed, epoch)`.
pub fn epoch_permutation(len: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

/// Sizes of the mini-batches covering `len` samples; only the last may be
/// short.
pub fn batch_sizes(len: usize, batch_size: usize) -> Vec<usize> {
    assert!(batch_size >= 1, "batch size must be positive");
    (0..len)
        .step_by(batch_size)
        .map(|start| batch_size.min(len - start))
        .collect()
}

/// Shuffled mini-batches of sample indices for one epoch.
pub struct Batches {
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Batches {
    pub fn new(len: usize, batch_size: usize, seed: u64, epoch: u64) -> Self {
        assert!(batch_size >= 1, "batch size must be positive");
        Self {
            order: epoch_permutation(len, seed, epoch),
            batch_size,
            pos: 0,
        }
    }
}

impl Iterator for Batches {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(batch)
    }
}
