//! Image classification datasets.

mod batches;
mod idx;

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use batches::{batch_sizes, epoch_permutation, Batches};
pub use idx::{parse_idx, IdxTensor, IMAGES_MAGIC, LABELS_MAGIC};

use crate::engine::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Images in `[0, 1]`, NHWC, with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<f32>,
    dims: [usize; 3],
    labels: Vec<u8>,
    classes: usize,
    split: Split,
}

/// Maps a byte pixel to `[0, 1]`.
pub fn normalize(raw: &[u8]) -> Vec<f32> {
    raw.iter().map(|&v| v as f32 / 255.0).collect()
}

impl Dataset {
    pub fn new(
        images: Vec<f32>,
        dims: [usize; 3],
        labels: Vec<u8>,
        classes: usize,
        split: Split,
    ) -> Result<Self> {
        let per = dims.iter().product::<usize>();
        if images.len() != labels.len() * per {
            return Err(Error::Data(format!(
                "{} labels need {} pixel values, got {}",
                labels.len(),
                labels.len() * per,
                images.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Data(format!("label {bad} outside 0..{classes}")));
        }
        if images.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self {
            images,
            dims,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn images(&self) -> &[f32] {
        &self.images
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let per = self.dims.iter().product::<usize>();
        &self.images[i * per..(i + 1) * per]
    }

    /// The first `n` samples (all of them if `n >= len`).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let per = self.dims.iter().product::<usize>();
        Self {
            images: self.images[..n * per].to_vec(),
            dims: self.dims,
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
            split: self.split,
        }
    }

    /// Stacks the given samples into a batch tensor, optionally multiplying
    /// every pixel by `scale`.
    pub fn gather<T: crate::Real>(&self, indices: &[usize], scale: f64) -> (Tensor<T>, Vec<u8>) {
        let per = self.dims.iter().product::<usize>();
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend(self.image(i).iter().map(|&v| T::of(v as f64 * scale)));
            labels.push(self.labels[i]);
        }
        let shape = [indices.len(), self.dims[0], self.dims[1], self.dims[2]];
        (Tensor::new(&shape, data).expect("gather shape"), labels)
    }

    /// Gaussian class clusters squashed into `[0, 1]`: a small learnable
    /// problem for tests and examples. Shape `(1, features, 1)`.
    pub fn gaussian_blobs(count: usize, features: usize, classes: usize, seed: u64, split: Split) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers_rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let unit = Normal::new(0.0f64, 1.0).unwrap();
        let centers: Vec<Vec<f64>> = (0..classes)
            .map(|_| (0..features).map(|_| 2.0 * unit.sample(&mut centers_rng)).collect())
            .collect();
        let mut images = Vec::with_capacity(count * features);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let c = i % classes;
            labels.push(c as u8);
            for f in 0..features {
                let v = centers[c][f] + unit.sample(&mut rng);
                images.push((1.0 / (1.0 + (-v).exp())) as f32);
            }
        }
        Self::new(images, [1, features, 1], labels, classes, split).expect("valid blobs")
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Loads MNIST from the four uncompressed IDX files in `dir`.
pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let images = parse_idx(&read(&dir.join(format!("{prefix}-images-idx3-ubyte")))?)?;
    let labels = parse_idx(&read(&dir.join(format!("{prefix}-labels-idx1-ubyte")))?)?;
    if images.dims.len() != 3 || labels.dims.len() != 1 {
        return Err(Error::Data(format!(
            "expected rank-3 images and rank-1 labels, got {:?} and {:?}",
            images.dims, labels.dims
        )));
    }
    if images.dims[0] != labels.dims[0] {
        return Err(Error::Data(format!(
            "{} images but {} labels",
            images.dims[0], labels.dims[0]
        )));
    }
    Dataset::new(
        normalize(&images.data),
        [images.dims[1], images.dims[2], 1],
        labels.data,
        10,
        split,
    )
}

const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;

/// Parses CIFAR-10 binary records (label byte, then the R, G and B planes
/// of a 32×32 image) into HWC images.
pub fn parse_cifar10(bytes: &[u8], split: Split) -> Result<Dataset> {
    if bytes.len() % CIFAR_RECORD != 0 {
        return Err(Error::Format(format!(
            "CIFAR-10 batch length {} is not a multiple of {CIFAR_RECORD}",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD;
    let mut images = Vec::with_capacity(n * 3072);
    let mut labels = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(CIFAR_RECORD) {
        labels.push(rec[0]);
        let planes = &rec[1..];
        for p in 0..1024 {
            for c in 0..3 {
                images.push(planes[c * 1024 + p] as f32 / 255.0);
            }
        }
    }
    Dataset::new(images, [32, 32, 3], labels, 10, split)
}

/// Loads `data_batch_1..5.bin` or `test_batch.bin` from `dir`.
pub fn load_cifar10(dir: &Path, split: Split) -> Result<Dataset> {
    let files: Vec<String> = match split {
        Split::Train => (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
        Split::Test => vec!["test_batch.bin".into()],
    };
    let mut bytes = Vec::new();
    for f in files {
        bytes.extend(read(&dir.join(f))?);
    }
    parse_cifar10(&bytes, split)
}
