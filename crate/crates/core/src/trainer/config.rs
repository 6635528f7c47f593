use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bits::{check_depth, BitMask};
use crate::data::{self, Dataset, Split};
use crate::engine::{Architecture, WeightMode};
use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    #[default]
    Mnist,
    Cifar10,
}

/// Everything that determines a training experiment.
///
/// Unknown keys are rejected when parsing JSON. Defaults follow the LeNet
/// schedule: Adam at `9e-4`, divided by 10 at epochs 40 and 80, 100 epochs,
/// batch 64, 5 repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub version: u32,
    pub architecture: Architecture,
    pub dataset: DatasetKind,
    /// `false` trains plain float weights (the conventional baseline).
    pub quantized: bool,
    pub k: usize,
    /// Trainable planes, sign first. Defaults to all ones.
    pub mask: Option<BitMask>,
    pub base_lr: f64,
    pub milestones: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub repeats: usize,
    pub data_dir: Option<PathBuf>,
    /// Use only the first N training / test samples.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub model_out: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
    /// Independent runs trained concurrently.
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            architecture: Architecture::Lenet300,
            dataset: DatasetKind::Mnist,
            quantized: true,
            k: 2,
            mask: None,
            base_lr: 9e-4,
            milestones: vec![40, 80],
            epochs: 100,
            batch_size: 64,
            seed: 0,
            repeats: 5,
            data_dir: None,
            train_limit: None,
            test_limit: None,
            model_out: None,
            metrics_out: None,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn mask(&self) -> BitMask {
        self.mask.clone().unwrap_or_else(|| BitMask::all(self.k))
    }

    pub fn weight_mode(&self) -> WeightMode {
        if self.quantized {
            WeightMode::Bits {
                k: self.k,
                mask: self.mask(),
            }
        } else {
            WeightMode::Float
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        if self.quantized {
            check_depth(self.k).map_err(|e| Error::Config(e.to_string()))?;
            let mask = self.mask();
            if mask.len() != self.k {
                return bad(format!("mask {mask} has {} bits but k = {}", mask.len(), self.k));
            }
            mask.ensure_trainable().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return bad(format!("base_lr must be positive, got {}", self.base_lr));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("milestones {:?} must be strictly ascending", self.milestones));
        }
        Ok(())
    }

    /// Copy with a different bit depth and mask.
    pub fn with_bits(&self, k: usize, mask: BitMask) -> Self {
        Self {
            quantized: true,
            k,
            mask: Some(mask),
            ..self.clone()
        }
    }

    /// Seed of repeat `run`.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

/// Train and test splits, loaded once and shared by every run.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train: Dataset,
    pub test: Dataset,
}

impl TrainData {
    pub fn load(config: &TrainConfig) -> Result<Self> {
        let dir = config
            .data_dir
            .as_deref()
            .ok_or_else(|| Error::Config("data_dir is not set".into()))?;
        let (train, test) = match config.dataset {
            DatasetKind::Mnist => (
                data::load_mnist(dir, Split::Train)?,
                data::load_mnist(dir, Split::Test)?,
            ),
            DatasetKind::Cifar10 => (
                data::load_cifar10(dir, Split::Train)?,
                data::load_cifar10(dir, Split::Test)?,
            ),
        };
        Ok(Self {
            train: config.train_limit.map_or(train.clone(), |n| train.truncated(n)),
            test: config.test_limit.map_or(test.clone(), |n| test.truncated(n)),
        })
    }
}
