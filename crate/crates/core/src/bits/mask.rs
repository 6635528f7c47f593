use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Per-plane trainability flags.
///
/// Index 0 is the least significant magnitude bit and index `k-1` the sign.
/// The string form reads the other way round: `"1000"` trains only the sign
/// of a 4-bit weight, `"0111"` only its magnitude.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    trainable: Vec<bool>,
}

impl BitMask {
    pub fn from_planes(trainable: Vec<bool>) -> Result<Self> {
        if trainable.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "mask needs at least 2 bits, got {}",
                trainable.len()
            )));
        }
        Ok(Self { trainable })
    }

    /// Every plane trainable.
    pub fn all(k: usize) -> Self {
        Self {
            trainable: vec![true; k.max(2)],
        }
    }

    /// Every plane frozen.
    pub fn none(k: usize) -> Self {
        Self {
            trainable: vec![false; k.max(2)],
        }
    }

    /// The lowest `untrainable` magnitude bits frozen, everything above them
    /// (including the sign) trainable.
    pub fn with_frozen_low_bits(k: usize, untrainable: usize) -> Result<Self> {
        if untrainable > k.saturating_sub(1) {
            return Err(Error::InvalidInput(format!(
                "cannot freeze {untrainable} of the {} magnitude bits",
                k.saturating_sub(1)
            )));
        }
        Self::from_planes((0..k).map(|i| i >= untrainable).collect())
    }

    /// Every mask of length `k` with at least one trainable plane, in
    /// increasing numeric order of the string form.
    pub fn enumerate_nonzero(k: usize) -> Vec<Self> {
        assert!((2..=16).contains(&k), "enumerating masks beyond 16 bits");
        (1u32..(1u32 << k))
            .map(|code| Self {
                trainable: (0..k).map(|i| code >> i & 1 == 1).collect(),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.trainable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trainable.is_empty()
    }

    pub fn is_trainable(&self, plane: usize) -> bool {
        self.trainable[plane]
    }

    pub fn planes(&self) -> &[bool] {
        &self.trainable
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable.iter().filter(|&&t| t).count()
    }

    pub fn untrainable_count(&self) -> usize {
        self.len() - self.trainable_count()
    }

    /// Frozen plane indices in ascending order.
    pub fn untrainable_planes(&self) -> impl Iterator<Item = usize> + '_ {
        self.trainable
            .iter()
            .enumerate()
            .filter(|(_, &t)| !t)
            .map(|(i, _)| i)
    }

    pub fn ensure_trainable(&self) -> Result<()> {
        if self.trainable_count() == 0 {
            return Err(Error::InvalidInput(
                "mask has no trainable bit; use it only for frozen layers".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &t in self.trainable.iter().rev() {
            f.write_str(if t { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut planes = Vec::with_capacity(s.len());
        for ch in s.chars().rev() {
            match ch {
                '0' => planes.push(false),
                '1' => planes.push(true),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "mask {s:?} contains {other:?}; only '0' and '1' are allowed"
                    )))
                }
            }
        }
        Self::from_planes(planes)
    }
}

impl Serialize for BitMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitMask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
