use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, DatasetError};
use crate::rng;

/// Stream key reserved for train/test splitting.
const SPLIT_STREAM: u64 = 0x5011;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Ascending train and test index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Hex SHA-256 of both index lists.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for i in &self.train {
            h.update((*i as u64).to_le_bytes());
        }
        h.update(u64::MAX.to_le_bytes());
        for i in &self.test {
            h.update((*i as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Random permutation from the seed; the first `round(fraction * n)`
/// indices form the training set.
pub fn split_indices(n: usize, cfg: &SplitConfig) -> Result<SplitIndices, DatasetError> {
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(cfg.train_fraction));
    }
    let n_train = (cfg.train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(DatasetError::EmptyPartition {
            n,
            fraction: cfg.train_fraction,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(cfg.seed, &[SPLIT_STREAM]));
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split(ds: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset), DatasetError> {
    let idx = split_indices(ds.len(), cfg)?;
    Ok((ds.subset(&idx.train), ds.subset(&idx.test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_follow_fraction() {
        let s = split_indices(10, &SplitConfig::default()).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_and_deterministic() {
        let a = split_indices(50, &SplitConfig { seed: 3, ..Default::default() }).unwrap();
        let b = split_indices(50, &SplitConfig { seed: 3, ..Default::default() }).unwrap();
        let c = split_indices(50, &SplitConfig { seed: 4, ..Default::default() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn degenerate_partitions_rejected() {
        assert!(matches!(
            split_indices(1, &SplitConfig::default()),
            Err(DatasetError::EmptyPartition { .. })
        ));
        assert!(matches!(
            split_indices(10, &SplitConfig { train_fraction: 1.0, seed: 0 }),
            Err(DatasetError::InvalidFraction(_))
        ));
        assert!(matches!(
            split_indices(10, &SplitConfig { train_fraction: 0.99, seed: 0 }),
            Err(DatasetError::EmptyPartition { .. })
        ));
        assert!(split_indices(2, &SplitConfig::default()).is_err());
        assert!(split_indices(3, &SplitConfig::default()).is_ok());
    }
}
