use super::{DatasetError, GestureSample};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let r = [self.train, self.validation, self.test];
        let ok = r.iter().all(|v| v.is_finite() && *v >= 0.0)
            && (r.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(DatasetError::BadRatios(r))
        }
    }
}

/// Disjoint index sets into the sample list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub holdout_user: Option<u32>,
    pub seed: u64,
}

impl DatasetSplits {
    pub fn total(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    /// Checks that the three sets partition `0..n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = BTreeSet::new();
        for &i in self.train.iter().chain(&self.validation).chain(&self.test) {
            if i >= n || !seen.insert(i) {
                return false;
            }
        }
        seen.len() == n
    }
}

/// Seeded shuffle split. Samples of `holdout_user` go to the test set only;
/// the rest are divided by `ratios`.
pub fn split_dataset(
    samples: &[GestureSample],
    ratios: SplitRatios,
    holdout_user: Option<u32>,
    seed: u64,
) -> Result<DatasetSplits, DatasetError> {
    ratios.validate()?;
    let (mut held, mut pool): (Vec<usize>, Vec<usize>) =
        (0..samples.len()).partition(|&i| Some(samples[i].user_id) == holdout_user);
    if let Some(user) = holdout_user {
        if held.is_empty() {
            return Err(DatasetError::UnknownHoldout(user));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    held.shuffle(&mut rng);

    let n = pool.len();
    let n_train = ((ratios.train * n as f64).round() as usize).min(n);
    let n_val = ((ratios.validation * n as f64).round() as usize).min(n - n_train);
    let validation = pool[n_train..n_train + n_val].to_vec();
    let mut test = pool[n_train + n_val..].to_vec();
    pool.truncate(n_train);
    test.extend(held);

    let splits = DatasetSplits {
        train: pool,
        validation,
        test,
        holdout_user,
        seed,
    };
    debug_assert!(splits.is_partition_of(samples.len()));
    Ok(splits)
}
