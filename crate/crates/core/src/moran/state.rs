use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Type counts of the population, stored densely from the current best type:
/// `counts[k]` is the number of individuals of type `best_type + k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopState {
    pub best_type: u64,
    pub counts: Vec<u64>,
}

impl PopState {
    /// `n` individuals, all of type 0.
    pub fn monomorphic(n: u64) -> Self {
        Self {
            best_type: 0,
            counts: vec![n],
        }
    }

    pub fn new(best_type: u64, counts: Vec<u64>) -> Result<Self> {
        if counts.first().copied().unwrap_or(0) == 0 {
            return domain("the best class must be nonempty");
        }
        Ok(Self { best_type, counts })
    }

    /// Rounds `n * weights[k]` down and puts the remainder on the best class.
    pub fn from_profile(n: u64, weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w >= 0.0)) {
            return domain("profile weights must be nonnegative and nonempty");
        }
        let mut counts: Vec<u64> = weights
            .iter()
            .map(|&w| (w * n as f64).floor() as u64)
            .collect();
        let placed: u64 = counts.iter().sum();
        if placed > n {
            return domain("profile weights sum to more than 1");
        }
        counts[0] += n - placed;
        while counts.len() > 1 && counts.last() == Some(&0) {
            counts.pop();
        }
        Ok(Self {
            best_type: 0,
            counts,
        })
    }

    pub fn size(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count of absolute type `kappa`.
    pub fn count_of(&self, kappa: u64) -> u64 {
        kappa
            .checked_sub(self.best_type)
            .and_then(|k| self.counts.get(k as usize).copied())
            .unwrap_or(0)
    }

    /// Sparse view keyed by absolute type.
    pub fn sparse(&self) -> BTreeMap<u64, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (self.best_type + k as u64, c))
            .collect()
    }

    /// Frequencies seen from the best type.
    pub fn profile(&self) -> Vec<f64> {
        let n = self.size() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn sum_of_squares(&self) -> u64 {
        self.counts.iter().map(|&c| c * c).sum()
    }
}
