use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub observed: f64,
    /// Successful permuted statistics, ordered by permutation index.
    pub permuted: Vec<f64>,
    pub p_value: f64,
    pub seed: u64,
    /// Permutations requested.
    pub k: usize,
    /// Permutations whose statistic could not be evaluated.
    pub failures: usize,
}

impl PermutationResult {
    pub fn mean_permuted(&self) -> f64 {
        self.permuted.iter().sum::<f64>() / self.permuted.len() as f64
    }

    /// Smallest p-value this many permutations can report.
    pub fn resolution(&self) -> f64 {
        1.0 / (self.permuted.len() + 1) as f64
    }
}

/// `(1 + #{|permuted| ≥ |observed|}) / (K + 1)`.
pub fn smoothed_p_value(observed: f64, permuted: &[f64]) -> f64 {
    let hits = permuted.iter().filter(|s| s.abs() >= observed.abs()).count();
    (1 + hits) as f64 / (permuted.len() + 1) as f64
}

/// Two-sided permutation test over row orderings of an `n`-row dataset.
///
/// `statistic` receives a row permutation (the identity for the observed
/// value). Permutation `i` is drawn by Fisher–Yates from stream `(seed, i)`,
/// so the result is identical however the permutations are scheduled.
pub fn permutation_test<F>(n: usize, k: usize, seed: u64, statistic: F) -> Result<PermutationResult>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if k == 0 {
        return Err(Error::InvalidArgument("permutation count must be >= 1".into()));
    }
    let identity: Vec<usize> = (0..n).collect();
    let observed = statistic(&identity)?;
    let outcomes: Vec<Option<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let perm = rng::permutation(&mut rng::stream(seed, i as u64), n);
            statistic(&perm).ok().filter(|s| s.is_finite())
        })
        .collect();
    let permuted: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let failures = k - permuted.len();
    if permuted.is_empty() {
        return Err(Error::Estimation("every permutation failed".into()));
    }
    Ok(PermutationResult {
        observed,
        p_value: smoothed_p_value(observed, &permuted),
        permuted,
        seed,
        k,
        failures,
    })
}
