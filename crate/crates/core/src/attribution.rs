//! Shapley feature attribution: the closed form for linear scores and a
//! permutation-sampling estimator against a background sample for any model.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::Classifier;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::rng;
use crate::stats::{LogisticFit, OlsFit};

pub const DEFAULT_BACKGROUND_CAP: usize = 200;

/// Anything mapping a feature row to a real prediction.
pub trait Predictor: Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for F {
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

impl Predictor for Classifier {
    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_proba(x)
    }
}

impl Predictor for Forest {
    fn predict(&self, x: &[f64]) -> f64 {
        Forest::predict(self, x)
    }
}

/// `intercept + Σ c_j x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScore {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearScore {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

impl From<&OlsFit> for LinearScore {
    fn from(fit: &OlsFit) -> Self {
        LinearScore {
            intercept: fit.intercept_value(),
            coefficients: fit.slopes().to_vec(),
        }
    }
}

/// Logistic models are attributed on the log-odds scale.
impl From<&LogisticFit> for LinearScore {
    fn from(fit: &LogisticFit) -> Self {
        LinearScore {
            intercept: fit.coefficients[0],
            coefficients: fit.coefficients[1..].to_vec(),
        }
    }
}

impl Predictor for LinearScore {
    fn predict(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub subject: String,
    pub features: Vec<String>,
    pub values: Vec<f64>,
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub prediction: f64,
    /// Monte-Carlo standard errors of `phi` (sampled method only).
    pub standard_errors: Option<Vec<f64>>,
    /// Standard error of `base_value + Σφ − prediction` (sampled method only).
    pub efficiency_se: Option<f64>,
    pub permutations: Option<usize>,
}

impl Attribution {
    pub fn efficiency_gap(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>() - self.prediction
    }
}

/// `φ_j = c_j (x_j − mean_j)`; base is the score at the background means.
pub fn shapley_linear(
    model: &LinearScore,
    subject: &str,
    features: &[String],
    x: &[f64],
    means: &[f64],
) -> Result<Attribution> {
    let d = model.coefficients.len();
    if x.len() != d || means.len() != d || features.len() != d {
        return Err(Error::Dimension(format!(
            "{d} coefficients, {} features, {} values, {} means",
            features.len(),
            x.len(),
            means.len()
        )));
    }
    let phi = model.coefficients.iter().zip(x).zip(means).map(|((c, v), m)| c * (v - m)).collect();
    Ok(Attribution {
        subject: subject.to_string(),
        features: features.to_vec(),
        values: x.to_vec(),
        phi,
        base_value: model.eval(means),
        prediction: model.eval(x),
        standard_errors: None,
        efficiency_se: None,
        permutations: None,
    })
}

/// Column means of a row-major table.
pub fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// At most `cap` rows drawn without replacement by a seeded shuffle; all
/// rows, in order, when there are no more than `cap`.
pub fn background_subsample(rows: &[Vec<f64>], cap: usize, seed: u64) -> Vec<Vec<f64>> {
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let mut idx = rng::permutation(&mut rng::stream(seed, 0), rows.len());
    idx.truncate(cap);
    idx.sort_unstable();
    idx.into_iter().map(|i| rows[i].clone()).collect()
}

/// Permutation-sampling Shapley estimate.
///
/// Sample `s` draws a feature ordering from stream `(seed, s)` and pairs it
/// with a background row (rows are visited round-robin in a seeded order);
/// starting from that row, features are switched to `x` one at a time in the
/// ordering and each switch's change in prediction is credited to the
/// feature. `base_value` is the mean prediction over the whole background.
pub fn shapley_sample<P: Predictor + ?Sized>(
    model: &P,
    subject: &str,
    features: &[String],
    x: &[f64],
    background: &[Vec<f64>],
    n_permutations: usize,
    seed: u64,
) -> Result<Attribution> {
    if background.is_empty() {
        return Err(Error::InvalidArgument("background sample is empty".into()));
    }
    if n_permutations == 0 {
        return Err(Error::InvalidArgument("need at least one permutation".into()));
    }
    let d = x.len();
    if features.len() != d || background.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("feature count mismatch between subject and background".into()));
    }
    let order = rng::permutation(&mut rng::stream(seed, u64::MAX), background.len());
    let samples: Vec<(Vec<f64>, f64)> = (0..n_permutations)
        .into_par_iter()
        .map(|s| {
            let perm = rng::permutation(&mut rng::stream(seed, s as u64), d);
            let mut v = background[order[s % background.len()]].clone();
            let start = model.predict(&v);
            let mut prev = start;
            let mut contrib = vec![0.0; d];
            for &j in &perm {
                v[j] = x[j];
                let next = model.predict(&v);
                contrib[j] = next - prev;
                prev = next;
            }
            (contrib, start)
        })
        .collect();

    let m = n_permutations as f64;
    let mut phi = vec![0.0; d];
    for (c, _) in &samples {
        for j in 0..d {
            phi[j] += c[j];
        }
    }
    phi.iter_mut().for_each(|p| *p /= m);
    let se = |dev: &dyn Fn(usize) -> f64| {
        if n_permutations < 2 {
            f64::NAN
        } else {
            ((0..n_permutations).map(|s| dev(s).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
        }
    };
    let standard_errors = (0..d).map(|j| se(&|s| samples[s].0[j] - phi[j])).collect();
    let start_mean = samples.iter().map(|(_, b)| b).sum::<f64>() / m;
    let efficiency_se = se(&|s| samples[s].1 - start_mean);
    let base_value = background.iter().map(|r| model.predict(r)).sum::<f64>() / background.len() as f64;

    Ok(Attribution {
        subject: subject.to_string(),
        features: features.to_vec(),
        values: x.to_vec(),
        phi,
        base_value,
        prediction: model.predict(x),
        standard_errors: Some(standard_errors),
        efficiency_se: Some(efficiency_se),
        permutations: Some(n_permutations),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionPoint {
    pub subject: String,
    pub feature: String,
    pub value: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSummary {
    /// Descending by mean |φ|; ties keep feature order.
    pub ranking: Vec<FeatureImportance>,
    pub points: Vec<AttributionPoint>,
}

pub fn summarize(attributions: &[Attribution]) -> Result<AttributionSummary> {
    let first = attributions
        .first()
        .ok_or_else(|| Error::InvalidArgument("no attributions to summarize".into()))?;
    if let Some(bad) = attributions.iter().find(|a| a.features != first.features) {
        return Err(Error::Schema(format!("subject {} has a different feature set", bad.subject)));
    }
    let n = attributions.len() as f64;
    let mut ranking: Vec<FeatureImportance> = first
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| FeatureImportance {
            feature: f.clone(),
            mean_abs_phi: attributions.iter().map(|a| a.phi[j].abs()).sum::<f64>() / n,
        })
        .collect();
    ranking.sort_by(|a, b| b.mean_abs_phi.total_cmp(&a.mean_abs_phi));
    let points = attributions
        .iter()
        .flat_map(|a| {
            a.features.iter().enumerate().map(move |(j, f)| AttributionPoint {
                subject: a.subject.clone(),
                feature: f.clone(),
                value: a.values[j],
                phi: a.phi[j],
            })
        })
        .collect();
    Ok(AttributionSummary { ranking, points })
}

impl AttributionSummary {
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        let pos: HashMap<&str, usize> =
            self.ranking.iter().enumerate().map(|(i, f)| (f.feature.as_str(), i)).collect();
        pos.get(feature).copied()
    }
}
