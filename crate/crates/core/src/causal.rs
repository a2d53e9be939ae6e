//! Causal effect estimation of treatments (breath VOCs) on an outcome
//! (blood glucose): per-treatment and joint backdoor-adjusted effects,
//! inverse-propensity weighting, reverse-direction models, placebo
//! refutation by permuting treatment rows, and confounder sensitivity.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{median, AnalysisView, RoleConfig};
use crate::error::{Error, Result};
use crate::stats::{logistic_fit, ols_fit, permutation_test};

/// Propensity clipping bounds for inverse-probability weighting.
pub const PROPENSITY_CLIP: (f64, f64) = (0.01, 0.99);
/// Refutation aborts when more than this fraction of permutations fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;
/// Below this many permutations a refutation carries a warning.
pub const RECOMMENDED_PERMUTATIONS: usize = 100;
/// Ridge penalty of the propensity model.
const PROPENSITY_RIDGE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    BackdoorRegression,
    Ipw,
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backdoor-regression" | "backdoor" | "regression" => Ok(Estimator::BackdoorRegression),
            "ipw" => Ok(Estimator::Ipw),
            _ => Err(Error::InvalidArgument(format!("unknown estimator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    /// The outcome becomes the single treatment and each original treatment
    /// becomes an outcome in turn.
    Reverse,
}

/// Treatments, outcome and adjustment set, always named in forward roles;
/// `direction` decides which way the effect is estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalQuery {
    pub treatments: Vec<String>,
    pub outcome: String,
    pub confounders: Vec<String>,
    pub estimator: Estimator,
    pub direction: Direction,
}

impl CausalQuery {
    pub fn forward(treatments: &[&str], outcome: &str, confounders: &[&str]) -> CausalQuery {
        CausalQuery {
            treatments: treatments.iter().map(|s| s.to_string()).collect(),
            outcome: outcome.to_string(),
            confounders: confounders.iter().map(|s| s.to_string()).collect(),
            estimator: Estimator::BackdoorRegression,
            direction: Direction::Forward,
        }
    }

    /// Single-treatment query for `treatment` under `roles`.
    pub fn from_roles(roles: &RoleConfig, treatments: &[String]) -> CausalQuery {
        CausalQuery {
            treatments: treatments.to_vec(),
            outcome: roles.outcome.clone(),
            confounders: roles.confounders.clone(),
            estimator: Estimator::BackdoorRegression,
            direction: Direction::Forward,
        }
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_confounders(mut self, confounders: Vec<String>) -> Self {
        self.confounders = confounders;
        self
    }

    pub fn reversed(mut self) -> Self {
        self.direction = Direction::Reverse;
        self
    }

    fn check(&self, view: &AnalysisView) -> Result<()> {
        if self.treatments.is_empty() {
            return Err(Error::InvalidArgument("query has no treatments".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in self
            .treatments
            .iter()
            .chain(std::iter::once(&self.outcome))
            .chain(&self.confounders)
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::Roles(format!("{name:?} appears in more than one query role")));
            }
        }
        for name in self.treatments.iter().chain(std::iter::once(&self.outcome)) {
            view.vector(name)?;
        }
        view.expand(&self.confounders)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEstimate {
    /// Single-treatment effect, or the sum of components for joint queries.
    pub ate: f64,
    /// One entry per treatment (forward) or per reversed outcome (reverse).
    pub components: Vec<f64>,
    /// Analytic OLS standard errors of the components (empty for IPW).
    pub standard_errors: Vec<f64>,
    pub estimator: Estimator,
    pub direction: Direction,
    /// Adjustment columns after categorical expansion.
    pub confounders: Vec<String>,
    /// Median cut used when IPW dichotomized a continuous treatment.
    pub dichotomized_at: Option<f64>,
}

fn permuted_column(values: &[f64], perm: Option<&[usize]>) -> Vec<f64> {
    match perm {
        Some(p) => p.iter().map(|&i| values[i]).collect(),
        None => values.to_vec(),
    }
}

/// OLS of `outcome` on `[intercept | regressors | confounders]`, returning the
/// regressor slopes and standard errors.
fn backdoor_fit(
    regressors: &[Vec<f64>],
    outcome: &[f64],
    confounders: &DMatrix<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = outcome.len();
    let r = regressors.len();
    let x = DMatrix::from_fn(n, r + confounders.ncols(), |i, j| {
        if j < r {
            regressors[j][i]
        } else {
            confounders[(i, j - r)]
        }
    });
    let fit = ols_fit(&x, outcome, true)?;
    Ok((fit.slopes()[..r].to_vec(), fit.standard_errors[1..=r].to_vec()))
}

fn ipw_effect(treatment: &[f64], outcome: &[f64], confounders: &DMatrix<f64>) -> Result<(f64, Option<f64>)> {
    let binary = treatment.iter().all(|&v| v == 0.0 || v == 1.0);
    let (t, cut): (Vec<u8>, Option<f64>) = if binary {
        (treatment.iter().map(|&v| v as u8).collect(), None)
    } else {
        let m = median(treatment);
        (treatment.iter().map(|&v| u8::from(v > m)).collect(), Some(m))
    };
    let propensity: Vec<f64> = if confounders.ncols() == 0 {
        let p = t.iter().map(|&v| f64::from(v)).sum::<f64>() / t.len() as f64;
        vec![p; t.len()]
    } else {
        let fit = logistic_fit(confounders, &t, PROPENSITY_RIDGE)?;
        (0..t.len())
            .map(|i| {
                let row: Vec<f64> = confounders.row(i).iter().copied().collect();
                fit.predict_proba(&row)
            })
            .collect()
    };
    let (lo, hi) = PROPENSITY_CLIP;
    if propensity.iter().all(|&e| e < lo || e > hi) {
        return Err(Error::Estimation("propensity saturated: every weight clipped".into()));
    }
    let (mut sw1, mut sy1, mut sw0, mut sy0) = (0.0, 0.0, 0.0, 0.0);
    for ((&ti, &e), &y) in t.iter().zip(&propensity).zip(outcome) {
        let e = e.clamp(lo, hi);
        if ti == 1 {
            sw1 += 1.0 / e;
            sy1 += y / e;
        } else {
            sw0 += 1.0 / (1.0 - e);
            sy0 += y / (1.0 - e);
        }
    }
    if sw1 == 0.0 || sw0 == 0.0 {
        return Err(Error::Estimation("treatment has a single arm".into()));
    }
    Ok((sy1 / sw1 - sy0 / sw0, cut))
}

/// Estimate under an optional row permutation of the query's treatment
/// column(s); `None` is the observed data.
fn compute(view: &AnalysisView, q: &CausalQuery, perm: Option<&[usize]>) -> Result<CausalEstimate> {
    let (conf, conf_names) = view.design(&q.confounders)?;
    match q.direction {
        Direction::Forward => match q.estimator {
            Estimator::BackdoorRegression => {
                let regressors: Vec<Vec<f64>> = q
                    .treatments
                    .iter()
                    .map(|t| Ok(permuted_column(view.vector(t)?, perm)))
                    .collect::<Result<_>>()?;
                let (components, standard_errors) = backdoor_fit(&regressors, view.vector(&q.outcome)?, &conf)?;
                Ok(CausalEstimate {
                    ate: components.iter().sum(),
                    components,
                    standard_errors,
                    estimator: q.estimator,
                    direction: q.direction,
                    confounders: conf_names,
                    dichotomized_at: None,
                })
            }
            Estimator::Ipw => {
                if q.treatments.len() != 1 {
                    return Err(Error::InvalidArgument("ipw supports a single treatment".into()));
                }
                let t = permuted_column(view.vector(&q.treatments[0])?, perm);
                let (ate, cut) = ipw_effect(&t, view.vector(&q.outcome)?, &conf)?;
                Ok(CausalEstimate {
                    ate,
                    components: vec![ate],
                    standard_errors: Vec::new(),
                    estimator: q.estimator,
                    direction: q.direction,
                    confounders: conf_names,
                    dichotomized_at: cut,
                })
            }
        },
        Direction::Reverse => {
            let cause = permuted_column(view.vector(&q.outcome)?, perm);
            let mut components = Vec::with_capacity(q.treatments.len());
            let mut standard_errors = Vec::new();
            let mut cut = None;
            for voc in &q.treatments {
                let target = view.vector(voc)?;
                match q.estimator {
                    Estimator::BackdoorRegression => {
                        let (c, se) = backdoor_fit(std::slice::from_ref(&cause), target, &conf)?;
                        components.push(c[0]);
                        standard_errors.push(se[0]);
                    }
                    Estimator::Ipw => {
                        let (ate, c) = ipw_effect(&cause, target, &conf)?;
                        components.push(ate);
                        cut = c;
                    }
                }
            }
            Ok(CausalEstimate {
                ate: components.iter().sum(),
                components,
                standard_errors,
                estimator: q.estimator,
                direction: q.direction,
                confounders: conf_names,
                dichotomized_at: cut,
            })
        }
    }
}

/// Average treatment effect. Dispatches to [`estimate_joint`] for several
/// treatments and [`estimate_reverse`] for reverse queries.
pub fn estimate_ate(view: &AnalysisView, q: &CausalQuery) -> Result<CausalEstimate> {
    q.check(view)?;
    compute(view, q, None)
}

/// One regression with every treatment; the combined effect is the sum of
/// treatment coefficients (a simultaneous unit increase in each).
pub fn estimate_joint(view: &AnalysisView, q: &CausalQuery) -> Result<CausalEstimate> {
    if q.treatments.len() < 2 {
        return Err(Error::InvalidArgument("joint query needs >= 2 treatments".into()));
    }
    if q.direction != Direction::Forward {
        return Err(Error::InvalidArgument("joint query must be forward".into()));
    }
    estimate_ate(view, q)
}

/// Fits `V ~ [1 | outcome | confounders]` for every original treatment `V`;
/// components are the outcome coefficients, `ate` their sum.
pub fn estimate_reverse(view: &AnalysisView, q: &CausalQuery) -> Result<CausalEstimate> {
    let q = CausalQuery {
        direction: Direction::Reverse,
        ..q.clone()
    };
    estimate_ate(view, &q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefutationResult {
    pub original_ate: f64,
    pub mean_placebo_effect: f64,
    pub max_abs_placebo_effect: f64,
    pub sd_placebo_effect: f64,
    /// Smoothed two-sided p-value `(1 + hits)/(K + 1)` over successful permutations.
    pub p_value: f64,
    pub k: usize,
    pub seed: u64,
    pub failures: usize,
    pub warnings: Vec<String>,
}

/// Placebo refutation: the query's treatment column(s) are jointly
/// row-permuted `k` times with confounders and outcome fixed, and the effect
/// re-estimated each time.
pub fn refute_placebo(view: &AnalysisView, q: &CausalQuery, k: usize, seed: u64) -> Result<RefutationResult> {
    q.check(view)?;
    let mut warnings = Vec::new();
    if k < RECOMMENDED_PERMUTATIONS {
        warnings.push(format!(
            "only {k} permutations; p-values cannot fall below {:.4}",
            1.0 / (k + 1) as f64
        ));
    }
    let result = permutation_test(view.n_rows(), k, seed, |perm| {
        let identity = perm.iter().enumerate().all(|(i, &p)| i == p);
        let perm = if identity { None } else { Some(perm) };
        compute(view, q, perm).map(|e| e.ate)
    })?;
    if result.failures as f64 > MAX_FAILURE_FRACTION * k as f64 {
        return Err(Error::Estimation(format!(
            "refutation aborted: {} of {k} permutations failed",
            result.failures
        )));
    }
    if result.failures > 0 {
        warnings.push(format!("{} permutations failed and were skipped", result.failures));
    }
    let mean = result.mean_permuted();
    let m = result.permuted.len() as f64;
    let sd = (result.permuted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
    Ok(RefutationResult {
        original_ate: result.observed,
        mean_placebo_effect: mean,
        max_abs_placebo_effect: result.permuted.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        sd_placebo_effect: sd,
        p_value: result.p_value,
        k,
        seed,
        failures: result.failures,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    pub confounders: Vec<String>,
    pub ate: f64,
    pub abs_change: f64,
    /// `None` when the baseline effect is exactly zero.
    pub percent_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub baseline_confounders: Vec<String>,
    pub baseline_ate: f64,
    pub entries: Vec<SensitivityEntry>,
    pub max_percent_change: Option<f64>,
    pub max_abs_change: f64,
}

/// Re-estimates the query under each confounder subset; the baseline is the
/// query's own (full) confounder set.
pub fn sensitivity(view: &AnalysisView, q: &CausalQuery, subsets: &[Vec<String>]) -> Result<SensitivityReport> {
    if subsets.is_empty() {
        return Err(Error::InvalidArgument("sensitivity needs at least one confounder subset".into()));
    }
    let baseline = estimate_ate(view, q)?.ate;
    let entries: Vec<SensitivityEntry> = subsets
        .par_iter()
        .map(|subset| {
            let ate = estimate_ate(view, &q.clone().with_confounders(subset.clone()))?.ate;
            let abs_change = (ate - baseline).abs();
            Ok(SensitivityEntry {
                confounders: subset.clone(),
                ate,
                abs_change,
                percent_change: (baseline != 0.0).then(|| 100.0 * abs_change / baseline.abs()),
            })
        })
        .collect::<Result<_>>()?;
    let max_percent_change = if baseline != 0.0 {
        entries.iter().filter_map(|e| e.percent_change).reduce(f64::max)
    } else {
        None
    };
    let max_abs_change = entries.iter().map(|e| e.abs_change).fold(0.0, f64::max);
    Ok(SensitivityReport {
        baseline_confounders: q.confounders.clone(),
        baseline_ate: baseline,
        entries,
        max_percent_change,
        max_abs_change,
    })
}

/// Leave-one-out subsets of a confounder list.
pub fn drop_one_subsets(confounders: &[String]) -> Vec<Vec<String>> {
    (0..confounders.len())
        .map(|skip| {
            confounders
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, c)| c.clone())
                .collect()
        })
        .collect()
}

/// One query's row in a causal report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalRecord {
    pub treatments: Vec<String>,
    pub outcome: String,
    pub direction: Direction,
    pub estimator: Estimator,
    pub ate: Option<f64>,
    pub components: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub refute_mean: Option<f64>,
    pub p_value: Option<f64>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub confounders: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dichotomized_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CausalRecord {
    pub fn from_estimate(q: &CausalQuery, est: &CausalEstimate) -> CausalRecord {
        CausalRecord {
            treatments: q.treatments.clone(),
            outcome: q.outcome.clone(),
            direction: q.direction,
            estimator: q.estimator,
            ate: Some(est.ate),
            components: est.components.clone(),
            standard_errors: est.standard_errors.clone(),
            refute_mean: None,
            p_value: None,
            k: None,
            seed: None,
            confounders: est.confounders.clone(),
            dichotomized_at: est.dichotomized_at,
            sensitivity: None,
            warnings: Vec::new(),
            error: None,
        }
    }

    pub fn failed(q: &CausalQuery, err: &Error) -> CausalRecord {
        CausalRecord {
            treatments: q.treatments.clone(),
            outcome: q.outcome.clone(),
            direction: q.direction,
            estimator: q.estimator,
            ate: None,
            components: Vec::new(),
            standard_errors: Vec::new(),
            refute_mean: None,
            p_value: None,
            k: None,
            seed: None,
            confounders: q.confounders.clone(),
            dichotomized_at: None,
            sensitivity: None,
            warnings: Vec::new(),
            error: Some(err.to_string()),
        }
    }

    pub fn with_refutation(mut self, r: &RefutationResult) -> CausalRecord {
        self.refute_mean = Some(r.mean_placebo_effect);
        self.p_value = Some(r.p_value);
        self.k = Some(r.k);
        self.seed = Some(r.seed);
        self.warnings.extend(r.warnings.iter().cloned());
        self
    }
}

/// Machine-readable effect table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalReport {
    pub records: Vec<CausalRecord>,
    pub combined_effect_convention: String,
    pub p_value_convention: String,
    pub standardized: bool,
}

impl CausalReport {
    pub fn new(records: Vec<CausalRecord>, standardized: bool) -> CausalReport {
        CausalReport {
            records,
            combined_effect_convention:
                "joint rows report the sum of treatment coefficients from one regression \
                 (simultaneous unit increase in every treatment)"
                    .into(),
            p_value_convention: "two-sided on |effect|, smoothed (1 + hits)/(K + 1); never exactly 0".into(),
            standardized,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<CausalReport> {
        Ok(serde_json::from_str(text)?)
    }

    /// Forward single-treatment effect for `treatment`, if reported.
    pub fn forward_effect(&self, treatment: &str) -> Option<f64> {
        self.records
            .iter()
            .find(|r| {
                r.direction == Direction::Forward
                    && r.treatments.len() == 1
                    && r.treatments[0] == treatment
            })
            .and_then(|r| r.ate)
    }
}
