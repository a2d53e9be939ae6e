//! Linear-Gaussian structural causal model simulator.
//!
//! ```text
//! C_c ~ N(mean_c, sd_c²)                 independent confounders
//! D   ~ Bernoulli(prevalence)            optional label root
//! T_j = a_j + α_jᵀC + s_j·D + η_j        η_j ~ N(0, noise_j²)
//! Y   = a_y + βᵀT + γᵀC + ε              ε ~ N(0, noise_y²)
//! ```
//!
//! `β_j` is the ground-truth effect the backdoor estimator targets. The label
//! root only feeds treatments, so it never opens a backdoor path between a
//! single treatment and the outcome as long as it shifts at most one
//! treatment.
//!
//! The optional gray zone plants `count` label-0 subjects that carry the
//! label's treatment shift while their outcome keeps the unshifted value: the
//! VOC signal has moved, glucose has not. They are the label-0 subjects whose
//! unshifted outcome lies nearest the label-0 median.
//!
//! Omitted-variable bias: regressing `Y` on a single treatment while leaving
//! out a confounder `c` with `α_jc ≠ 0` and `γ_c ≠ 0` shifts the slope by
//! `α_jc·γ_c·Var(C_c)/Var(T_j)` in the one-treatment, one-confounder model.
//! [`ScmConfig::population_regression`] gives the general population slope
//! for any regressor set.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::rng;

const DEMO_CONFIG: &str = include_str!("../assets/demo_scm.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfounderSpec {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpec {
    pub name: String,
    #[serde(default)]
    pub intercept: f64,
    /// Confounder → treatment coefficients, one per confounder.
    pub alpha: Vec<f64>,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub name: String,
    #[serde(default)]
    pub intercept: f64,
    /// Treatment → outcome coefficients (the true effects).
    pub beta: Vec<f64>,
    /// Confounder → outcome coefficients.
    pub gamma: Vec<f64>,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub name: String,
    pub prevalence: f64,
    /// Treatment shift for label-1 subjects, one per treatment.
    pub shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayZoneSpec {
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmConfig {
    pub confounders: Vec<ConfounderSpec>,
    pub treatments: Vec<TreatmentSpec>,
    pub outcome: OutcomeSpec,
    #[serde(default)]
    pub label: Option<LabelSpec>,
    #[serde(default)]
    pub gray_zone: Option<GrayZoneSpec>,
    pub n: usize,
    pub seed: u64,
}

/// Simulated data plus the ids planted in the gray zone.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: Dataset,
    pub gray_zone: Vec<String>,
}

/// The bundled demo model: planted effects over acetone, isopropanol,
/// isoprene and ethanol, ten lifestyle confounders, a diabetic label and a
/// planted gray zone.
pub fn demo_config() -> ScmConfig {
    ScmConfig::from_json(DEMO_CONFIG).expect("bundled demo config is valid")
}

pub fn demo_config_json() -> &'static str {
    DEMO_CONFIG
}

impl ScmConfig {
    pub fn from_json(text: &str) -> Result<ScmConfig> {
        let cfg: ScmConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScmConfig> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.confounders.len();
        let t = self.treatments.len();
        let bad = |msg: String| Err(Error::Config(msg));
        if t == 0 {
            return bad("at least one treatment required".into());
        }
        if self.n < 2 {
            return bad(format!("sample size {} too small", self.n));
        }
        let mut names: Vec<&str> = self.confounders.iter().map(|c| c.name.as_str()).collect();
        names.extend(self.treatments.iter().map(|t| t.name.as_str()));
        names.push(&self.outcome.name);
        if let Some(l) = &self.label {
            names.push(&l.name);
        }
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != names.len() || names.contains(&"id") {
            return bad("variable names must be unique and not \"id\"".into());
        }
        for c in &self.confounders {
            if !(c.sd > 0.0) || !c.mean.is_finite() {
                return bad(format!("confounder {:?} needs sd > 0", c.name));
            }
        }
        for tr in &self.treatments {
            if tr.alpha.len() != m {
                return bad(format!(
                    "treatment {:?} has {} alpha coefficients for {m} confounders",
                    tr.name,
                    tr.alpha.len()
                ));
            }
            if !(tr.noise_sd > 0.0) {
                return bad(format!("treatment {:?} needs noise_sd > 0", tr.name));
            }
        }
        if self.outcome.beta.len() != t {
            return bad(format!("beta has {} entries for {t} treatments", self.outcome.beta.len()));
        }
        if self.outcome.gamma.len() != m {
            return bad(format!("gamma has {} entries for {m} confounders", self.outcome.gamma.len()));
        }
        if !(self.outcome.noise_sd > 0.0) {
            return bad("outcome noise_sd must be > 0".into());
        }
        if let Some(l) = &self.label {
            if !(l.prevalence > 0.0 && l.prevalence < 1.0) {
                return bad("label prevalence must lie in (0, 1)".into());
            }
            if l.shift.len() != t {
                return bad(format!("label shift has {} entries for {t} treatments", l.shift.len()));
            }
        }
        if let Some(g) = &self.gray_zone {
            if self.label.is_none() {
                return bad("gray_zone requires a label".into());
            }
            if g.count >= self.n {
                return bad("gray_zone count must be below n".into());
            }
        }
        Ok(())
    }

    pub fn treatment_names(&self) -> Vec<String> {
        self.treatments.iter().map(|t| t.name.clone()).collect()
    }

    pub fn confounder_names(&self) -> Vec<String> {
        self.confounders.iter().map(|c| c.name.clone()).collect()
    }

    /// Structural coefficient of `treatment` on the outcome.
    pub fn true_ate(&self, treatment: &str) -> Result<f64> {
        self.treatments
            .iter()
            .position(|t| t.name == treatment)
            .map(|j| self.outcome.beta[j])
            .ok_or_else(|| Error::UnknownColumn(treatment.to_string()))
    }

    /// Effect of a simultaneous unit increase in every named treatment.
    pub fn true_joint_ate(&self, treatments: &[String]) -> Result<f64> {
        treatments.iter().map(|t| self.true_ate(t)).sum()
    }

    /// Variable order of [`Self::population_covariance`]: confounders,
    /// treatments, outcome.
    pub fn variable_names(&self) -> Vec<String> {
        let mut v = self.confounder_names();
        v.extend(self.treatment_names());
        v.push(self.outcome.name.clone());
        v
    }

    /// Exact covariance of (C, T, Y) with the label root marginalized.
    /// The planted gray zone is not part of the model.
    pub fn population_covariance(&self) -> DMatrix<f64> {
        let m = self.confounders.len();
        let t = self.treatments.len();
        // base variables u = (C, D, η, ε), mutually independent
        let nu = m + 1 + t + 1;
        let mut base_var = DVector::zeros(nu);
        for (c, spec) in self.confounders.iter().enumerate() {
            base_var[c] = spec.sd * spec.sd;
        }
        base_var[m] = self
            .label
            .as_ref()
            .map_or(0.0, |l| l.prevalence * (1.0 - l.prevalence));
        for (j, tr) in self.treatments.iter().enumerate() {
            base_var[m + 1 + j] = tr.noise_sd * tr.noise_sd;
        }
        base_var[nu - 1] = self.outcome.noise_sd.powi(2);

        let nv = m + t + 1;
        let mut b = DMatrix::zeros(nv, nu);
        for c in 0..m {
            b[(c, c)] = 1.0;
        }
        for (j, tr) in self.treatments.iter().enumerate() {
            for c in 0..m {
                b[(m + j, c)] = tr.alpha[c];
            }
            b[(m + j, m)] = self.label.as_ref().map_or(0.0, |l| l.shift[j]);
            b[(m + j, m + 1 + j)] = 1.0;
        }
        // Y row = βᵀ(T row) + γᵀ(C row) + ε
        let y = nv - 1;
        for k in 0..nu {
            let mut v: f64 = (0..t).map(|j| self.outcome.beta[j] * b[(m + j, k)]).sum();
            if k < m {
                v += self.outcome.gamma[k];
            }
            b[(y, k)] = v;
        }
        b[(y, nu - 1)] = 1.0;
        &b * DMatrix::from_diagonal(&base_var) * b.transpose()
    }

    /// Population least-squares slopes of `target` on `regressors`.
    pub fn population_regression(&self, target: &str, regressors: &[String]) -> Result<Vec<f64>> {
        let names = self.variable_names();
        let idx = |n: &str| {
            names
                .iter()
                .position(|v| v == n)
                .ok_or_else(|| Error::UnknownColumn(n.to_string()))
        };
        let ti = idx(target)?;
        let ri: Vec<usize> = regressors.iter().map(|r| idx(r)).collect::<Result<_>>()?;
        let cov = self.population_covariance();
        let srr = DMatrix::from_fn(ri.len(), ri.len(), |a, b| cov[(ri[a], ri[b])]);
        let sry = DVector::from_fn(ri.len(), |a, _| cov[(ri[a], ti)]);
        let sol = srr
            .lu()
            .solve(&sry)
            .ok_or_else(|| Error::Estimation("singular population covariance".into()))?;
        Ok(sol.iter().copied().collect())
    }

    pub fn simulate(&self) -> Result<Dataset> {
        Ok(self.simulate_detailed()?.dataset)
    }

    pub fn simulate_detailed(&self) -> Result<Simulation> {
        self.validate()?;
        let n = self.n;
        let m = self.confounders.len();
        let t = self.treatments.len();
        let mut g = rng::stream(self.seed, 0);
        let mut normal = move || -> f64 { g.sample(StandardNormal) };

        let mut conf = vec![vec![0.0; n]; m];
        let mut treat = vec![vec![0.0; n]; t];
        let mut outcome = vec![0.0; n];
        let mut label = vec![0u8; n];
        let mut label_rng = rng::stream(self.seed, 1);

        for i in 0..n {
            for (c, spec) in self.confounders.iter().enumerate() {
                conf[c][i] = spec.mean + spec.sd * normal();
            }
            if let Some(l) = &self.label {
                label[i] = u8::from(label_rng.random::<f64>() < l.prevalence);
            }
            for (j, tr) in self.treatments.iter().enumerate() {
                let mut v = tr.intercept + tr.noise_sd * normal();
                for c in 0..m {
                    v += tr.alpha[c] * conf[c][i];
                }
                if let Some(l) = &self.label {
                    v += l.shift[j] * f64::from(label[i]);
                }
                treat[j][i] = v;
            }
            let mut y = self.outcome.intercept + self.outcome.noise_sd * normal();
            for j in 0..t {
                y += self.outcome.beta[j] * treat[j][i];
            }
            for c in 0..m {
                y += self.outcome.gamma[c] * conf[c][i];
            }
            outcome[i] = y;
        }

        let width = n.to_string().len().max(4);
        let ids: Vec<String> = (0..n).map(|i| format!("S{:0width$}", i + 1)).collect();

        let mut planted = Vec::new();
        if let (Some(gz), Some(l)) = (&self.gray_zone, &self.label) {
            let negatives: Vec<usize> = (0..n).filter(|&i| label[i] == 0).collect();
            if negatives.len() < gz.count {
                return Err(Error::Config("too few label-0 subjects for the gray zone".into()));
            }
            let ys: Vec<f64> = negatives.iter().map(|&i| outcome[i]).collect();
            let med = crate::data::median(&ys);
            let mut by_distance = negatives.clone();
            by_distance.sort_by(|&a, &b| {
                (outcome[a] - med)
                    .abs()
                    .total_cmp(&(outcome[b] - med).abs())
                    .then(a.cmp(&b))
            });
            planted = by_distance[..gz.count].to_vec();
            planted.sort_unstable();
            for &i in &planted {
                for j in 0..t {
                    treat[j][i] += l.shift[j];
                }
            }
        }

        let mut names = self.confounder_names();
        let mut columns: Vec<Column> = conf.into_iter().map(Column::Continuous).collect();
        names.extend(self.treatment_names());
        columns.extend(treat.into_iter().map(Column::Continuous));
        names.push(self.outcome.name.clone());
        columns.push(Column::Continuous(outcome));
        if let Some(l) = &self.label {
            names.push(l.name.clone());
            columns.push(Column::Continuous(label.iter().map(|&v| f64::from(v)).collect()));
        }
        let dataset = Dataset::new("id", ids.clone(), names, columns)?;
        Ok(Simulation {
            dataset,
            gray_zone: planted.into_iter().map(|i| ids[i].clone()).collect(),
        })
    }
}
