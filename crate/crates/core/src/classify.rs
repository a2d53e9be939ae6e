//! Diabetes risk classification: logistic and forest models, stratified
//! cross-validation, AUC and thresholded metrics, the risk continuum and the
//! gray zone of high-risk non-diabetics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::AnalysisView;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest, ForestParams};
use crate::rng;
use crate::stats::{logistic_fit, midranks, LogisticFit};

pub const DECISION_THRESHOLD: f64 = 0.5;
pub const DEFAULT_GRAY_THRESHOLD: f64 = 0.5;
pub const DEFAULT_FALLBACK_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic { lambda: f64 },
    Forest(ForestParams),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Logistic { lambda } if !(*lambda >= 0.0) => {
                Err(Error::InvalidArgument(format!("ridge penalty must be >= 0, got {lambda}")))
            }
            ModelSpec::Logistic { .. } => Ok(()),
            ModelSpec::Forest(p) => p.validate(),
        }
    }

    fn reseeded(&self, tag: u64) -> ModelSpec {
        match self {
            ModelSpec::Forest(p) => ModelSpec::Forest(ForestParams {
                seed: rng::child_seed(p.seed, tag),
                ..p.clone()
            }),
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Logistic(LogisticFit),
    Forest(Forest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    /// Expanded feature names in model column order.
    pub features: Vec<String>,
    pub model: Model,
}

impl Classifier {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Logistic(fit) => fit.predict_proba(x),
            Model::Forest(forest) => forest.predict(x),
        }
    }
}

fn fit_rows(rows: &[Vec<f64>], y: &[u8], features: Vec<String>, spec: &ModelSpec) -> Result<Classifier> {
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass(y.first().copied().unwrap_or(0)));
    }
    let model = match spec {
        ModelSpec::Logistic { lambda } => {
            let x = nalgebra::DMatrix::from_fn(rows.len(), features.len(), |i, j| rows[i][j]);
            Model::Logistic(logistic_fit(&x, y, *lambda)?)
        }
        ModelSpec::Forest(p) => {
            let target: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
            Model::Forest(fit_forest(rows, &target, p)?)
        }
    };
    Ok(Classifier { features, model })
}

fn prepare(view: &AnalysisView, features: &[String]) -> Result<(Vec<Vec<f64>>, Vec<String>, Vec<u8>)> {
    view.roles().check_leakage(features)?;
    let labels = view
        .labels()
        .ok_or_else(|| Error::Roles("classification needs a label column".into()))?
        .to_vec();
    let (rows, names) = view.rows(features)?;
    for name in &names {
        view.roles().check_leakage(std::slice::from_ref(name))?;
    }
    Ok((rows, names, labels))
}

/// Fits `spec` on all rows of `view` using dataset columns `features`.
/// Features naming the outcome, the label or a blood marker are rejected.
pub fn train(view: &AnalysisView, features: &[String], spec: &ModelSpec) -> Result<Classifier> {
    spec.validate()?;
    let (rows, names, labels) = prepare(view, features)?;
    fit_rows(&rows, &labels, names, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Area under the ROC curve from midranks: `(R₊ − n₊(n₊+1)/2) / (n₊·n₋)`.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::Dimension(format!("{} labels, {} scores", labels.len(), scores.len())));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(labels.first().copied().unwrap_or(0)));
    }
    let (ranks, _) = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Thresholded metrics; precision is 0 when nothing is predicted positive.
pub fn binary_metrics(labels: &[u8], proba: &[f64], threshold: f64) -> Result<Metrics> {
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&l, &p) in labels.iter().zip(proba) {
        match (l == 1, p >= threshold) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fneg += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        auc: auc(labels, proba)?,
        precision,
        recall,
        f1,
        accuracy: ratio(tp + tn, labels.len()),
    })
}

/// Fold index per subject: each class is shuffled separately and dealt
/// round-robin, negatives continuing where positives stopped.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    let minority = pos.len().min(neg.len());
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if folds > minority {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds exceed the minority class count {minority}"
        )));
    }
    let mut assignment = vec![0; labels.len()];
    let mut slot = 0;
    for (stream, class) in [(0u64, &pos), (1, &neg)] {
        let order = rng::permutation(&mut rng::stream(seed, stream), class.len());
        for k in order {
            assignment[class[k]] = slot % folds;
            slot += 1;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvMetrics {
    pub per_fold: Vec<Metrics>,
    pub mean: Metrics,
    /// Metrics of the pooled out-of-fold predictions.
    pub pooled: Metrics,
    pub fold_of: Vec<usize>,
    pub oof_probability: Vec<f64>,
    pub seed: u64,
}

/// Stratified k-fold cross-validation with pooled out-of-fold predictions.
pub fn cross_validate(
    view: &AnalysisView,
    features: &[String],
    spec: &ModelSpec,
    folds: usize,
    seed: u64,
) -> Result<CvMetrics> {
    spec.validate()?;
    let (rows, names, labels) = prepare(view, features)?;
    let fold_of = stratified_folds(&labels, folds, seed)?;
    let fold_results: Vec<(Vec<usize>, Vec<f64>)> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| fold_of[i] != f);
            let train_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
            let train_y: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
            let model = fit_rows(&train_rows, &train_y, names.clone(), &spec.reseeded(f as u64))?;
            let proba = test_idx.iter().map(|&i| model.predict_proba(&rows[i])).collect();
            Ok((test_idx, proba))
        })
        .collect::<Result<_>>()?;

    let mut oof = vec![0.0; rows.len()];
    let mut per_fold = Vec::with_capacity(folds);
    for (idx, proba) in &fold_results {
        for (&i, &p) in idx.iter().zip(proba) {
            oof[i] = p;
        }
        let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        per_fold.push(binary_metrics(&y, proba, DECISION_THRESHOLD)?);
    }
    let avg = |f: fn(&Metrics) -> f64| per_fold.iter().map(f).sum::<f64>() / folds as f64;
    let mean = Metrics {
        auc: avg(|m| m.auc),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
        accuracy: avg(|m| m.accuracy),
    };
    Ok(CvMetrics {
        pooled: binary_metrics(&labels, &oof, DECISION_THRESHOLD)?,
        per_fold,
        mean,
        fold_of,
        oof_probability: oof,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilitySource {
    OutOfFold,
    /// Scored by a model that saw these subjects; optimistic.
    InSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSubject {
    pub id: String,
    pub probability: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRanking {
    pub entries: Vec<RankedSubject>,
    pub source: ProbabilitySource,
}

/// Descending by probability, ties by id.
pub fn risk_rank(ids: &[String], probability: &[f64], labels: &[u8], source: ProbabilitySource) -> Result<RiskRanking> {
    if ids.len() != probability.len() || ids.len() != labels.len() {
        return Err(Error::Dimension("ids, probabilities and labels differ in length".into()));
    }
    let mut entries: Vec<RankedSubject> = ids
        .iter()
        .zip(probability)
        .zip(labels)
        .map(|((id, &p), &l)| RankedSubject {
            id: id.clone(),
            probability: p,
            label: l,
        })
        .collect();
    entries.sort_by(|a, b| b.probability.total_cmp(&a.probability).then_with(|| a.id.cmp(&b.id)));
    Ok(RiskRanking { entries, source })
}

/// In-sample ranking from a fitted classifier.
pub fn risk_rank_model(model: &Classifier, view: &AnalysisView) -> Result<RiskRanking> {
    let labels = view
        .labels()
        .ok_or_else(|| Error::Roles("ranking needs a label column".into()))?;
    let cols: Vec<&[f64]> = model.features.iter().map(|f| view.vector(f)).collect::<Result<_>>()?;
    let proba: Vec<f64> = (0..view.n_rows())
        .map(|i| model.predict_proba(&cols.iter().map(|c| c[i]).collect::<Vec<_>>()))
        .collect();
    risk_rank(view.ids(), &proba, labels, ProbabilitySource::InSample)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayZone {
    /// Flagged ids in ranking order.
    pub ids: Vec<String>,
    pub threshold: f64,
    pub used_fallback: bool,
}

/// Non-diabetics with probability ≥ `threshold`; if none qualify and
/// `fallback_top_k` is set, the `k` highest-ranked non-diabetics.
pub fn gray_zone(ranking: &RiskRanking, threshold: f64, fallback_top_k: Option<usize>) -> Result<GrayZone> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("gray-zone threshold {threshold} outside (0,1)")));
    }
    let negatives = ranking.entries.iter().filter(|e| e.label == 0);
    let ids: Vec<String> = negatives
        .clone()
        .filter(|e| e.probability >= threshold)
        .map(|e| e.id.clone())
        .collect();
    if ids.is_empty() {
        if let Some(k) = fallback_top_k {
            return Ok(GrayZone {
                ids: negatives.take(k).map(|e| e.id.clone()).collect(),
                threshold,
                used_fallback: true,
            });
        }
    }
    Ok(GrayZone {
        ids,
        threshold,
        used_fallback: false,
    })
}
