//! Unsupervised stratification: full-covariance Gaussian mixtures fitted by
//! EM, BIC/AIC model selection, PCA projection and cluster validity scores.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Added to every covariance diagonal.
pub const COVARIANCE_FLOOR: f64 = 1e-6;
/// Allowed log-likelihood decrease, relative to `1 + |logL|`, before a run
/// is declared non-monotone.
pub const MONOTONE_SLACK: f64 = 1e-8;
/// Cap on k-means refinement passes before EM.
const LLOYD_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub seed: u64,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            seed: 0,
            restarts: 3,
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Row-major `d × d` per component.
    pub covariances: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub responsibilities: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub restart: usize,
    /// Log-likelihood at every E-step of the returned run.
    pub trace: Vec<f64>,
}

impl GmmFit {
    /// Most responsible component per row.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.responsibilities
            .iter()
            .map(|r| {
                let mut best = 0;
                for (j, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        parameter_count(self.k, self.means[0].len())
    }
}

/// `(k−1) + k·d + k·d(d+1)/2`.
pub fn parameter_count(k: usize, d: usize) -> usize {
    (k - 1) + k * d + k * d * (d + 1) / 2
}

/// Lower-triangular Cholesky factor of a row-major SPD matrix.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for p in 0..j {
                s -= l[i * d + p] * l[j * d + p];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

struct Component {
    log_weight: f64,
    mean: Vec<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

impl Component {
    fn new(weight: f64, mean: Vec<f64>, cov: &[f64]) -> Result<Component> {
        let d = mean.len();
        let chol = cholesky(cov, d).ok_or_else(|| Error::Estimation("covariance not positive definite".into()))?;
        let log_det: f64 = (0..d).map(|i| chol[i * d + i].ln()).sum::<f64>() * 2.0;
        Ok(Component {
            log_weight: weight.ln(),
            mean,
            chol,
            log_norm: -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
        })
    }

    fn log_density(&self, x: &[f64], z: &mut [f64]) -> f64 {
        let d = x.len();
        let mut q = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for p in 0..i {
                s -= self.chol[i * d + p] * z[p];
            }
            z[i] = s / self.chol[i * d + i];
            q += z[i] * z[i];
        }
        self.log_norm - 0.5 * q
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Weighted mean and floored covariance; `w` need not be normalised.
fn moments(x: &[Vec<f64>], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = x[0].len();
    let total: f64 = w.iter().sum();
    let mut mean = vec![0.0; d];
    for (row, &wi) in x.iter().zip(w) {
        for j in 0..d {
            mean[j] += wi * row[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut cov = vec![0.0; d * d];
    let mut dev = vec![0.0; d];
    for (row, &wi) in x.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            dev[j] = row[j] - mean[j];
        }
        for a in 0..d {
            let wa = wi * dev[a];
            for b in 0..=a {
                cov[a * d + b] += wa * dev[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            let v = cov[a * d + b] / total;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
        cov[a * d + a] += COVARIANCE_FLOOR;
    }
    (mean, cov)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn kmeans_pp(x: &[Vec<f64>], k: usize, g: &mut rng::StreamRng) -> Vec<usize> {
    let n = x.len();
    let mut centers = vec![g.random_range(0..n)];
    let mut dist: Vec<f64> = x.iter().map(|r| sq_dist(r, &x[centers[0]])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            (0..n).find(|i| !centers.contains(i)).unwrap_or(0)
        } else {
            let mut u = g.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &dv) in dist.iter().enumerate() {
                if u < dv {
                    pick = i;
                    break;
                }
                u -= dv;
            }
            pick
        };
        centers.push(next);
        for (i, r) in x.iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(r, &x[next]));
        }
    }
    centers
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Lloyd iterations from the given centers until assignments settle; an
/// emptied cluster keeps its previous center.
fn lloyd(x: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> Vec<usize> {
    let d = x[0].len();
    let mut labels: Vec<usize> = x.iter().map(|r| nearest(r, &centers)).collect();
    for _ in 0..LLOYD_MAX_ITER {
        let mut sums = vec![vec![0.0; d]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (row, &l) in x.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(row) {
                *s += v;
            }
        }
        for (j, c) in centers.iter_mut().enumerate() {
            if counts[j] > 0 {
                *c = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let next: Vec<usize> = x.iter().map(|r| nearest(r, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

struct Run {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<f64>>,
    resp: Vec<Vec<f64>>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn e_step(x: &[Vec<f64>], comps: &[Component], resp: &mut [Vec<f64>]) -> (f64, Vec<f64>) {
    let d = x[0].len();
    let mut z = vec![0.0; d];
    let mut ll = 0.0;
    let mut point_ll = Vec::with_capacity(x.len());
    for (row, r) in x.iter().zip(resp.iter_mut()) {
        for (j, c) in comps.iter().enumerate() {
            r[j] = c.log_weight + c.log_density(row, &mut z);
        }
        let lse = log_sum_exp(r);
        r.iter_mut().for_each(|v| *v = (*v - lse).exp());
        ll += lse;
        point_ll.push(lse);
    }
    (ll, point_ll)
}

fn run_em(x: &[Vec<f64>], k: usize, opts: &GmmOptions, restart: usize) -> Result<Run> {
    let n = x.len();
    let mut g = rng::stream(opts.seed, restart as u64);
    let centers = kmeans_pp(x, k, &mut g);
    let (_, global_cov) = moments(x, &vec![1.0; n]);

    // k-means refinement, then its hard assignment seeds the first M-step
    let labels = lloyd(x, centers.iter().map(|&c| x[c].clone()).collect());
    let mut resp = vec![vec![0.0; k]; n];
    for (r, &l) in resp.iter_mut().zip(&labels) {
        r[l] = 1.0;
    }

    let mut reseeded = false;
    let mut trace: Vec<f64> = Vec::new();
    let mut point_ll: Vec<f64> = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    let (mut weights, mut means, mut covs) = (Vec::new(), Vec::new(), Vec::new());
    loop {
        // M-step
        weights.clear();
        means.clear();
        covs.clear();
        for j in 0..k {
            let w: Vec<f64> = resp.iter().map(|r| r[j]).collect();
            let nk: f64 = w.iter().sum();
            if nk < 1e-10 * n as f64 {
                if reseeded {
                    return Err(Error::Estimation(format!("mixture component {j} lost all responsibility")));
                }
                reseeded = true;
                // restart the component at the worst-explained point
                let worst = (0..n)
                    .min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]))
                    .unwrap_or(0);
                weights.push(1.0 / n as f64);
                means.push(x[worst].clone());
                covs.push(global_cov.clone());
                continue;
            }
            let (mean, cov) = moments(x, &w);
            weights.push(nk / n as f64);
            means.push(mean);
            covs.push(cov);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let comps: Vec<Component> = (0..k)
            .map(|j| Component::new(weights[j], means[j].clone(), &covs[j]))
            .collect::<Result<_>>()?;

        // E-step
        let (ll, pl) = e_step(x, &comps, &mut resp);
        point_ll = pl;
        if !ll.is_finite() {
            return Err(Error::Estimation("log-likelihood is not finite".into()));
        }
        if let Some(&prev) = trace.last() {
            if ll < prev - MONOTONE_SLACK * (1.0 + prev.abs()) {
                return Err(Error::Estimation(format!(
                    "EM log-likelihood decreased from {prev} to {ll}"
                )));
            }
            if ll - prev < opts.tol {
                converged = true;
            }
        }
        trace.push(ll);
        iterations += 1;
        if converged || iterations >= opts.max_iter {
            break;
        }
    }
    Ok(Run {
        weights,
        means,
        covariances: covs,
        resp,
        trace,
        iterations,
        converged,
    })
}

/// Fits a `k`-component full-covariance mixture; restarts run independently
/// from streams `(seed, restart)` and the best final log-likelihood wins
/// (ties to the lower restart index).
pub fn fit_gmm(x: &[Vec<f64>], k: usize, opts: &GmmOptions) -> Result<GmmFit> {
    let n = x.len();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k >= n {
        return Err(Error::InvalidArgument(format!("k = {k} needs more than {n} rows")));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("rows must share a non-zero width".into()));
    }
    if !(opts.tol > 0.0) || opts.restarts == 0 || opts.max_iter == 0 {
        return Err(Error::InvalidArgument("tol, restarts and max_iter must be positive".into()));
    }
    let runs: Vec<Result<Run>> = (0..opts.restarts).into_par_iter().map(|r| run_em(x, k, opts, r)).collect();
    let mut best: Option<(usize, Run)> = None;
    let mut last_err = None;
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                let ll = *run.trace.last().unwrap();
                if best.as_ref().is_none_or(|(_, b)| ll > *b.trace.last().unwrap()) {
                    best = Some((r, run));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((restart, run)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::Estimation("no restart succeeded".into())));
    };
    Ok(GmmFit {
        k,
        weights: run.weights,
        means: run.means,
        covariances: run.covariances,
        log_likelihood: *run.trace.last().unwrap(),
        responsibilities: run.resp,
        iterations: run.iterations,
        converged: run.converged,
        seed: opts.seed,
        restart,
        trace: run.trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionCriterion {
    Bic,
    Aic,
}

impl std::str::FromStr for SelectionCriterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bic" => Ok(SelectionCriterion::Bic),
            "aic" => Ok(SelectionCriterion::Aic),
            _ => Err(Error::InvalidArgument(format!("unknown criterion {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub k: usize,
    pub bic: f64,
    pub aic: f64,
    pub log_likelihood: f64,
    pub parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    pub rows: Vec<SelectionRow>,
    pub chosen_k: usize,
    pub criterion: SelectionCriterion,
}

pub struct Selection {
    pub table: SelectionTable,
    /// Fit for the chosen `k`.
    pub fit: GmmFit,
}

/// Fits every `k` with the same options and picks the smallest criterion
/// value, ties toward smaller `k`.
pub fn select_k(x: &[Vec<f64>], k_range: &[usize], criterion: SelectionCriterion, opts: &GmmOptions) -> Result<Selection> {
    if k_range.is_empty() {
        return Err(Error::InvalidArgument("empty k range".into()));
    }
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let fits: Vec<GmmFit> = ks.par_iter().map(|&k| fit_gmm(x, k, opts)).collect::<Result<_>>()?;
    let n = x.len() as f64;
    let rows: Vec<SelectionRow> = fits
        .iter()
        .map(|f| {
            let p = f.parameter_count();
            SelectionRow {
                k: f.k,
                bic: -2.0 * f.log_likelihood + p as f64 * n.ln(),
                aic: -2.0 * f.log_likelihood + 2.0 * p as f64,
                log_likelihood: f.log_likelihood,
                parameters: p,
            }
        })
        .collect();
    let score = |r: &SelectionRow| match criterion {
        SelectionCriterion::Bic => r.bic,
        SelectionCriterion::Aic => r.aic,
    };
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if score(r) < score(&rows[best]) {
            best = i;
        }
    }
    Ok(Selection {
        table: SelectionTable {
            chosen_k: rows[best].k,
            rows,
            criterion,
        },
        fit: fits.into_iter().nth(best).unwrap(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    /// `n × dims` scores.
    pub projection: Vec<Vec<f64>>,
    pub explained_ratio: Vec<f64>,
    /// One unit-length loading vector per component.
    pub loadings: Vec<Vec<f64>>,
    pub center: Vec<f64>,
}

/// Principal components of the centred data via SVD; each component's
/// largest-magnitude loading is made positive.
pub fn pca_project(x: &[Vec<f64>], dims: usize) -> Result<Pca> {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    if dims == 0 || n < 2 || dims > (n - 1).min(d) {
        return Err(Error::InvalidArgument(format!(
            "PCA dims {dims} outside 1..={} for {n} × {d} data",
            n.saturating_sub(1).min(d)
        )));
    }
    let center: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let m = DMatrix::from_fn(n, d, |i, j| x[i][j] - center[j]);
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Estimation("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let mut loadings = Vec::with_capacity(dims);
    let mut explained_ratio = Vec::with_capacity(dims);
    for &c in order.iter().take(dims) {
        let mut v: Vec<f64> = v_t.row(c).iter().copied().collect();
        let mut lead = 0;
        for j in 1..d {
            if v[j].abs() > v[lead].abs() {
                lead = j;
            }
        }
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        loadings.push(v);
        let s = svd.singular_values[c];
        explained_ratio.push(if total > 0.0 { s * s / total } else { 0.0 });
    }
    let projection = (0..n)
        .map(|i| loadings.iter().map(|v| (0..d).map(|j| m[(i, j)] * v[j]).sum()).collect())
        .collect();
    Ok(Pca {
        projection,
        explained_ratio,
        loadings,
        center,
    })
}

/// Mean silhouette with Euclidean distance; singletons score 0 and
/// `a = b = 0` scores 0.
pub fn silhouette(x: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if x.len() != labels.len() {
        return Err(Error::Dimension(format!("{} rows, {} labels", x.len(), labels.len())));
    }
    let mut size: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *size.entry(l).or_default() += 1;
    }
    if size.len() < 2 {
        return Err(Error::InvalidArgument("silhouette needs at least two clusters".into()));
    }
    let slot: BTreeMap<usize, usize> = size.keys().enumerate().map(|(i, &l)| (l, i)).collect();
    let counts: Vec<f64> = size.values().map(|&c| c as f64).collect();
    let scores: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let own = slot[&labels[i]];
            if counts[own] == 1.0 {
                return 0.0;
            }
            let mut sums = vec![0.0; counts.len()];
            for (j, r) in x.iter().enumerate() {
                if j != i {
                    sums[slot[&labels[j]]] += sq_dist(&x[i], r).sqrt();
                }
            }
            let a = sums[own] / (counts[own] - 1.0);
            let b = (0..counts.len())
                .filter(|&c| c != own)
                .map(|c| sums[c] / counts[c])
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / x.len() as f64)
}

fn contingency(a: &[usize], b: &[usize]) -> Result<(BTreeMap<(usize, usize), f64>, BTreeMap<usize, f64>, BTreeMap<usize, f64>)> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("labelings of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("need at least two labelled items".into()));
    }
    let mut joint = BTreeMap::new();
    let mut ma = BTreeMap::new();
    let mut mb = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0.0) += 1.0;
        *ma.entry(x).or_insert(0.0) += 1.0;
        *mb.entry(y).or_insert(0.0) += 1.0;
    }
    Ok((joint, ma, mb))
}

/// Adjusted Rand index; 1 when the chance-corrected denominator vanishes.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let (joint, ma, mb) = contingency(a, b)?;
    let c2 = |v: f64| v * (v - 1.0) / 2.0;
    let index: f64 = joint.values().map(|&v| c2(v)).sum();
    let sa: f64 = ma.values().map(|&v| c2(v)).sum();
    let sb: f64 = mb.values().map(|&v| c2(v)).sum();
    let expected = sa * sb / c2(a.len() as f64);
    let max = 0.5 * (sa + sb);
    if max - expected == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Mutual information over the arithmetic mean of the entropies.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let (joint, ma, mb) = contingency(a, b)?;
    let n = a.len() as f64;
    let entropy = |m: &BTreeMap<usize, f64>| -m.values().map(|&c| (c / n) * (c / n).ln()).sum::<f64>();
    let (ha, hb) = (entropy(&ma), entropy(&mb));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| (c / n) * (c * n / (ma[&x] * mb[&y])).ln())
        .sum();
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedScore {
    pub f1: f64,
    /// Cluster id to predicted class.
    pub mapping: BTreeMap<usize, u8>,
}

fn f1_of(pred: &[u8], truth: &[u8]) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1.0,
            (1, _) => fp += 1.0,
            (_, 1) => fneg += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fneg)
    }
}

/// F1 for class 1 after mapping clusters to classes: the better of the two
/// assignments for at most two clusters, majority vote (ties to class 1)
/// otherwise.
pub fn align_and_score(clusters: &[usize], truth: &[u8]) -> Result<AlignedScore> {
    if clusters.len() != truth.len() || truth.is_empty() {
        return Err(Error::Dimension("cluster labels and true labels must align".into()));
    }
    if truth.iter().any(|&t| t > 1) {
        return Err(Error::InvalidArgument("true labels must be binary".into()));
    }
    let ids: Vec<usize> = {
        let mut v = clusters.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let score = |mapping: &BTreeMap<usize, u8>| {
        let pred: Vec<u8> = clusters.iter().map(|c| mapping[c]).collect();
        f1_of(&pred, truth)
    };
    if ids.len() <= 2 {
        let mut best: Option<AlignedScore> = None;
        for flip in [0u8, 1] {
            let mapping: BTreeMap<usize, u8> = ids.iter().enumerate().map(|(i, &c)| (c, (i as u8) ^ flip)).collect();
            let f1 = score(&mapping);
            if best.as_ref().is_none_or(|b| f1 > b.f1) {
                best = Some(AlignedScore { f1, mapping });
            }
        }
        return Ok(best.unwrap());
    }
    let mut votes: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&c, &t) in clusters.iter().zip(truth) {
        let e = votes.entry(c).or_default();
        if t == 1 {
            e.1 += 1;
        } else {
            e.0 += 1;
        }
    }
    let mapping: BTreeMap<usize, u8> = votes.iter().map(|(&c, &(n0, n1))| (c, u8::from(n1 >= n0))).collect();
    Ok(AlignedScore {
        f1: score(&mapping),
        mapping,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterValidity {
    pub silhouette: Option<f64>,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub aligned_f1: Option<f64>,
    pub mapping: Option<BTreeMap<usize, u8>>,
}

/// Silhouette when at least two clusters exist; external scores when labels
/// are given.
pub fn validity(x: &[Vec<f64>], clusters: &[usize], truth: Option<&[u8]>) -> Result<ClusterValidity> {
    let distinct = {
        let mut v = clusters.to_vec();
        v.sort_unstable();
        v.dedup();
        v.len()
    };
    let silhouette = if distinct >= 2 { Some(silhouette(x, clusters)?) } else { None };
    let (ari_v, nmi_v, aligned) = match truth {
        Some(t) => {
            let t_usize: Vec<usize> = t.iter().map(|&v| v as usize).collect();
            (
                Some(ari(clusters, &t_usize)?),
                Some(nmi(clusters, &t_usize)?),
                Some(align_and_score(clusters, t)?),
            )
        }
        None => (None, None, None),
    };
    Ok(ClusterValidity {
        silhouette,
        ari: ari_v,
        nmi: nmi_v,
        aligned_f1: aligned.as_ref().map(|a| a.f1),
        mapping: aligned.map(|a| a.mapping),
    })
}
