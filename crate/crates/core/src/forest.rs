//! Bagged CART ensembles.
//!
//! Splits minimise the summed squared error of the children. For 0/1 targets
//! a node's squared error equals half its size times its Gini impurity, so
//! the same search is the Gini criterion for classification and the variance
//! criterion for regression. Leaves hold the mean target, so a classification
//! forest averages per-tree class-1 frequencies.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    /// `ceil(sqrt(d))` candidate features per split.
    Sqrt,
    All,
    Fixed(usize),
}

impl FeaturesPerSplit {
    fn count(self, d: usize) -> usize {
        match self {
            FeaturesPerSplit::Sqrt => ((d as f64).sqrt().ceil() as usize).clamp(1, d),
            FeaturesPerSplit::All => d,
            FeaturesPerSplit::Fixed(m) => m.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            max_depth: 6,
            min_leaf: 2,
            features_per_split: FeaturesPerSplit::Sqrt,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidArgument("max depth must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidArgument("min leaf size must be >= 1".into()));
        }
        if self.features_per_split == FeaturesPerSplit::Fixed(0) {
            return Err(Error::InvalidArgument("features per split must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Grower<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
    cut: usize,
}

impl Grower<'_> {
    fn sse(&self, idx: &[usize]) -> (f64, f64) {
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n;
        (mean, idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum())
    }

    fn best_split(&self, idx: &mut [usize], features: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf;
        let mut best: Option<BestSplit> = None;
        for &f in features {
            idx.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
            let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            for cut in 1..n {
                let yi = self.y[idx[cut - 1]];
                s += yi;
                sq += yi * yi;
                let lo = self.rows[idx[cut - 1]][f];
                let hi = self.rows[idx[cut]][f];
                if cut < min_leaf || n - cut < min_leaf || lo == hi {
                    continue;
                }
                let (nl, nr) = (cut as f64, (n - cut) as f64);
                let sse = (sq - s * s / nl) + ((total_sq - sq) - (total - s).powi(2) / nr);
                if best.as_ref().is_none_or(|b| sse < b.sse - 1e-12) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: 0.5 * (lo + hi),
                        sse,
                        cut,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut rng::StreamRng) -> usize {
        let (mean, sse) = self.sse(idx);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf || sse <= 1e-12 {
            return at;
        }
        let d = self.rows[0].len();
        let mut pool: Vec<usize> = (0..d).collect();
        for i in 0..self.mtry {
            let j = rng.random_range(i..d);
            pool.swap(i, j);
        }
        let mut features = pool[..self.mtry].to_vec();
        features.sort_unstable();
        let Some(split) = self.best_split(idx, &features) else {
            return at;
        };
        if split.sse >= sse - 1e-12 {
            return at;
        }
        let f = split.feature;
        idx.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
        let (l, r) = idx.split_at_mut(split.cut);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature: f,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

/// Fits one tree on the rows `idx` (duplicates allowed).
pub fn fit_tree(
    rows: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    params: &ForestParams,
    rng: &mut rng::StreamRng,
) -> Tree {
    let d = rows[0].len();
    let mut grower = Grower {
        rows,
        y,
        params,
        mtry: params.features_per_split.count(d),
        nodes: Vec::new(),
    };
    let mut idx = idx.to_vec();
    grower.grow(&mut idx, 0, rng);
    Tree { nodes: grower.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

impl Forest {
    /// Mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged trees; tree `t` bootstraps and picks split features from stream
/// `(seed, t)`.
pub fn fit_forest(rows: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::TooFewRows { rows: 0, columns: 0 });
    }
    if rows.len() != y.len() {
        return Err(Error::Dimension(format!("{} rows, {} targets", rows.len(), y.len())));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("feature rows must share a non-zero width".into()));
    }
    let n = rows.len();
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut g = rng::stream(params.seed, t as u64);
            let sample: Vec<usize> = (0..n).map(|_| g.random_range(0..n)).collect();
            fit_tree(rows, y, &sample, params, &mut g)
        })
        .collect();
    Ok(Forest { trees, n_features: d })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(trees: usize, depth: usize) -> ForestParams {
        ForestParams {
            trees,
            max_depth: depth,
            min_leaf: 1,
            features_per_split: FeaturesPerSplit::All,
            seed: 3,
        }
    }

    #[test]
    fn stump_threshold_at_midpoint() {
        let rows: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0].iter().map(|&v| vec![v]).collect();
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut g = rng::stream(0, 0);
        let tree = fit_tree(&rows, &y, &[0, 1, 2, 3, 4, 5], &params(1, 1), &mut g);
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.predict(&[6.4]), 0.0);
        assert_eq!(tree.predict(&[6.6]), 1.0);
        assert_eq!(tree.nodes[0], Node::Split { feature: 0, threshold: 6.5, left: 1, right: 2 });
    }

    #[test]
    fn gini_matches_brute_force() {
        // best single split by weighted Gini, enumerated directly
        let xs = [0.3, 1.2, 1.9, 2.5, 3.1, 4.4, 5.0, 6.2];
        let ys = [0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let gini = |v: &[f64]| {
            let p = v.iter().sum::<f64>() / v.len() as f64;
            2.0 * p * (1.0 - p)
        };
        let mut best = (f64::INFINITY, 0.0);
        for cut in 1..xs.len() {
            let w = cut as f64 * gini(&ys[..cut]) + (xs.len() - cut) as f64 * gini(&ys[cut..]);
            if w < best.0 - 1e-12 {
                best = (w, 0.5 * (xs[cut - 1] + xs[cut]));
            }
        }
        let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        let mut g = rng::stream(0, 0);
        let tree = fit_tree(&rows, &ys, &(0..8).collect::<Vec<_>>(), &params(1, 1), &mut g);
        match tree.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, best.1),
            _ => panic!("no split"),
        }
    }

    #[test]
    fn respects_depth_and_min_leaf() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let y: Vec<f64> = (0..64).map(|i| ((i * 31) % 5) as f64).collect();
        let mut p = params(5, 3);
        p.min_leaf = 4;
        let f = fit_forest(&rows, &y, &p).unwrap();
        for t in &f.trees {
            assert!(t.depth() <= 3);
        }
    }

    #[test]
    fn deterministic_and_order_free() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| f64::from(r[0] > r[1])).collect();
        let a = fit_forest(&rows, &y, &params(20, 4)).unwrap();
        let b = fit_forest(&rows, &y, &params(20, 4)).unwrap();
        assert_eq!(a, b);
        let mut rev = a.clone();
        rev.trees.reverse();
        for r in &rows {
            assert!((a.predict(r) - rev.predict(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_params() {
        let rows = vec![vec![1.0]];
        assert!(fit_forest(&rows, &[1.0], &params(0, 2)).is_err());
        assert!(fit_forest(&rows, &[1.0], &params(1, 0)).is_err());
    }
}
