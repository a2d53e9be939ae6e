use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest per-sample size for which the exact null distribution is used.
pub const EXACT_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// First sample tends to be larger.
    Greater,
    /// First sample tends to be smaller.
    Less,
}

impl std::str::FromStr for Alternative {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" | "two_sided" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            _ => Err(Error::InvalidArgument(format!("unknown alternative {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// U for the first sample: pairs (a, b) with a > b, ties counted ½.
    pub u_statistic: f64,
    pub u_other: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub method: UMethod,
    pub n_a: usize,
    pub n_b: usize,
}

/// Midranks (1-based) of `values`; returns the ranks and the tie-group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Number of arrangements of `m` first-sample and `n` second-sample items
/// with each value of U (index = U), from the recurrence
/// `f(m, n, u) = f(m − 1, n, u − n) + f(m, n − 1, u)`.
pub fn exact_u_counts(m: usize, n: usize) -> Vec<u64> {
    // table[i][j] = distribution for sizes (i, j)
    let mut table: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            let mut dist = vec![0u64; i * j + 1];
            if i == 0 || j == 0 {
                dist[0] = 1;
            } else {
                // largest item belongs to the first sample: it beats all j others
                for (u, &c) in table[i - 1][j].iter().enumerate() {
                    dist[u + j] += c;
                }
                for (u, &c) in table[i][j - 1].iter().enumerate() {
                    dist[u] += c;
                }
            }
            table[i][j] = dist;
        }
    }
    std::mem::take(&mut table[m][n])
}

/// Combines one-sided tail probabilities into the requested p-value.
pub fn combine_tails(p_greater: f64, p_less: f64, alternative: Alternative) -> f64 {
    match alternative {
        Alternative::Greater => p_greater,
        Alternative::Less => p_less,
        Alternative::TwoSided => (2.0 * p_greater.min(p_less)).min(1.0),
    }
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("Mann–Whitney samples must be non-empty".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("Mann–Whitney samples must be finite".into()));
    }
    let (n_a, n_b) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let u_a = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let u_b = (n_a * n_b) as f64 - u_a;
    let has_ties = ties.iter().any(|&t| t > 1);

    let (p_value, method) = if n_a <= EXACT_MAX && n_b <= EXACT_MAX && !has_ties {
        let counts = exact_u_counts(n_a, n_b);
        let total: u64 = counts.iter().sum();
        let u = u_a as usize;
        let ge: u64 = counts[u..].iter().sum();
        let le: u64 = counts[..=u].iter().sum();
        let p = combine_tails(ge as f64 / total as f64, le as f64 / total as f64, alternative);
        (p, UMethod::Exact)
    } else {
        let n = (n_a + n_b) as f64;
        let mean = (n_a * n_b) as f64 / 2.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
        let var = (n_a * n_b) as f64 / 12.0 * ((n + 1.0) - tie_term);
        let p = if var <= 0.0 {
            1.0
        } else {
            let sd = var.sqrt();
            let p_greater = normal_sf((u_a - mean - 0.5) / sd);
            let p_less = normal_sf((mean - u_a - 0.5) / sd);
            combine_tails(p_greater, p_less, alternative).min(1.0)
        };
        (p, UMethod::NormalApproximation)
    };

    Ok(UTestResult {
        u_statistic: u_a,
        u_other: u_b,
        p_value,
        alternative,
        method,
        n_a,
        n_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_samples_exact() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::TwoSided).unwrap();
        assert_eq!(r.u_statistic, 0.0);
        assert_eq!(r.method, UMethod::Exact);
        assert!((r.p_value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_samples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], Alternative::TwoSided).unwrap();
        assert_eq!(r.u_statistic, 4.5);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.method, UMethod::NormalApproximation);
    }

    #[test]
    fn one_sided_greater() {
        let r = mann_whitney_u(&[3.0, 4.0], &[1.0, 2.0], Alternative::Greater).unwrap();
        assert_eq!(r.u_statistic, 4.0);
        assert!((r.p_value - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn all_tied_values() {
        let r = mann_whitney_u(&[2.0; 4], &[2.0; 5], Alternative::Greater).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(mann_whitney_u(&[], &[1.0], Alternative::TwoSided).is_err());
    }

    #[test]
    fn exact_counts_sum_to_binomial() {
        let c = exact_u_counts(8, 8);
        assert_eq!(c.iter().sum::<u64>(), 12870);
        assert_eq!(c.len(), 65);
        // symmetric null distribution
        for u in 0..c.len() {
            assert_eq!(c[u], c[c.len() - 1 - u]);
        }
    }

    #[test]
    fn large_sample_normal_approximation() {
        let a: Vec<f64> = (0..30).map(f64::from).collect();
        let b: Vec<f64> = (0..30).map(|i| f64::from(i) + 0.5).collect();
        let r = mann_whitney_u(&a, &b, Alternative::TwoSided).unwrap();
        assert_eq!(r.method, UMethod::NormalApproximation);
        assert!(r.p_value > 0.5);
    }

    proptest! {
        #[test]
        fn swap_symmetry_and_monotone_invariance(
            a in proptest::collection::vec(-50i32..50, 1..15),
            b in proptest::collection::vec(-50i32..50, 1..15),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney_u(&a, &b, Alternative::TwoSided).unwrap();
            let ba = mann_whitney_u(&b, &a, Alternative::TwoSided).unwrap();
            prop_assert_eq!(ab.u_statistic, (a.len() * b.len()) as f64 - ba.u_statistic);
            prop_assert_eq!(ab.u_statistic + ab.u_other, (a.len() * b.len()) as f64);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
            let f = |v: &f64| (v / 10.0).exp() * 3.0 + 1.0;
            let ta: Vec<f64> = a.iter().map(f).collect();
            let tb: Vec<f64> = b.iter().map(f).collect();
            let t = mann_whitney_u(&ta, &tb, Alternative::TwoSided).unwrap();
            prop_assert_eq!(t.u_statistic, ab.u_statistic);
            prop_assert!((t.p_value - ab.p_value).abs() < 1e-12);
        }
    }
}
