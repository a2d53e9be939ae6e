use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_NEWTON_STEPS: usize = 100;
pub const COEF_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 40;

/// Ridge-penalized logistic regression fitted by Newton–Raphson (IRLS) with
/// step halving. The intercept is not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized log-likelihood at the start and after each accepted step.
    pub objective_trace: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticFit {
    pub fn linear_score(&self, x: &[f64]) -> f64 {
        self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    /// Probability clamped into the open unit interval.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_score(x)).clamp(f64::EPSILON, 1.0 - f64::EPSILON)
    }
}

/// Log-likelihood minus `(λ/2)·‖β₁..‖²` for intercept-first `beta`.
pub fn penalized_log_likelihood(x: &DMatrix<f64>, y: &[u8], beta: &[f64], lambda: f64) -> f64 {
    let mut ll = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let z = beta[0] + (0..x.ncols()).map(|j| beta[j + 1] * x[(i, j)]).sum::<f64>();
        ll += f64::from(yi) * z - softplus(z);
    }
    ll - 0.5 * lambda * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

pub fn logistic_fit(x: &DMatrix<f64>, y: &[u8], lambda: f64) -> Result<LogisticFit> {
    let (n, d) = x.shape();
    if n != y.len() {
        return Err(Error::Dimension(format!("{n} design rows, {} labels", y.len())));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge penalty must be >= 0, got {lambda}")));
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass(y[0]));
    }

    let design = x.clone().insert_column(0, 1.0);
    let p = d + 1;
    let yv = DVector::from_iterator(n, y.iter().map(|&v| f64::from(v)));
    let mut beta = DVector::zeros(p);
    let mut objective = penalized_log_likelihood(x, y, beta.as_slice(), lambda);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_NEWTON_STEPS {
        iterations += 1;
        let eta = &design * &beta;
        let mu = eta.map(sigmoid);
        let w = mu.map(|m| m * (1.0 - m));
        let mut grad = design.transpose() * (&yv - &mu);
        let mut hess = DMatrix::zeros(p, p);
        for i in 0..n {
            let row = design.row(i);
            hess.syger(w[i], &row.transpose(), &row.transpose(), 1.0);
        }
        for j in 1..p {
            grad[j] -= lambda * beta[j];
            hess[(j, j)] += lambda;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => match hess.lu().solve(&grad) {
                Some(s) => s,
                None => break,
            },
        };
        if !step.iter().all(|s| s.is_finite()) {
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &beta + &step * t;
            let value = penalized_log_likelihood(x, y, candidate.as_slice(), lambda);
            if value >= objective {
                accepted = Some((candidate, value));
                break;
            }
            t *= 0.5;
        }
        let Some((candidate, value)) = accepted else {
            // no ascent left at machine precision
            converged = step.amax() < COEF_TOL;
            break;
        };
        let change = (&candidate - &beta).amax();
        beta = candidate;
        objective = value;
        trace.push(objective);
        if change < COEF_TOL {
            converged = true;
            break;
        }
    }

    Ok(LogisticFit {
        coefficients: beta.iter().copied().collect(),
        lambda,
        converged,
        iterations,
        objective_trace: trace,
    })
}
