use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on `|R_jj| / ‖x_j‖` below which column `j` is treated
/// as a linear combination of the columns before it.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares fit. Coefficients are intercept-first when the fit
/// was made with an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_variance: f64,
    pub standard_errors: Vec<f64>,
    pub intercept: bool,
}

impl OlsFit {
    /// Coefficients excluding the intercept.
    pub fn slopes(&self) -> &[f64] {
        if self.intercept {
            &self.coefficients[1..]
        } else {
            &self.coefficients
        }
    }

    pub fn intercept_value(&self) -> f64 {
        if self.intercept {
            self.coefficients[0]
        } else {
            0.0
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept_value() + self.slopes().iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Least squares via Householder QR of the design (intercept column
/// prepended when `intercept` is set).
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64], intercept: bool) -> Result<OlsFit> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::Dimension(format!("{n} design rows, {} outcomes", y.len())));
    }
    let design = if intercept {
        x.clone().insert_column(0, 1.0)
    } else {
        x.clone()
    };
    let p = design.ncols();
    if n <= p {
        return Err(Error::TooFewRows {
            rows: n,
            columns: p,
        });
    }
    let norms: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    let qr = design.clone().qr();
    let r = qr.r();
    for j in 0..p {
        if norms[j] == 0.0 || r[(j, j)].abs() <= RANK_TOL * norms[j] {
            // report in terms of the caller's columns
            let column = if intercept { j.saturating_sub(1) } else { j };
            return Err(Error::RankDeficient { column });
        }
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Estimation("triangular solve failed".to_string()))?;
    let fitted = &design * &beta;
    let residuals: Vec<f64> = (&yv - fitted).iter().copied().collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let residual_variance = rss / (n - p) as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Estimation("triangular inverse failed".to_string()))?;
    let standard_errors = (0..p)
        .map(|j| (residual_variance * r_inv.row(j).norm_squared()).sqrt())
        .collect();
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        residuals,
        residual_variance,
        standard_errors,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Independent route: solve XᵀX b = Xᵀy by Gaussian elimination with
    /// partial pivoting.
    fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len();
        let mut a = vec![vec![0.0; p + 1]; p];
        for (row, &yi) in x.iter().zip(y) {
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += row[i] * row[j];
                }
                a[i][p] += row[i] * yi;
            }
        }
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for i in 0..p {
                if i != col {
                    let f = a[i][col] / a[col][col];
                    for j in col..=p {
                        a[i][j] -= f * a[col][j];
                    }
                }
            }
        }
        (0..p).map(|i| a[i][p] / a[i][i]).collect()
    }

    #[test]
    fn exact_line() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let fit = ols_fit(&x, &[2.0, 4.0, 6.0], true).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 5.0, 5.0]);
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0, 3.0, 4.0], true),
            Err(Error::RankDeficient { column: 1 })
        ));
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0], true),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = crate::rng::stream(42, 0);
        let n = 500;
        let xs: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|&x| 3.0 + 1.5 * x + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = ols_fit(&DMatrix::from_column_slice(n, 1, &xs), &y, true).unwrap();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let oracle = normal_equations(&rows, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut rng = crate::rng::stream(3, 0);
        let n = 200;
        let x = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal) * 10.0);
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] - 2.0 * x[(i, 2)] + rng.random::<f64>()).collect();
        let fit = ols_fit(&x, &y, true).unwrap();
        let e = DVector::from_column_slice(&fit.residuals);
        for c in x.column_iter() {
            assert!(c.dot(&e).abs() <= 1e-8 * c.norm());
        }
        assert!(e.sum().abs() <= 1e-8 * (n as f64).sqrt());
    }

    #[test]
    fn standard_error_simple_regression() {
        // se(slope) = sigma / sqrt(Sxx)
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.1, 1.9, 3.2, 3.8, 5.1];
        let fit = ols_fit(&DMatrix::from_column_slice(5, 1, &xs), &y, true).unwrap();
        let sxx: f64 = xs.iter().map(|x| (x - 3.0f64).powi(2)).sum();
        let expect = (fit.residual_variance / sxx).sqrt();
        assert!((fit.standard_errors[1] - expect).abs() < 1e-12);
    }
}
