//! Numerical estimators and hypothesis tests shared by the pipeline.

mod logistic;
mod mann_whitney;
mod ols;
mod permutation;

pub use logistic::{
    logistic_fit, penalized_log_likelihood, sigmoid, LogisticFit, COEF_TOL, MAX_NEWTON_STEPS,
};
pub use mann_whitney::{
    combine_tails, exact_u_counts, mann_whitney_u, midranks, Alternative, UMethod, UTestResult,
    EXACT_MAX,
};
pub use ols::{ols_fit, OlsFit};
pub use permutation::{permutation_test, smoothed_p_value, PermutationResult};
