//! Breath-VOC diabetes screening toolkit.
//!
//! The pipeline estimates causal effects of breath VOCs on blood glucose
//! (with placebo refutation, reverse-direction and confounder-sensitivity
//! checks), turns the effects into a composite "synthetic glucose" marker,
//! ranks subjects by cross-validated diabetes risk to find a gray zone of
//! high-risk non-diabetics, attributes predictions with Shapley values, and
//! stratifies the cohort with a Gaussian mixture. A linear structural causal
//! model simulator ([`scm`]) supplies data with known ground truth for every
//! estimator.

pub mod attribution;
pub mod causal;
pub mod classify;
pub mod cluster;
pub mod data;
pub mod error;
pub mod forest;
pub mod marker;
pub mod rng;
pub mod scm;
pub mod stats;

pub use error::{Error, Result};
