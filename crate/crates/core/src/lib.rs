//! Robust and differentially private Bayesian estimation under Gaussian
//! priors: posterior means of a Gaussian mean and of linear-regression
//! weights, computed from contaminated samples and released through a
//! grid exponential mechanism.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayesmean;
pub mod bayesreg;
pub mod concentration;
pub mod error;
pub mod harness;
pub mod hardness;
pub mod model;
pub mod numerics;
pub mod privacy;
pub mod robustmean;

pub use error::{Error, Result};
