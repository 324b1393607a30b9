//! Plain and weighted minimum-norm estimation for equispaced Fourier-feature
//! regression, exact and asymptotic risk formulas, and the experiment
//! pipelines built on them.

// `!(x > a)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circulant;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod interpolation;
pub mod model;
pub mod montecarlo;
pub mod risk;

pub use error::{Error, Result};
