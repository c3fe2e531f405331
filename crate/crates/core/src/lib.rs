//! Estimation of sparse and latent-variable autoregressive graphical models.
//!
//! The inverse power spectral density of an AR(n) process is a matrix
//! pseudo-polynomial of degree `n`. This crate recovers it from data as a
//! sparse polynomial (or a sparse-minus-low-rank pair) by an iterative
//! reweighting scheme whose weights are the generalized maximum likelihood
//! estimates of the hyperparameters of sparsity- and rank-inducing priors.
//!
//! Module map:
//! * [`polyalg`]: matrix pseudo-polynomials, the Toeplitz operator and its adjoint.
//! * [`tsdata`]: time-series ingestion and windowed covariance lags.
//! * [`armodel`]: ground-truth generation, exact lags, Yule–Walker, simulation.
//! * [`sparsedual`]: weighted sparse problem solved through its dual.
//! * [`latentdual`]: sparse plus low-rank problem solved by ADMM on its dual.
//! * [`ebayes`]: the reweighting outer loops.
//! * [`evalx`]: error, support, rank and complexity metrics.
//! * [`baseline`]: fixed-weight grid estimators ranked by BIC.
//! * [`montecarlo`]: the experiment driver used by the CLI.
//! * [`oracles`]: brute-force reference computations for cross-checks.

pub mod armodel;
pub mod baseline;
pub mod ebayes;
mod error;
pub mod evalx;
pub mod latentdual;
pub mod linalg;
pub mod montecarlo;
pub mod oracles;
pub mod polyalg;
pub mod sparsedual;
pub mod tsdata;

pub use error::{Error, Result};
pub use polyalg::{BlockToeplitz, MatrixPoly};
