//! Data-driven fuzzy modeling for nonlinear system identification.
//!
//! The pipeline turns an input/output time series into a fuzzy model in
//! four stages:
//!
//! 1. [`crbm`]: a restricted Boltzmann machine with continuous visible units
//!    maps each NARMAX regressor to a vector of hidden activation
//!    probabilities.
//! 2. [`probcluster`]: Gibbs-sampled cluster labels under a Chinese
//!    restaurant process prior, with passive-aggressive max-margin updates
//!    of the cluster parameters, decide the rule count.
//! 3. [`fuzzy`] + [`elm`]: Gaussian antecedents centered on the clusters and
//!    consequents solved by the Moore-Penrose pseudoinverse.
//! 4. [`probopt`]: the row-stochastic rule probability matrix is fitted by
//!    maximizing the conditional log-likelihood of the training targets.
//!
//! [`bench`] wires the stages together, runs the ablation grid and writes
//! reports.

pub mod bench;
pub mod crbm;
pub mod dataset;
pub mod elm;
mod error;
pub mod fuzzy;
pub mod persist;
pub mod probcluster;
pub mod probopt;
pub mod rows;

pub use error::{Error, Result, Stage};
pub use rows::Rows;
