//! Bayesian dynamic panel Tobit models with heterogeneous intercepts and
//! variances, estimated by Gibbs sampling with data augmentation.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod forecast;
pub mod gibbs;
pub mod montecarlo;
pub mod panel;
pub mod priors;
pub mod rng;
pub mod scoring;
pub mod store;

pub use error::{Error, Result};
