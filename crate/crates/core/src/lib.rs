//! Conditional feature importance for mixed continuous / categorical data.
//!
//! The central procedure fits a model on a training split, draws knockoff
//! copies of the test features, and measures how much the test loss grows
//! when a feature (group) is swapped for its knockoff. A one-sided paired
//! t-test on the per-row loss differences gives a p-value.
//!
//! Knockoffs come either from a second-order Gaussian construction on the
//! one-hot encoding or from a sequential sampler that fits penalized linear
//! and multinomial models column by column, which respects categorical
//! columns natively.

pub mod baselines;
pub mod cpi;
pub mod error;
pub mod evalmetrics;
pub mod experiment;
pub mod knockoffs;
pub mod learners;
pub mod par;
pub mod penalized;
pub mod seed;
pub mod simgen;
pub mod tabular;

pub use error::{Error, Result};
