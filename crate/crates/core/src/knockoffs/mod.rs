//! Knockoff samplers and second-order validity diagnostics.
//!
//! Samplers take a feature [`Frame`] and never a target, so knockoffs are
//! conditionally independent of the response by construction.

mod diagnostics;
mod gaussian;
mod sequential;

pub use diagnostics::{knockoff_diagnostics, KnockoffDiagnostics, LevelDistance};
pub use gaussian::{
    estimate_gaussian_params, gaussian_knockoffs, sample_gaussian_knockoffs,
    GaussianKnockoffParams,
};
pub use sequential::{sample_sequential_knockoffs, SequentialConfig};

use serde::{Deserialize, Serialize};

use crate::tabular::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Gaussian,
    Sequential,
}

/// Synthetic copy of a feature frame: same schema, same row count.
#[derive(Debug, Clone, PartialEq)]
pub struct KnockoffMatrix {
    pub frame: Frame,
    pub provenance: Provenance,
    /// Seed of the generator that produced the draws.
    pub seed: u64,
}
