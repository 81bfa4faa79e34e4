//! The limit kernel `ω_Δ` of the compositions `Π^μ` under refinement, and checks of its
//! properties: mean one, positivity, semigroup law, the Φ-property, comparison with
//! `k_{1−y}` and the differential equation of `y ↦ (Ω_y φ_y)(x)`.

mod checks;
mod pi;

pub use checks::{
    ode_residual, omega_vs_k_envelope, phi_property_check, pi_bound_constant, positivity_scan, very_important_constant,
    EnvelopeReport, OdeReport, PhiReport, PositivityScan,
};
pub use pi::{
    iterate_pi, omega_apply, omega_composed, omega_segment, omega_transpose_apply, omega_vector, omega_y_vector,
    propagate_rows, ApplyReport, ConvergenceReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::KernelError;
use crate::partitions::PartitionError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OmegaError {
    #[error("no convergence by depth {depth}: last increment {increment:.3e} above tolerance {tolerance:.3e}")]
    NoConvergence { depth: u32, increment: f64, tolerance: f64 },
    #[error("ψ must be positive at every node; minimum {0:.3e}")]
    NonPositivePsi(f64),
    #[error("ω_y has a non-positive entry ({min:.3e}) at y = {y}")]
    NonPositiveOmega { y: f64, min: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Refinement driver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OmegaConfig {
    pub epsilon: f64,
    /// Cauchy tolerance on the Martin max-norm increment between depths.
    pub tolerance: f64,
    /// Depth of the first increment that may stop the iteration.
    pub min_depth: u32,
    pub max_depth: u32,
    /// Midpoint cells per piece in each `b_j` factor.
    pub quad_points: usize,
    /// ε values of the positivity scan.
    pub epsilon_grid: Vec<f64>,
    /// Stop at exactly this depth instead of on the tolerance, so that different calls
    /// use the same discrete operator.
    pub fixed_depth: Option<u32>,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        OmegaConfig {
            epsilon: 0.05,
            tolerance: 1e-4,
            min_depth: 5,
            max_depth: 11,
            quad_points: 2,
            epsilon_grid: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5],
            fixed_depth: None,
        }
    }
}

impl OmegaConfig {
    pub fn validate(&self) -> Result<(), OmegaError> {
        let bad = |m: &str| Err(OmegaError::InvalidConfig(m.into()));
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1)");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.max_depth < 3 || self.min_depth > self.max_depth {
            return bad("need max_depth >= 3 and min_depth <= max_depth");
        }
        if self.fixed_depth == Some(0) {
            return bad("fixed_depth must be at least 1");
        }
        if self.quad_points == 0 {
            return bad("quad_points must be positive");
        }
        if self.epsilon_grid.iter().any(|e| !(0.0..1.0).contains(e)) {
            return bad("epsilon grid values must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        OmegaConfig { epsilon, ..self.clone() }
    }

    /// Whether depth `n` with increment `inc` ends the refinement.
    pub(crate) fn stops(&self, n: u32, inc: f64, tolerance: f64) -> bool {
        match self.fixed_depth {
            Some(d) => n >= d,
            None => n >= self.min_depth && inc < tolerance,
        }
    }

    pub(crate) fn depth_cap(&self) -> u32 {
        self.fixed_depth.unwrap_or(self.max_depth)
    }
}
