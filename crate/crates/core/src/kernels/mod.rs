//! Discrete kernels `k_y`, `c_y`, `b_y`, `b_Δ`, `ω̃_Δ` over a boundary mesh, their algebra
//! and the fitted constants of their bounds.

mod build;
mod family;
mod fit;
mod kernel;
mod ops;
mod row;

pub use build::{b_kernel, b_segment_kernel, c_kernel, k_kernel, materialize_rows, omega_tilde_kernel, BSegmentBuild};
pub use family::{CellOracleFamily, KernelFamily, SpectralFamily};
pub use fit::{
    fit_entry_bound, fit_quotient_exponent, height_difference_check, max_entry_ratio, HeightDifferenceReport,
    QuotientFit,
};
pub use kernel::{
    apply_kernel, compose, read_kernel, write_kernel, DiscreteKernel, KernelKind, KernelLabel, Provenance, WEIGHT_FLOOR,
};
pub use ops::{midpoint_rule, Perturbation, GRADIENT_FLOOR};
pub use row::{martin_kernel_row, KernelRow};

use thiserror::Error;

use crate::harmonic::HarmonicError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("kernel has non-finite entries")]
    NonFinite,
    #[error("mesh layout is not supported by this kernel family")]
    UnsupportedMesh,
    #[error("cells {cells:?} have weight below the floor")]
    ZeroWeightCell { cells: Vec<usize> },
    #[error(
        "y-quadrature unstable: doubling to {points} points moved entries by {change:.3e} (tolerance {tolerance:.3e})"
    )]
    QuadratureUnstable { points: usize, change: f64, tolerance: f64 },
    #[error("height must be positive, got {0}")]
    InvalidHeight(f64),
    #[error("segment [{0}, {1}] must satisfy 0 < a < b")]
    InvalidSegment(f64, f64),
    #[error("epsilon must lie in [0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("too few samples for a fit: {0}")]
    InsufficientData(usize),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
}

impl From<std::io::Error> for KernelError {
    fn from(e: std::io::Error) -> Self {
        KernelError::Io(e.to_string())
    }
}

pub(crate) fn check_height(y: f64) -> Result<(), KernelError> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidHeight(y))
    }
}

pub(crate) fn check_segment(a: f64, b: f64) -> Result<(), KernelError> {
    if a > 0.0 && b > a && b.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidSegment(a, b))
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<(), KernelError> {
    if (0.0..1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(KernelError::InvalidEpsilon(epsilon))
    }
}
