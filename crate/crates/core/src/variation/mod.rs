//! The variation functional `V`, the dual densities `γ_y`, the limit measure `ν_ε`, the
//! search for points of small variation and the ball-mass scaling fit.

mod measure;
mod profile;
mod search;

pub use measure::{
    budget_check, budget_curve, gamma_density, gaussian_tests, kappa_exit, kappa_point, kappa_uniform_ball, nu_approx,
    BudgetReport, KappaChoice, MeasureOnMesh, MeasureProvenance, NuReport,
};
pub use profile::{log_height_rule, variation_profile, VariationProfile, GRID_CHANGE_LIMIT};
pub use search::{
    bourgain_search, scaling_exponent, tent_bourgain_search, tent_variation, BourgainPoint, McVariation, ScalingFit,
    TentSearch,
};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::harmonic::{HarmonicError, WalkError};
use crate::kernels::KernelError;
use crate::omega::OmegaError;
use crate::partitions::PartitionError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationError {
    #[error("halving the height grid changes V by {change:.3e} (limit {limit})")]
    GridTooCoarse { change: f64, limit: f64 },
    #[error("V falls below the vertical lower bound at node {node} by {deficit:.3e}")]
    LowerBoundViolated { node: usize, deficit: f64 },
    #[error("measure has negative mass {mass:.3e} at cell {cell}; ε is probably too large")]
    NonPositive { cell: usize, mass: f64 },
    #[error("test integrals moved by {increment:.3e} at the last level (tolerance {tolerance:.3e})")]
    NotCauchy { increment: f64, tolerance: f64 },
    #[error("surface ball of radius {radius} has no nodes")]
    EmptyBall { radius: f64 },
    #[error("only {usable} usable radii, at least 4 are needed")]
    InsufficientRadii { usable: usize },
    #[error("lower cut δ = {0} must lie in (0, 1/4)")]
    InvalidCut(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("field has no closed-form gradient")]
    NoClosedGradient,
    #[error(transparent)]
    Omega(#[from] OmegaError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
}

impl From<GeometryError> for VariationError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::EmptyBall { radius } => VariationError::EmptyBall { radius },
            other => VariationError::Harmonic(HarmonicError::Geometry(other)),
        }
    }
}

impl From<WalkError> for VariationError {
    fn from(e: WalkError) -> Self {
        VariationError::Harmonic(HarmonicError::Walk(e))
    }
}
