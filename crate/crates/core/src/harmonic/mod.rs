//! Harmonic measure, extensions of boundary data and Harnack-type bounds.

mod field;
mod harnack;
mod hitting;
mod oracle;
mod periodic;
mod wos;

pub use field::{extend, gradient, FieldForm, HarmonicField};
pub use harnack::{chain_quotient_bounds, harnack_envelope, HarnackConstants};
pub use hitting::{hitting_mass_gradient, hitting_masses, square_cell_mass, RowEstimator};
pub use oracle::{
    halfplane_cell_mass, halfplane_cell_mass_gradient, halfplane_exit_cdf, halfspace_kernel, periodic_poisson_2d,
    poisson_constant,
};
pub use periodic::{periodic_poisson_masses, PoissonPart, SpectralGrid};
pub use wos::{
    estimate_harmonic_measure, ks_statistic, run_walks, unit_direction, walk_rng, wos_sample, MeasureEstimate,
    WalkConfig, WalkError, WalkHit, WALKS_PER_STREAM,
};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicError {
    #[error("radius {r} must satisfy 0 <= r < R = {big_r}")]
    InvalidRadii { r: f64, big_r: f64 },
    #[error("heights must satisfy 0 < y1 <= y2, got y1 = {y1}, y2 = {y2}")]
    InvalidHeights { y1: f64, y2: f64 },
    #[error("difference step {step} too large for boundary distance {distance}")]
    StepTooLarge { step: f64, distance: f64 },
    #[error("boundary data must be nonnegative")]
    NegativeData,
    #[error("boundary data has {got} values for a mesh of {expected} nodes")]
    DataLength { got: usize, expected: usize },
    #[error("closed-form harmonic measure is only available on flat boundaries")]
    OracleUnavailable,
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
