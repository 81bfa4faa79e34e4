//! Numerical laboratory for bounded-radial-variation points of positive harmonic functions
//! on near half spaces.
//!
//! The numerical modules are generic over the floating scalar ([`scalar::Scalar`], `f32`
//! or `f64`); partitions use exact rationals. The aliases below fix `f64`.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod harmonic;
pub mod kernels;
pub mod omega;
pub mod partitions;
pub mod scalar;
pub mod variation;

pub use scalar::Scalar;

/// Exact rational endpoints used by the `f64` aliases.
pub type Rational = num_rational::BigRational;

pub type Graph = geometry::LipschitzGraph<f64>;
pub type Mesh = geometry::BoundaryMesh<f64>;
pub type Field = harmonic::HarmonicField<f64>;
pub type Kernel = kernels::DiscreteKernel<f64>;
pub type TorusFamily = kernels::SpectralFamily<f64>;
pub type FlatFamily = kernels::CellOracleFamily<f64>;
pub type Profile = variation::VariationProfile<f64>;
pub type Measure = variation::MeasureOnMesh<f64>;
pub type Interval = partitions::Segment<Rational>;
pub type RationalPartition = partitions::Partition<Rational>;
