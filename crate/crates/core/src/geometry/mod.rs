//! Near-half-space geometry: boundary graphs, distance queries and boundary meshes.

mod graph;
mod mesh;

pub use graph::{build_graph, Closest, GraphGrid, LipschitzGraph};
pub use mesh::{build_boundary_mesh, surface_ball, BoundaryMesh, MeshLayout, MeshSpec, WeightSource};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("measured Lipschitz constant {measured} exceeds declared {declared}")]
    LipschitzViolation { measured: f64, declared: f64 },
    #[error("nonzero boundary value reaches outside the support ball near {position:?}")]
    SupportViolation { position: Vec<f64> },
    #[error("point is not strictly above the boundary graph")]
    OutsideDomain,
    #[error("non-flat boundaries are implemented for d = 2 and d = 3, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),
    #[error("no mesh node within distance {radius} of the ball center")]
    EmptyBall { radius: f64 },
    #[error("cell {cell} has relative standard error {relative_error:.3e} above the bound {bound:.3e}")]
    InsufficientWalks { cell: usize, relative_error: f64, bound: f64 },
    #[error(transparent)]
    Walk(#[from] crate::harmonic::WalkError),
}
