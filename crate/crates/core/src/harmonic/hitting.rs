//! Cell hitting masses `ω^p(cell_j)` from an interior point, and their gradients in `p`.

use rayon::prelude::*;

use super::periodic::{PoissonPart, SpectralGrid};
use super::wos::{estimate_harmonic_measure, unit_direction, walk_rng, wos_sample, WalkConfig, WALKS_PER_STREAM};
use super::{halfplane_cell_mass, halfplane_cell_mass_gradient, HarmonicError};
use crate::geometry::{BoundaryMesh, LipschitzGraph, MeshLayout};
use crate::scalar::Scalar;

/// How hitting masses are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowEstimator<F: Scalar> {
    /// Closed form; requires a flat boundary.
    Oracle,
    MonteCarlo {
        walks: usize,
        seed: u64,
        walk: WalkConfig<F>,
    },
}

impl<F: Scalar> RowEstimator<F> {
    /// Oracle on flat graphs, otherwise Monte Carlo with the given budget.
    pub fn auto(graph: &LipschitzGraph<F>, walks: usize, seed: u64) -> Self {
        if graph.is_flat() {
            RowEstimator::Oracle
        } else {
            RowEstimator::MonteCarlo { walks, seed, walk: WalkConfig::default() }
        }
    }
}

/// Exact mass of the rectangle `[a0, b0] × [a1, b1]` seen from `(x0, x1, y)` above the
/// plane: the subtended solid angle over `2π`.
pub fn square_cell_mass<F: Scalar>(x: &[F], y: F, lower: &[F], upper: &[F]) -> F {
    let corner = |u: F, v: F| (u * v / (y * (u * u + v * v + y * y).sqrt())).atan();
    let (a0, a1) = (lower[0] - x[0], lower[1] - x[1]);
    let (b0, b1) = (upper[0] - x[0], upper[1] - x[1]);
    (corner(b0, b1) - corner(a0, b1) - corner(b0, a1) + corner(a0, a1)) / (F::lit(2.0) * F::PI())
}

fn square_bounds<F: Scalar>(node: &[F], spacing: F) -> ([F; 2], [F; 2]) {
    let half = spacing / F::lit(2.0);
    ([node[0] - half, node[1] - half], [node[0] + half, node[1] + half])
}

fn oracle_masses<F: Scalar>(mesh: &BoundaryMesh<F>, p: &[F]) -> Vec<F> {
    let d = mesh.dim();
    let y = p[d - 1];
    match mesh.layout() {
        MeshLayout::Periodic { .. } => {
            let grid = SpectralGrid::from_layout(d, mesh.layout()).expect("periodic layout");
            grid.exit_masses(&p[..d - 1], y, PoissonPart::Value)
        }
        MeshLayout::Segments { edges } => edges.windows(2).map(|w| halfplane_cell_mass(p[0], y, w[0], w[1])).collect(),
        MeshLayout::Squares { spacing, .. } => mesh
            .nodes()
            .iter()
            .map(|node| {
                let (lo, hi) = square_bounds(node, *spacing);
                square_cell_mass(&p[..2], y, &lo, &hi)
            })
            .collect(),
    }
}

/// `ω^p(cell_j)` for every cell of the mesh.
pub fn hitting_masses<F: Scalar>(
    graph: &LipschitzGraph<F>,
    mesh: &BoundaryMesh<F>,
    p: &[F],
    estimator: &RowEstimator<F>,
) -> Result<Vec<F>, HarmonicError> {
    if !graph.contains(p) {
        return Err(HarmonicError::Geometry(crate::geometry::GeometryError::OutsideDomain));
    }
    match estimator {
        RowEstimator::Oracle => {
            if !graph.is_flat() {
                return Err(HarmonicError::OracleUnavailable);
            }
            Ok(oracle_masses(mesh, p))
        }
        RowEstimator::MonteCarlo { walks, seed, walk } => {
            Ok(estimate_harmonic_measure(graph, p, mesh, *walks, *seed, walk)?.masses)
        }
    }
}

/// Gradient of `p ↦ ω^p(cell_j)`: `d` component vectors over the cells, vertical last.
///
/// Monte Carlo rows use the mean-value identity `∇h(p) = (d/R) E[θ h(p + Rθ)]` over the
/// sphere of radius `R = dist(p, S)/2`, sampled with antithetic pairs `±θ`.
pub fn hitting_mass_gradient<F: Scalar>(
    graph: &LipschitzGraph<F>,
    mesh: &BoundaryMesh<F>,
    p: &[F],
    estimator: &RowEstimator<F>,
) -> Result<Vec<Vec<F>>, HarmonicError> {
    let d = mesh.dim();
    let dist = graph.distance_to_boundary(p)?;
    let y = p[d - 1];
    match estimator {
        RowEstimator::Oracle => {
            if !graph.is_flat() {
                return Err(HarmonicError::OracleUnavailable);
            }
            Ok(match mesh.layout() {
                MeshLayout::Periodic { .. } => {
                    let grid = SpectralGrid::from_layout(d, mesh.layout()).expect("periodic layout");
                    let mut parts: Vec<PoissonPart> = (0..d - 1).map(PoissonPart::Horizontal).collect();
                    parts.push(PoissonPart::Vertical);
                    parts.into_iter().map(|part| grid.exit_masses(&p[..d - 1], y, part)).collect()
                }
                MeshLayout::Segments { edges } => {
                    let g: Vec<[F; 2]> =
                        edges.windows(2).map(|w| halfplane_cell_mass_gradient(p[0], y, w[0], w[1])).collect();
                    vec![g.iter().map(|v| v[0]).collect(), g.iter().map(|v| v[1]).collect()]
                }
                MeshLayout::Squares { .. } => {
                    // Central differences of the closed form; the step is far below the
                    // smoothness scale `y` of the solid-angle function.
                    let h = dist * F::lit(1e-5);
                    (0..3)
                        .map(|k| {
                            let mut plus = p.to_vec();
                            let mut minus = p.to_vec();
                            plus[k] = plus[k] + h;
                            minus[k] = minus[k] - h;
                            let (mp, mm) = (oracle_masses(mesh, &plus), oracle_masses(mesh, &minus));
                            mp.iter().zip(&mm).map(|(&a, &b)| (a - b) / (F::lit(2.0) * h)).collect()
                        })
                        .collect()
                }
            })
        }
        RowEstimator::MonteCarlo { walks, seed, walk } => {
            mean_value_gradient(graph, mesh, p, dist / F::lit(2.0), *walks, *seed, walk)
        }
    }
}

fn mean_value_gradient<F: Scalar>(
    graph: &LipschitzGraph<F>,
    mesh: &BoundaryMesh<F>,
    p: &[F],
    radius: F,
    pairs: usize,
    seed: u64,
    walk: &WalkConfig<F>,
) -> Result<Vec<Vec<F>>, HarmonicError> {
    let d = mesh.dim();
    let n = mesh.len();
    let streams = pairs.div_ceil(WALKS_PER_STREAM);
    let partials: Result<Vec<Vec<Vec<F>>>, HarmonicError> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let mut rng = walk_rng(seed, s as u64);
            let mut acc = vec![vec![F::zero(); n]; d];
            for _ in 0..WALKS_PER_STREAM.min(pairs - s * WALKS_PER_STREAM) {
                let theta: Vec<F> = unit_direction(d, &mut rng);
                for sign in [F::one(), -F::one()] {
                    let start: Vec<F> = p.iter().zip(&theta).map(|(&x, &t)| x + sign * radius * t).collect();
                    let hit = wos_sample(graph, &start, walk, &mut rng)?;
                    if let Some(cell) = mesh.cell_of(&hit.point) {
                        for (k, row) in acc.iter_mut().enumerate() {
                            row[cell] = row[cell] + sign * theta[k];
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let scale = F::of_usize(d) / (radius * F::lit(2.0) * F::of_usize(pairs));
    let mut total = vec![vec![F::zero(); n]; d];
    for part in partials? {
        for (t, row) in total.iter_mut().zip(part) {
            for (a, b) in t.iter_mut().zip(row) {
                *a = *a + b;
            }
        }
    }
    Ok(total.into_iter().map(|row| row.into_iter().map(|v| v * scale).collect()).collect())
}
