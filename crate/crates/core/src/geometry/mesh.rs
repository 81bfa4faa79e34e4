//! Boundary meshes: quadrature nodes on `S` with harmonic-measure cell weights.

use serde::{Deserialize, Serialize};

use super::{GeometryError, LipschitzGraph};
use crate::harmonic::{self, WalkConfig};
use crate::scalar::Scalar;

/// How cells are laid out in the horizontal coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum MeshLayout<F: Scalar> {
    /// Flat boundary wrapped onto a torus of side `period`; node `i` of each axis sits at
    /// `(i - per_axis/2) * period/per_axis`.
    Periodic { period: F, per_axis: usize },
    /// `d = 2`: cell `i` covers horizontal coordinates `[edges[i], edges[i+1])`.
    Segments { edges: Vec<F> },
    /// `d = 3`: squares of side `spacing` with lower-left corner `lower + spacing * (a, b)`;
    /// `cells[a * per_axis + b]` is the node owning that square, if any.
    Squares { lower: F, spacing: F, per_axis: usize, cells: Vec<Option<usize>> },
}

/// Origin of the cell weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum WeightSource<F: Scalar> {
    /// Closed-form half-space hitting law (flat boundary only).
    Exact,
    /// Periodized Poisson kernel sampled at the nodes (flat torus only).
    Spectral,
    MonteCarlo {
        walks: usize,
        seed: u64,
        shell: F,
    },
}

/// Mesh construction parameters. Cells are `resolution` wide inside `core_radius` and
/// grow geometrically by `growth` outside it until `r_trunc`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MeshSpec<F: Scalar> {
    pub r_trunc: F,
    pub resolution: F,
    pub core_radius: F,
    pub growth: F,
    /// Upper bound on the per-cell relative standard error of Monte Carlo weights.
    pub max_relative_error: Option<F>,
}

impl<F: Scalar> MeshSpec<F> {
    pub fn uniform(r_trunc: F, resolution: F) -> Self {
        MeshSpec { r_trunc, resolution, core_radius: r_trunc, growth: F::one(), max_relative_error: None }
    }

    pub fn graded(r_trunc: F, resolution: F, core_radius: F, growth: F) -> Self {
        MeshSpec { r_trunc, resolution, core_radius, growth, max_relative_error: None }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if !(self.resolution > F::zero()) || !(self.r_trunc > F::zero()) {
            return Err(GeometryError::InvalidMesh("resolution and r_trunc must be positive".into()));
        }
        if self.growth < F::one() {
            return Err(GeometryError::InvalidMesh("growth factor must be >= 1".into()));
        }
        Ok(())
    }
}

/// Quadrature nodes `ξ_i ∈ S` with weights `w_i ≈ ω^{z0}(cell_i)` and the unresolved tail mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoundaryMesh<F: Scalar> {
    dim: usize,
    nodes: Vec<Vec<F>>,
    weights: Vec<F>,
    standard_errors: Vec<F>,
    tail_mass: F,
    r_trunc: F,
    pole: Vec<F>,
    layout: MeshLayout<F>,
    source: WeightSource<F>,
}

impl<F: Scalar> BoundaryMesh<F> {
    /// Flat `d = 2` mesh with exact Cauchy cell masses for the pole `(0, pole_height)`.
    pub fn flat_exact(spec: &MeshSpec<F>, pole_height: F) -> Result<Self, GeometryError> {
        spec.validate()?;
        let edges = segment_edges(spec);
        let nodes = edges.windows(2).map(|w| vec![(w[0] + w[1]) / F::lit(2.0), F::zero()]).collect::<Vec<_>>();
        let weights: Vec<F> =
            edges.windows(2).map(|w| harmonic::halfplane_cell_mass(F::zero(), pole_height, w[0], w[1])).collect();
        let tail = (F::one() - weights.iter().copied().sum::<F>()).max(F::zero());
        let n = nodes.len();
        Ok(BoundaryMesh {
            dim: 2,
            nodes,
            weights,
            standard_errors: vec![F::zero(); n],
            tail_mass: tail,
            r_trunc: spec.r_trunc,
            pole: vec![F::zero(), pole_height],
            layout: MeshLayout::Segments { edges },
            source: WeightSource::Exact,
        })
    }

    /// Flat torus mesh in dimension `dim` with `per_axis` nodes per horizontal axis; the
    /// weights are the periodized Poisson kernel of the pole `(0, pole_height)` times the
    /// cell volume, which sum to one.
    pub fn periodic(dim: usize, period: F, per_axis: usize, pole_height: F) -> Result<Self, GeometryError> {
        if dim < 2 || per_axis < 4 || !per_axis.is_multiple_of(2) {
            return Err(GeometryError::InvalidMesh("periodic mesh needs d >= 2 and an even per_axis >= 4".into()));
        }
        let axes = dim - 1;
        let total = per_axis.pow(axes as u32);
        let h = period / F::of_usize(per_axis);
        let nodes: Vec<Vec<F>> = (0..total)
            .map(|flat| {
                let mut p = periodic_coords(flat, per_axis, axes, h);
                p.push(F::zero());
                p
            })
            .collect();
        let layout = MeshLayout::Periodic { period, per_axis };
        let origin = vec![F::zero(); axes];
        let weights = harmonic::periodic_poisson_masses(&layout, &nodes, &origin, pole_height);
        let mut pole = origin;
        pole.push(pole_height);
        Ok(BoundaryMesh {
            dim,
            nodes,
            weights,
            standard_errors: vec![F::zero(); total],
            tail_mass: F::zero(),
            r_trunc: period / F::lit(2.0),
            pole,
            layout,
            source: WeightSource::Spectral,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<F>] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &[F] {
        &self.nodes[i]
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn standard_errors(&self) -> &[F] {
        &self.standard_errors
    }

    pub fn tail_mass(&self) -> F {
        self.tail_mass
    }

    pub fn r_trunc(&self) -> F {
        self.r_trunc
    }

    pub fn pole(&self) -> &[F] {
        &self.pole
    }

    pub fn layout(&self) -> &MeshLayout<F> {
        &self.layout
    }

    pub fn source(&self) -> &WeightSource<F> {
        &self.source
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.layout, MeshLayout::Periodic { .. })
    }

    /// Smallest horizontal cell size.
    pub fn resolution(&self) -> F {
        match &self.layout {
            MeshLayout::Periodic { period, per_axis } => *period / F::of_usize(*per_axis),
            MeshLayout::Segments { edges } => edges.windows(2).map(|w| w[1] - w[0]).fold(F::infinity(), F::min),
            MeshLayout::Squares { spacing, .. } => *spacing,
        }
    }

    /// Horizontal extent of each cell (length in `d = 2`, area in `d = 3`, volume of the
    /// torus cell otherwise).
    pub fn cell_volumes(&self) -> Vec<F> {
        match &self.layout {
            MeshLayout::Periodic { period, per_axis } => {
                let h = *period / F::of_usize(*per_axis);
                vec![h.powi(self.dim as i32 - 1); self.len()]
            }
            MeshLayout::Segments { edges } => edges.windows(2).map(|w| w[1] - w[0]).collect(),
            MeshLayout::Squares { spacing, .. } => vec![*spacing * *spacing; self.len()],
        }
    }

    /// Cell containing the horizontal position of a boundary point, `None` for the tail.
    pub fn cell_of(&self, point: &[F]) -> Option<usize> {
        match &self.layout {
            MeshLayout::Periodic { period, per_axis } => {
                let h = *period / F::of_usize(*per_axis);
                let n = *per_axis as i64;
                let mut flat = 0usize;
                for &x in &point[..self.dim - 1] {
                    let k = (x / h).round().to_i64()? + n / 2;
                    flat = flat * *per_axis + k.rem_euclid(n) as usize;
                }
                Some(flat)
            }
            MeshLayout::Segments { edges } => {
                let x = point[0];
                if x < edges[0] || x >= edges[edges.len() - 1] {
                    return None;
                }
                Some(edges.partition_point(|&e| e <= x) - 1)
            }
            MeshLayout::Squares { lower, spacing, per_axis, cells } => {
                let a = ((point[0] - *lower) / *spacing).floor().to_i64()?;
                let b = ((point[1] - *lower) / *spacing).floor().to_i64()?;
                let n = *per_axis as i64;
                if a < 0 || b < 0 || a >= n || b >= n {
                    return None;
                }
                cells[(a * n + b) as usize]
            }
        }
    }

    /// Horizontal distance between two boundary points (minimum image on the torus) plus
    /// the vertical offset.
    pub fn boundary_distance(&self, a: &[F], b: &[F]) -> F {
        let mut sum = F::zero();
        for k in 0..self.dim {
            let mut dx = (a[k] - b[k]).abs();
            if let MeshLayout::Periodic { period, .. } = &self.layout {
                if k + 1 < self.dim {
                    dx = dx.min(*period - dx);
                }
            }
            sum = sum + dx * dx;
        }
        sum.sqrt()
    }

    /// Integral of nodal values against the cell weights.
    pub fn integrate(&self, values: &[F]) -> F {
        values.iter().zip(&self.weights).map(|(&v, &w)| v * w).sum()
    }

    /// Replaces the weights; used by estimators that produce weights after the layout.
    pub(crate) fn with_weights(mut self, weights: Vec<F>, errors: Vec<F>, tail: F, source: WeightSource<F>) -> Self {
        self.weights = weights;
        self.standard_errors = errors;
        self.tail_mass = tail;
        self.source = source;
        self
    }
}

fn periodic_coords<F: Scalar>(flat: usize, per_axis: usize, axes: usize, h: F) -> Vec<F> {
    let mut coords = vec![F::zero(); axes];
    let mut rest = flat;
    for k in (0..axes).rev() {
        let i = rest % per_axis;
        rest /= per_axis;
        coords[k] = h * (F::of_usize(i) - F::of_usize(per_axis / 2));
    }
    coords
}

/// Symmetric cell edges: uniform inside the core, geometric growth to `r_trunc`.
fn segment_edges<F: Scalar>(spec: &MeshSpec<F>) -> Vec<F> {
    let core = spec.core_radius.min(spec.r_trunc);
    let cells = (core / spec.resolution).ceil().to_usize().unwrap_or(1).max(1);
    let h = core / F::of_usize(cells);
    let mut right = vec![F::zero()];
    for i in 1..cells {
        right.push(h * F::of_usize(i));
    }
    // Exact, so that rounding cannot leave a sliver cell before `r_trunc`.
    right.push(core);
    let mut width = h;
    while *right.last().unwrap() < spec.r_trunc {
        width = width * spec.growth;
        let next = *right.last().unwrap() + width;
        // Merge a sliver remainder into the last cell.
        if next + width * F::lit(0.5) >= spec.r_trunc {
            right.push(spec.r_trunc);
        } else {
            right.push(next);
        }
    }
    let mut edges: Vec<F> = right.iter().skip(1).rev().map(|&x| -x).collect();
    edges.extend(right);
    edges
}

fn empty_mesh<F: Scalar>(
    graph: &LipschitzGraph<F>,
    spec: &MeshSpec<F>,
    pole: &[F],
) -> Result<BoundaryMesh<F>, GeometryError> {
    let dim = graph.dim();
    let (layout, nodes) = match dim {
        2 => {
            let edges = segment_edges(spec);
            let nodes = edges.windows(2).map(|w| graph.lift(&[(w[0] + w[1]) / F::lit(2.0)])).collect();
            (MeshLayout::Segments { edges }, nodes)
        }
        3 => {
            let per_axis = (F::lit(2.0) * spec.r_trunc / spec.resolution).ceil().to_usize().unwrap_or(1);
            let spacing = spec.resolution;
            let lower = -spacing * F::of_usize(per_axis) / F::lit(2.0);
            let mut cells = vec![None; per_axis * per_axis];
            let mut nodes = Vec::new();
            for a in 0..per_axis {
                for b in 0..per_axis {
                    let cx = lower + spacing * (F::of_usize(a) + F::lit(0.5));
                    let cy = lower + spacing * (F::of_usize(b) + F::lit(0.5));
                    if (cx * cx + cy * cy).sqrt() <= spec.r_trunc {
                        cells[a * per_axis + b] = Some(nodes.len());
                        nodes.push(graph.lift(&[cx, cy]));
                    }
                }
            }
            (MeshLayout::Squares { lower, spacing, per_axis, cells }, nodes)
        }
        _ => return Err(GeometryError::UnsupportedDimension(dim)),
    };
    let n = nodes.len();
    Ok(BoundaryMesh {
        dim,
        nodes,
        weights: vec![F::zero(); n],
        standard_errors: vec![F::zero(); n],
        tail_mass: F::one(),
        r_trunc: spec.r_trunc,
        pole: pole.to_vec(),
        layout,
        source: WeightSource::Exact,
    })
}

/// Builds the mesh layout over `S ∩ B(0, r_trunc)` and estimates the cell weights by
/// walk-on-spheres from the pole; weights plus tail sum to one exactly.
pub fn build_boundary_mesh<F: Scalar>(
    graph: &LipschitzGraph<F>,
    spec: &MeshSpec<F>,
    pole: &[F],
    walks: usize,
    seed: u64,
    walk: &WalkConfig<F>,
) -> Result<BoundaryMesh<F>, GeometryError> {
    spec.validate()?;
    if spec.r_trunc < F::lit(2.0) * graph.support_radius() {
        return Err(GeometryError::InvalidMesh("r_trunc must be at least twice the support radius".into()));
    }
    if !graph.contains(pole) {
        return Err(GeometryError::OutsideDomain);
    }
    let mesh = empty_mesh(graph, spec, pole)?;
    let estimate = harmonic::estimate_harmonic_measure(graph, pole, &mesh, walks, seed, walk)?;
    if let Some(bound) = spec.max_relative_error {
        for (cell, (&m, &se)) in estimate.masses.iter().zip(&estimate.standard_errors).enumerate() {
            let rel = if m > F::zero() { se / m } else { F::infinity() };
            if rel > bound {
                return Err(GeometryError::InsufficientWalks {
                    cell,
                    relative_error: rel.as_f64(),
                    bound: bound.as_f64(),
                });
            }
        }
    }
    let source = WeightSource::MonteCarlo { walks, seed, shell: walk.shell };
    Ok(mesh.with_weights(estimate.masses, estimate.standard_errors, estimate.tail, source))
}

/// Nodes within distance `radius` of `center`.
pub fn surface_ball<F: Scalar>(mesh: &BoundaryMesh<F>, center: &[F], radius: F) -> Result<Vec<usize>, GeometryError> {
    let nodes: Vec<usize> =
        (0..mesh.len()).filter(|&i| mesh.boundary_distance(mesh.node(i), center) <= radius).collect();
    if nodes.is_empty() {
        return Err(GeometryError::EmptyBall { radius: radius.as_f64() });
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_edges_are_symmetric_and_reach_truncation() {
        let spec = MeshSpec::<f64>::graded(100.0, 0.1, 1.0, 1.2);
        let edges = segment_edges(&spec);
        assert_eq!(edges[0], -100.0);
        assert_eq!(*edges.last().unwrap(), 100.0);
        for (a, b) in edges.iter().zip(edges.iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
        assert!(edges.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn exact_flat_weights_and_tail_sum_to_one() {
        let mesh = BoundaryMesh::flat_exact(&MeshSpec::uniform(4.0, 0.25), 1.0).unwrap();
        let total: f64 = mesh.weights().iter().sum::<f64>() + mesh.tail_mass();
        assert!((total - 1.0).abs() < 1e-14);
        // Tail of the Cauchy law beyond |x| = 4: 1 - (2/π) atan 4.
        let tail = 1.0 - 2.0 / std::f64::consts::PI * 4.0_f64.atan();
        assert!((mesh.tail_mass() - tail).abs() < 1e-13);
    }

    #[test]
    fn periodic_cells_wrap() {
        let mesh = BoundaryMesh::<f64>::periodic(2, 8.0, 16, 1.0).unwrap();
        assert_eq!(mesh.cell_of(&[0.0, 0.0]), Some(8));
        assert_eq!(mesh.cell_of(&[8.0, 0.0]), Some(8));
        assert_eq!(mesh.cell_of(&[-4.0, 0.0]), Some(0));
        assert!((mesh.boundary_distance(&[-3.5, 0.0], &[3.5, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_counts_on_uniform_mesh() {
        let mesh = BoundaryMesh::flat_exact(&MeshSpec::uniform(1.0, 0.01), 1.0).unwrap();
        let ball = surface_ball(&mesh, &[0.0, 0.0], 0.05).unwrap();
        assert!((9..=11).contains(&ball.len()), "{}", ball.len());
        assert_eq!(surface_ball(&mesh, &[0.0, 0.0], 2.0).unwrap().len(), mesh.len());
        let off = surface_ball(&mesh, &[0.0, 0.0], 0.001);
        assert!(matches!(off, Err(GeometryError::EmptyBall { .. })));
    }
}
