//! Kernel families: the operators `K_y` and `∇(K_y ·)` on nodal data of a boundary mesh.
//!
//! Operators act in measure form: `(K_y f)(x_i) = Σ_j M_y[i][j] f_j` with
//! `M_y[i][j] = ω^{(x_i)_y}(cell_j) = k_y(x_i, ξ_j) w_j`. Adjoints propagate row vectors,
//! `m ↦ mᵀ M_y`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex;
use rayon::prelude::*;

use super::{KernelError, Provenance};
use crate::geometry::{BoundaryMesh, MeshLayout};
use crate::harmonic::{halfplane_cell_mass, halfplane_cell_mass_gradient, square_cell_mass, SpectralGrid};
use crate::scalar::Scalar;

pub trait KernelFamily<F: Scalar>: Sync {
    fn mesh(&self) -> &BoundaryMesh<F>;

    fn provenance(&self) -> Provenance;

    /// `(K_y f)(x_i)` at every node.
    fn apply_k(&self, y: F, f: &[F]) -> Vec<F>;

    /// `mᵀ M_y`.
    fn adjoint_k(&self, y: F, m: &[F]) -> Vec<F>;

    /// Components of `∇(K_y f)` at the points `(x_i)_y`, vertical last.
    fn apply_grad(&self, y: F, f: &[F]) -> Vec<Vec<F>>;

    /// `mᵀ ∂_axis M_y`.
    fn adjoint_grad(&self, y: F, axis: usize, m: &[F]) -> Vec<F>;

    fn len(&self) -> usize {
        self.mesh().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self) -> usize {
        self.mesh().dim()
    }
}

/// Flat torus boundary: every operator is a Fourier multiplier, so the semigroup law
/// holds at all heights, including heights far below the node spacing.
pub struct SpectralFamily<F: Scalar> {
    mesh: BoundaryMesh<F>,
    grid: SpectralGrid<F>,
}

impl<F: Scalar> SpectralFamily<F> {
    pub fn new(mesh: BoundaryMesh<F>) -> Result<Self, KernelError> {
        let grid = SpectralGrid::from_layout(mesh.dim(), mesh.layout()).ok_or(KernelError::UnsupportedMesh)?;
        Ok(SpectralFamily { mesh, grid })
    }

    fn decay(&self, y: F) -> Vec<F> {
        self.grid.magnitude().iter().map(|&k| (-y * k).exp()).collect()
    }

    /// Fourier symbol of `∂_axis K_y`; `conjugate` gives the adjoint.
    fn grad_symbol(&self, y: F, axis: usize, conjugate: bool) -> Vec<Complex<F>> {
        let decay = self.decay(y);
        let vertical = axis + 1 == self.mesh.dim();
        let sign = if conjugate { -F::one() } else { F::one() };
        (0..self.grid.len())
            .map(|m| {
                if vertical {
                    Complex::new(-self.grid.magnitude()[m] * decay[m], F::zero())
                } else {
                    Complex::new(F::zero(), sign * self.grid.wave()[m][axis] * decay[m])
                }
            })
            .collect()
    }
}

impl<F: Scalar> KernelFamily<F> for SpectralFamily<F> {
    fn mesh(&self) -> &BoundaryMesh<F> {
        &self.mesh
    }

    fn provenance(&self) -> Provenance {
        Provenance::Spectral
    }

    fn apply_k(&self, y: F, f: &[F]) -> Vec<F> {
        let decay = self.decay(y);
        self.grid.multiply(f, |m| Complex::new(decay[m], F::zero()))
    }

    fn adjoint_k(&self, y: F, m: &[F]) -> Vec<F> {
        // The periodized Poisson kernel is even, so `M_y` is symmetric.
        self.apply_k(y, m)
    }

    fn apply_grad(&self, y: F, f: &[F]) -> Vec<Vec<F>> {
        let spectrum = self.grid.forward(f);
        (0..self.mesh.dim())
            .map(|axis| {
                let symbol = self.grad_symbol(y, axis, false);
                let spec: Vec<Complex<F>> = spectrum.iter().zip(&symbol).map(|(a, b)| a * b).collect();
                self.grid.inverse(spec)
            })
            .collect()
    }

    fn adjoint_grad(&self, y: F, axis: usize, m: &[F]) -> Vec<F> {
        let symbol = self.grad_symbol(y, axis, true);
        self.grid.multiply(m, |k| symbol[k])
    }
}

/// Dense matrices of one height.
struct Level<F> {
    value: Vec<F>,
    grad: Vec<Vec<F>>,
}

/// Truncated flat meshes (`Segments` in `d = 2`, `Squares` in `d = 3`) with closed-form
/// cell masses: the entries are exact, the truncation at `R_trunc` and the midpoint
/// evaluation at nodes are the only discretization.
pub struct CellOracleFamily<F: Scalar> {
    mesh: BoundaryMesh<F>,
    levels: RwLock<HashMap<u64, Arc<Level<F>>>>,
}

/// Cached heights before the cache is flushed.
const LEVEL_CACHE: usize = 24;

impl<F: Scalar> CellOracleFamily<F> {
    pub fn new(mesh: BoundaryMesh<F>) -> Result<Self, KernelError> {
        match mesh.layout() {
            MeshLayout::Segments { .. } | MeshLayout::Squares { .. } => {}
            MeshLayout::Periodic { .. } => return Err(KernelError::UnsupportedMesh),
        }
        Ok(CellOracleFamily { mesh, levels: RwLock::new(HashMap::new()) })
    }

    fn level(&self, y: F) -> Arc<Level<F>> {
        let key = y.as_f64().to_bits();
        if let Some(level) = self.levels.read().unwrap().get(&key) {
            return level.clone();
        }
        let level = Arc::new(self.build_level(y));
        let mut cache = self.levels.write().unwrap();
        if cache.len() >= LEVEL_CACHE {
            cache.clear();
        }
        cache.insert(key, level.clone());
        level
    }

    fn build_level(&self, y: F) -> Level<F> {
        let n = self.mesh.len();
        let d = self.mesh.dim();
        let rows: Vec<(Vec<F>, Vec<Vec<F>>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = self.mesh.node(i);
                match self.mesh.layout() {
                    MeshLayout::Segments { edges } => {
                        let value = edges.windows(2).map(|w| halfplane_cell_mass(x[0], y, w[0], w[1])).collect();
                        let g: Vec<[F; 2]> =
                            edges.windows(2).map(|w| halfplane_cell_mass_gradient(x[0], y, w[0], w[1])).collect();
                        (value, vec![g.iter().map(|v| v[0]).collect(), g.iter().map(|v| v[1]).collect()])
                    }
                    MeshLayout::Squares { spacing, .. } => {
                        let half = *spacing / F::lit(2.0);
                        let masses = |p: &[F], h: F| -> Vec<F> {
                            self.mesh
                                .nodes()
                                .iter()
                                .map(|c| {
                                    square_cell_mass(p, h, &[c[0] - half, c[1] - half], &[c[0] + half, c[1] + half])
                                })
                                .collect()
                        };
                        let value = masses(&x[..2], y);
                        let step = y * F::lit(1e-5);
                        let grad = (0..d)
                            .map(|k| {
                                let (mut p1, mut p2) = ([x[0], x[1]], [x[0], x[1]]);
                                let (mut h1, mut h2) = (y, y);
                                if k < 2 {
                                    p1[k] = p1[k] + step;
                                    p2[k] = p2[k] - step;
                                } else {
                                    h1 = y + step;
                                    h2 = y - step;
                                }
                                let (a, b) = (masses(&p1, h1), masses(&p2, h2));
                                a.iter().zip(&b).map(|(&u, &v)| (u - v) / (F::lit(2.0) * step)).collect()
                            })
                            .collect();
                        (value, grad)
                    }
                    MeshLayout::Periodic { .. } => unreachable!("rejected in the constructor"),
                }
            })
            .collect();
        let mut value = Vec::with_capacity(n * n);
        let mut grad = vec![Vec::with_capacity(n * n); d];
        for (v, g) in rows {
            value.extend(v);
            for (dst, src) in grad.iter_mut().zip(g) {
                dst.extend(src);
            }
        }
        Level { value, grad }
    }
}

fn mat_vec<F: Scalar>(a: &[F], n: usize, f: &[F]) -> Vec<F> {
    a.par_chunks(n).map(|row| row.iter().zip(f).map(|(&x, &y)| x * y).sum()).collect()
}

fn vec_mat<F: Scalar>(a: &[F], n: usize, m: &[F]) -> Vec<F> {
    let mut out = vec![F::zero(); n];
    for (row, &mi) in a.chunks(n).zip(m) {
        if mi != F::zero() {
            for (o, &x) in out.iter_mut().zip(row) {
                *o = *o + mi * x;
            }
        }
    }
    out
}

impl<F: Scalar> KernelFamily<F> for CellOracleFamily<F> {
    fn mesh(&self) -> &BoundaryMesh<F> {
        &self.mesh
    }

    fn provenance(&self) -> Provenance {
        Provenance::Oracle
    }

    fn apply_k(&self, y: F, f: &[F]) -> Vec<F> {
        mat_vec(&self.level(y).value, self.len(), f)
    }

    fn adjoint_k(&self, y: F, m: &[F]) -> Vec<F> {
        vec_mat(&self.level(y).value, self.len(), m)
    }

    fn apply_grad(&self, y: F, f: &[F]) -> Vec<Vec<F>> {
        let level = self.level(y);
        level.grad.iter().map(|g| mat_vec(g, self.len(), f)).collect()
    }

    fn adjoint_grad(&self, y: F, axis: usize, m: &[F]) -> Vec<F> {
        vec_mat(&self.level(y).grad[axis], self.len(), m)
    }
}
