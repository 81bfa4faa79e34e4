//! The perturbation operators `C_y`, `B_y = K_y∘C_y`, `B_Δ` and `Ω̃_Δ = K_{|Δ|} − ε B_Δ`
//! built on a kernel family and a positive harmonic field `u = K φ`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::{KernelError, KernelFamily};
use crate::scalar::Scalar;

/// `σ` is set to zero where `‖∇u‖` is below this floor.
pub const GRADIENT_FLOOR: f64 = 1e-10;

/// Budget of cached `σ` values, in scalars.
const SIGMA_CACHE_SCALARS: usize = 1 << 23;

/// Field-dependent operators over a kernel family. The field is the family's own extension
/// `u_t = K_t φ` of the boundary data `φ`, so that `C_y u_y = ‖∇u_{2y}‖` holds exactly.
pub struct Perturbation<'a, F: Scalar, K: KernelFamily<F> + ?Sized> {
    family: &'a K,
    phi: Vec<F>,
    floor: F,
    sigma: RwLock<HashMap<u64, Arc<Vec<Vec<F>>>>>,
}

/// Midpoint nodes and weights of `[a, b]` with `n` cells.
pub fn midpoint_rule<F: Scalar>(a: F, b: F, n: usize) -> Vec<(F, F)> {
    let h = (b - a) / F::of_usize(n);
    (0..n).map(|i| (a + h * (F::of_usize(i) + F::lit(0.5)), h)).collect()
}

fn add_scaled<F: Scalar>(acc: &mut [F], x: &[F], s: F) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a = *a + s * v;
    }
}

impl<'a, F: Scalar, K: KernelFamily<F> + ?Sized> Perturbation<'a, F, K> {
    pub fn new(family: &'a K, phi: Vec<F>) -> Result<Self, KernelError> {
        if phi.len() != family.len() {
            return Err(KernelError::ShapeMismatch { expected: family.len(), got: phi.len() });
        }
        Ok(Perturbation { family, phi, floor: F::lit(GRADIENT_FLOOR), sigma: RwLock::new(HashMap::new()) })
    }

    pub fn family(&self) -> &'a K {
        self.family
    }

    pub fn phi(&self) -> &[F] {
        &self.phi
    }

    /// `u_t = K_t φ` at the nodes.
    pub fn trace(&self, t: F) -> Vec<F> {
        self.family.apply_k(t, &self.phi)
    }

    /// Components of `∇u` at `(x_i)_t`.
    pub fn gradient(&self, t: F) -> Vec<Vec<F>> {
        self.family.apply_grad(t, &self.phi)
    }

    /// `‖∇u‖` at `(x_i)_t`.
    pub fn gradient_norm(&self, t: F) -> Vec<F> {
        let g = self.gradient(t);
        (0..self.family.len()).map(|i| g.iter().map(|c| c[i] * c[i]).sum::<F>().sqrt()).collect()
    }

    /// Unit direction `σ(x_{2y})`, zero where the gradient is below the floor.
    pub fn sigma(&self, y: F) -> Arc<Vec<Vec<F>>> {
        let key = y.as_f64().to_bits();
        if let Some(s) = self.sigma.read().unwrap().get(&key) {
            return s.clone();
        }
        let mut g = self.gradient(F::lit(2.0) * y);
        for i in 0..self.family.len() {
            let norm = g.iter().map(|c| c[i] * c[i]).sum::<F>().sqrt();
            for c in g.iter_mut() {
                c[i] = if norm < self.floor { F::zero() } else { c[i] / norm };
            }
        }
        let s = Arc::new(g);
        let mut cache = self.sigma.write().unwrap();
        if (cache.len() + 1) * s.len() * self.family.len() > SIGMA_CACHE_SCALARS {
            cache.clear();
        }
        cache.insert(key, s.clone());
        s
    }

    /// `(C_y f)(x) = ⟨∇(K_y f)(x_y), σ(x_{2y})⟩`.
    pub fn apply_c(&self, y: F, f: &[F]) -> Vec<F> {
        let sigma = self.sigma(y);
        let g = self.family.apply_grad(y, f);
        (0..f.len()).map(|i| g.iter().zip(sigma.iter()).map(|(gc, sc)| gc[i] * sc[i]).sum()).collect()
    }

    pub fn adjoint_c(&self, y: F, m: &[F]) -> Vec<F> {
        let sigma = self.sigma(y);
        let mut out = vec![F::zero(); m.len()];
        for (axis, sc) in sigma.iter().enumerate() {
            if sc.iter().all(|&s| s == F::zero()) {
                continue;
            }
            let weighted: Vec<F> = m.iter().zip(sc).map(|(&a, &s)| a * s).collect();
            add_scaled(&mut out, &self.family.adjoint_grad(y, axis, &weighted), F::one());
        }
        out
    }

    /// `B_y f = K_y (C_y f)`.
    pub fn apply_b(&self, y: F, f: &[F]) -> Vec<F> {
        self.family.apply_k(y, &self.apply_c(y, f))
    }

    pub fn adjoint_b(&self, y: F, m: &[F]) -> Vec<F> {
        self.adjoint_c(y, &self.family.adjoint_k(y, m))
    }

    /// `B_Δ f = ∫_Δ B_y f dy` by the composite midpoint rule with `n` cells.
    pub fn apply_b_segment(&self, (a, b): (F, F), n: usize, f: &[F]) -> Vec<F> {
        let mut acc = vec![F::zero(); f.len()];
        for (y, w) in midpoint_rule(a, b, n) {
            add_scaled(&mut acc, &self.apply_b(y, f), w);
        }
        acc
    }

    pub fn adjoint_b_segment(&self, (a, b): (F, F), n: usize, m: &[F]) -> Vec<F> {
        let mut acc = vec![F::zero(); m.len()];
        for (y, w) in midpoint_rule(a, b, n) {
            add_scaled(&mut acc, &self.adjoint_b(y, m), w);
        }
        acc
    }

    /// `Ω̃_Δ f = K_{|Δ|} f − ε B_Δ f`.
    pub fn apply_omega_tilde(&self, segment: (F, F), epsilon: F, n: usize, f: &[F]) -> Vec<F> {
        let mut out = self.family.apply_k(segment.1 - segment.0, f);
        if epsilon != F::zero() {
            add_scaled(&mut out, &self.apply_b_segment(segment, n, f), -epsilon);
        }
        out
    }

    pub fn adjoint_omega_tilde(&self, segment: (F, F), epsilon: F, n: usize, m: &[F]) -> Vec<F> {
        let mut out = self.family.adjoint_k(segment.1 - segment.0, m);
        if epsilon != F::zero() {
            add_scaled(&mut out, &self.adjoint_b_segment(segment, n, m), -epsilon);
        }
        out
    }

    /// `Π^μ f = Ω̃_{j_K}(⋯ Ω̃_{j_1} f)` for pieces listed bottom first.
    pub fn apply_pi(&self, pieces: &[(F, F)], epsilon: F, n: usize, f: &[F]) -> Vec<F> {
        pieces.iter().fold(f.to_vec(), |v, &j| self.apply_omega_tilde(j, epsilon, n, &v))
    }

    /// `mᵀ Π^μ`, propagating from the top piece down.
    pub fn adjoint_pi(&self, pieces: &[(F, F)], epsilon: F, n: usize, m: &[F]) -> Vec<F> {
        pieces.iter().rev().fold(m.to_vec(), |v, &j| self.adjoint_omega_tilde(j, epsilon, n, &v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryMesh;
    use crate::kernels::SpectralFamily;

    fn bump(mesh: &BoundaryMesh<f64>) -> Vec<f64> {
        mesh.nodes().iter().map(|p| (1.0 - (p[0] / 0.6).powi(2)).max(0.0) + 0.1).collect()
    }

    #[test]
    fn c_of_trace_is_gradient_norm() {
        let fam = SpectralFamily::new(BoundaryMesh::periodic(2, 8.0, 128, 1.0).unwrap()).unwrap();
        let phi = bump(fam.mesh());
        let pert = Perturbation::new(&fam, phi).unwrap();
        let y = 0.3;
        let lhs = pert.apply_c(y, &pert.trace(y));
        let rhs = pert.gradient_norm(2.0 * y);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
        let ones = vec![1.0; fam.len()];
        assert!(pert.apply_b(y, &ones).iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn constant_field_kills_the_perturbation() {
        let fam = SpectralFamily::new(BoundaryMesh::periodic(2, 8.0, 64, 1.0).unwrap()).unwrap();
        let pert = Perturbation::new(&fam, vec![2.0; 64]).unwrap();
        let f: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).sin()).collect();
        let a = pert.apply_omega_tilde((0.25, 0.5), 0.1, 4, &f);
        let b = fam.apply_k(0.25, &f);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-15));
    }
}
