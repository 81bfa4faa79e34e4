//! Single Martin-kernel rows `k(p, ξ_j) = ω^p(cell_j) / ω^{z0}(cell_j)` from an arbitrary
//! interior point.

use serde::{Deserialize, Serialize};

use super::{KernelError, WEIGHT_FLOOR};
use crate::geometry::{BoundaryMesh, LipschitzGraph};
use crate::harmonic::{estimate_harmonic_measure, hitting_masses, RowEstimator};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KernelRow<F: Scalar> {
    pub point: Vec<F>,
    /// Kernel values; zero at flagged cells.
    pub values: Vec<F>,
    /// Hitting masses `ω^p(cell_j)`.
    pub masses: Vec<F>,
    /// Standard errors of `values` (zero for the oracle).
    pub standard_errors: Vec<F>,
    /// Cells with weight below [`WEIGHT_FLOOR`], excluded from norms.
    pub flagged: Vec<usize>,
    /// Mass that left the mesh.
    pub tail: F,
}

impl<F: Scalar> KernelRow<F> {
    /// `Σ_j k(p, ξ_j) w_j` over unflagged cells.
    pub fn integral(&self, weights: &[F]) -> F {
        self.values.iter().zip(weights).map(|(&k, &w)| k * w).sum()
    }
}

pub fn martin_kernel_row<F: Scalar>(
    graph: &LipschitzGraph<F>,
    mesh: &BoundaryMesh<F>,
    p: &[F],
    estimator: &RowEstimator<F>,
) -> Result<KernelRow<F>, KernelError> {
    let (masses, errors, tail) = match estimator {
        RowEstimator::Oracle => {
            let m = hitting_masses(graph, mesh, p, estimator)?;
            let tail = (F::one() - m.iter().copied().sum::<F>()).max(F::zero());
            let n = m.len();
            (m, vec![F::zero(); n], tail)
        }
        RowEstimator::MonteCarlo { walks, seed, walk } => {
            let est = estimate_harmonic_measure(graph, p, mesh, *walks, *seed, walk)
                .map_err(crate::harmonic::HarmonicError::from)?;
            (est.masses, est.standard_errors, est.tail)
        }
    };
    let floor = F::lit(WEIGHT_FLOOR);
    let weights = mesh.weights();
    let flagged: Vec<usize> = (0..weights.len()).filter(|&j| weights[j] <= floor).collect();
    let ratio = |x: F, w: F| if w <= floor { F::zero() } else { x / w };
    Ok(KernelRow {
        point: p.to_vec(),
        values: masses.iter().zip(weights).map(|(&m, &w)| ratio(m, w)).collect(),
        standard_errors: errors.iter().zip(weights).map(|(&s, &w)| ratio(s, w)).collect(),
        masses,
        flagged,
        tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MeshSpec;
    use crate::harmonic::{halfspace_kernel, WalkConfig};

    #[test]
    fn flat_row_is_the_oracle_ratio() {
        let g = LipschitzGraph::<f64>::flat(2);
        let mesh = BoundaryMesh::flat_exact(&MeshSpec::uniform(4.0, 0.05), 1.0).unwrap();
        let row = martin_kernel_row(&g, &mesh, &[0.3, 0.5], &RowEstimator::Oracle).unwrap();
        for j in [10usize, 80, 100] {
            let xi = &mesh.node(j)[..1];
            let density = halfspace_kernel(2, 0.5, &[0.3], xi) / halfspace_kernel(2, 1.0, &[0.0], xi);
            assert!((row.values[j] / density - 1.0).abs() < 2e-3, "{j}");
        }
        assert!((row.integral(mesh.weights()) + row.tail - 1.0).abs() < 1e-12);
    }

    #[test]
    fn row_at_the_pole_is_all_ones() {
        let g = LipschitzGraph::<f64>::flat(2);
        let mesh = BoundaryMesh::flat_exact(&MeshSpec::uniform(4.0, 0.1), 1.0).unwrap();
        let row = martin_kernel_row(&g, &mesh, &[0.0, 1.0], &RowEstimator::Oracle).unwrap();
        assert!(row.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn monte_carlo_row_agrees_with_oracle_within_noise() {
        let g = LipschitzGraph::<f64>::flat(2);
        let mesh = BoundaryMesh::flat_exact(&MeshSpec::uniform(3.0, 0.5), 1.0).unwrap();
        let exact = martin_kernel_row(&g, &mesh, &[0.0, 0.7], &RowEstimator::Oracle).unwrap();
        let est = RowEstimator::MonteCarlo { walks: 40_000, seed: 9, walk: WalkConfig::default() };
        let mc = martin_kernel_row(&g, &mesh, &[0.0, 0.7], &est).unwrap();
        for j in 0..mesh.len() {
            let se = mc.standard_errors[j].max(1e-12);
            assert!((mc.values[j] - exact.values[j]).abs() < 4.5 * se, "{j}");
        }
    }
}
