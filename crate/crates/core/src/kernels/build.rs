//! Materializing operator actions into dense [`DiscreteKernel`]s.
//!
//! Row `i` of the measure-form matrix is `e_iᵀ M`, which is what the adjoint actions
//! compute, so kernels are built row by row (and only for the requested rows).

use rayon::prelude::*;

use super::{
    check_epsilon, check_height, check_segment, DiscreteKernel, KernelError, KernelFamily, KernelKind, KernelLabel,
    Perturbation, Provenance,
};
use crate::scalar::Scalar;

/// Largest number of midpoint cells tried by the adaptive `b_Δ` quadrature.
pub const MAX_QUADRATURE: usize = 64;

fn row_set(n: usize, rows: Option<&[usize]>) -> Result<Vec<usize>, KernelError> {
    match rows {
        None => Ok((0..n).collect()),
        Some(r) => match r.iter().find(|&&i| i >= n) {
            Some(&bad) => Err(KernelError::ShapeMismatch { expected: n, got: bad }),
            None => Ok(r.to_vec()),
        },
    }
}

/// Builds the kernel whose measure-form rows are `adjoint(e_i)` for `i ∈ rows`.
pub fn materialize_rows<F: Scalar>(
    weights: &[F],
    rows: Option<&[usize]>,
    kind: KernelKind,
    label: KernelLabel,
    provenance: Provenance,
    adjoint: impl Fn(&[F]) -> Vec<F> + Sync,
) -> Result<DiscreteKernel<F>, KernelError> {
    let n = weights.len();
    let rows = row_set(n, rows)?;
    let measure: Vec<F> = rows
        .par_iter()
        .flat_map_iter(|&i| {
            let mut e = vec![F::zero(); n];
            e[i] = F::one();
            adjoint(&e)
        })
        .collect();
    DiscreteKernel::from_measure_form(kind, label, provenance, rows, measure, weights.to_vec())
}

/// `k_y` restricted to `rows` (all rows when `None`).
pub fn k_kernel<F: Scalar, K: KernelFamily<F> + ?Sized>(
    family: &K,
    y: F,
    rows: Option<&[usize]>,
) -> Result<DiscreteKernel<F>, KernelError> {
    check_height(y.as_f64())?;
    materialize_rows(
        family.mesh().weights(),
        rows,
        KernelKind::K,
        KernelLabel::Height(y.as_f64()),
        family.provenance(),
        |m| family.adjoint_k(y, m),
    )
}

pub fn c_kernel<F: Scalar, K: KernelFamily<F> + ?Sized>(
    pert: &Perturbation<'_, F, K>,
    y: F,
    rows: Option<&[usize]>,
) -> Result<DiscreteKernel<F>, KernelError> {
    check_height(y.as_f64())?;
    let family = pert.family();
    materialize_rows(
        family.mesh().weights(),
        rows,
        KernelKind::C,
        KernelLabel::Height(y.as_f64()),
        family.provenance(),
        |m| pert.adjoint_c(y, m),
    )
}

pub fn b_kernel<F: Scalar, K: KernelFamily<F> + ?Sized>(
    pert: &Perturbation<'_, F, K>,
    y: F,
    rows: Option<&[usize]>,
) -> Result<DiscreteKernel<F>, KernelError> {
    check_height(y.as_f64())?;
    let family = pert.family();
    materialize_rows(
        family.mesh().weights(),
        rows,
        KernelKind::B,
        KernelLabel::Height(y.as_f64()),
        family.provenance(),
        |m| pert.adjoint_b(y, m),
    )
}

/// `b_Δ` with the number of midpoint cells it settled on.
#[derive(Clone, Debug)]
pub struct BSegmentBuild<F: Scalar> {
    pub kernel: DiscreteKernel<F>,
    pub points: usize,
    /// Relative max-entry change of the last doubling.
    pub change: f64,
}

/// `b_Δ` by composite midpoint quadrature, doubling from `start` cells until the relative
/// max-entry change is at most `tolerance`.
pub fn b_segment_kernel<F: Scalar, K: KernelFamily<F> + ?Sized>(
    pert: &Perturbation<'_, F, K>,
    segment: (F, F),
    start: usize,
    tolerance: f64,
    rows: Option<&[usize]>,
) -> Result<BSegmentBuild<F>, KernelError> {
    check_segment(segment.0.as_f64(), segment.1.as_f64())?;
    let family = pert.family();
    let label = KernelLabel::Segment(segment.0.as_f64(), segment.1.as_f64());
    let build = |n: usize| {
        materialize_rows(family.mesh().weights(), rows, KernelKind::BSegment, label.clone(), family.provenance(), |m| {
            pert.adjoint_b_segment(segment, n, m)
        })
    };
    let mut points = start.max(1);
    let mut current = build(points)?;
    loop {
        let next = build(2 * points)?;
        let scale = next.max_abs().as_f64().max(f64::MIN_POSITIVE);
        let change = next.max_abs_diff(&current)?.as_f64() / scale;
        points *= 2;
        if change <= tolerance {
            return Ok(BSegmentBuild { kernel: next, points, change });
        }
        if points >= MAX_QUADRATURE {
            return Err(KernelError::QuadratureUnstable { points, change, tolerance });
        }
        current = next;
    }
}

/// `ω̃_Δ = k_{|Δ|} − ε b_Δ` with a fixed number of midpoint cells.
pub fn omega_tilde_kernel<F: Scalar, K: KernelFamily<F> + ?Sized>(
    pert: &Perturbation<'_, F, K>,
    segment: (F, F),
    epsilon: F,
    points: usize,
    rows: Option<&[usize]>,
) -> Result<DiscreteKernel<F>, KernelError> {
    check_segment(segment.0.as_f64(), segment.1.as_f64())?;
    check_epsilon(epsilon.as_f64())?;
    let family = pert.family();
    let label = KernelLabel::Segment(segment.0.as_f64(), segment.1.as_f64());
    let kernel =
        materialize_rows(family.mesh().weights(), rows, KernelKind::OmegaTilde, label, family.provenance(), |m| {
            pert.adjoint_omega_tilde(segment, epsilon, points, m)
        })?;
    Ok(kernel.with_epsilon(epsilon.as_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryMesh, MeshSpec};
    use crate::kernels::{compose, CellOracleFamily, SpectralFamily};

    fn spectral(n: usize) -> SpectralFamily<f64> {
        SpectralFamily::new(BoundaryMesh::periodic(2, 8.0, n, 1.0).unwrap()).unwrap()
    }

    fn bump(fam: &dyn KernelFamily<f64>) -> Vec<f64> {
        fam.mesh().nodes().iter().map(|p| (1.0 - (p[0] / 0.7).powi(2)).max(0.0) + 0.2).collect()
    }

    #[test]
    fn rows_match_full_kernel() {
        let fam = spectral(32);
        let full = k_kernel(&fam, 0.3, None).unwrap();
        let some = k_kernel(&fam, 0.3, Some(&[3, 17])).unwrap();
        assert_eq!(some.row(1), full.row(17));
        assert!(k_kernel(&fam, 0.3, Some(&[40])).is_err());
        assert!(k_kernel(&fam, -1.0, None).is_err());
    }

    #[test]
    fn row_identities_on_the_torus() {
        let fam = spectral(64);
        let pert = Perturbation::new(&fam, bump(&fam)).unwrap();
        let k = k_kernel(&fam, 0.25, None).unwrap();
        let c = c_kernel(&pert, 0.25, None).unwrap();
        let b = b_kernel(&pert, 0.25, None).unwrap();
        for (r, ((kr, cr), br)) in k.row_integrals().iter().zip(c.row_integrals()).zip(b.row_integrals()).enumerate() {
            assert!((kr - 1.0).abs() < 1e-12, "row {r}");
            assert!(cr.abs() < 1e-12 && br.abs() < 1e-12, "row {r}: {cr} {br}");
        }
        // b_y = k_y ∘ c_y as matrices.
        let kc = compose(&k, &c).unwrap();
        assert!(kc.max_abs_diff(&b).unwrap() < 1e-10 * b.max_abs());
    }

    #[test]
    fn b_segment_is_additive_and_zero_on_ones() {
        let fam = spectral(64);
        let pert = Perturbation::new(&fam, bump(&fam)).unwrap();
        let whole = b_segment_kernel(&pert, (0.25, 0.5), 2, 1e-3, None).unwrap();
        let low = b_segment_kernel(&pert, (0.25, 0.375), 2, 1e-3, None).unwrap();
        let high = b_segment_kernel(&pert, (0.375, 0.5), 2, 1e-3, None).unwrap();
        let sum = low.kernel.combine(1.0, &high.kernel, 1.0, KernelKind::BSegment).unwrap();
        let err = sum.max_abs_diff(&whole.kernel).unwrap() / whole.kernel.max_abs();
        assert!(err < 2e-3, "additivity {err}");
        assert!(whole.kernel.row_integrals().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn omega_tilde_reduces_to_k() {
        let fam = spectral(32);
        let pert = Perturbation::new(&fam, bump(&fam)).unwrap();
        let w0 = omega_tilde_kernel(&pert, (0.25, 0.5), 0.0, 2, None).unwrap();
        let k = k_kernel(&fam, 0.25, None).unwrap();
        assert_eq!(w0.values, k.values);
        let w = omega_tilde_kernel(&pert, (0.25, 0.5), 0.1, 4, None).unwrap();
        assert!(w.row_integrals().iter().all(|v| (v - 1.0).abs() < 1e-3));
        assert!(omega_tilde_kernel(&pert, (0.25, 0.5), 1.5, 2, None).is_err());
    }

    #[test]
    fn oracle_rows_reproduce_the_operator_action() {
        let fam = CellOracleFamily::new(BoundaryMesh::flat_exact(&MeshSpec::uniform(3.0, 0.1), 1.0).unwrap()).unwrap();
        let pert = Perturbation::new(&fam, bump(&fam)).unwrap();
        let y = 0.3;
        let f: Vec<f64> = fam.mesh().nodes().iter().map(|p| (3.0 * p[0]).cos()).collect();
        let b = b_kernel(&pert, y, None).unwrap();
        let direct = pert.apply_b(y, &f);
        let via_rows = crate::kernels::apply_kernel(&b, &f).unwrap();
        for (a, v) in direct.iter().zip(&via_rows) {
            assert!((a - v).abs() < 1e-12);
        }
    }
}
