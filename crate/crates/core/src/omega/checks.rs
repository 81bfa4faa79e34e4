//! Property checks of `ω_Δ` and `Ω_Δ` with fitted constants.

use serde::{Deserialize, Serialize};

use super::{omega_apply, omega_composed, OmegaConfig, OmegaError};
use crate::kernels::{k_kernel, DiscreteKernel, KernelError, KernelFamily, Perturbation};
use crate::partitions::{doubling_decomposition, Exact, Segment};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityScan {
    pub segments: Vec<(f64, f64)>,
    pub epsilons: Vec<f64>,
    /// Minimum entry of `ω_Δ` over all tested segments, per ε.
    pub min_entries: Vec<f64>,
    /// Largest grid ε such that it and every smaller grid value give positive kernels.
    pub epsilon_hat: Option<f64>,
    /// Whether the minimum entry is non-increasing in ε on the grid.
    pub monotone: bool,
}

/// Scans ε over the configured grid; each `ω_Δ` (`|Δ| >= m(Δ)`) is composed from its
/// doubling decomposition. Increments grow linearly in ε, so grid values above the
/// configured ε use a proportionally larger Cauchy tolerance.
pub fn positivity_scan<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    segments: &[Segment<Q>],
    cfg: &OmegaConfig,
    rows: Option<&[usize]>,
) -> Result<PositivityScan, OmegaError> {
    let mut epsilons = cfg.epsilon_grid.clone();
    epsilons.sort_by(f64::total_cmp);
    let mut min_entries = Vec::with_capacity(epsilons.len());
    for &eps in &epsilons {
        let mut c = cfg.with_epsilon(eps);
        if cfg.epsilon > 0.0 {
            c.tolerance *= (eps / cfg.epsilon).max(1.0);
        }
        let mut min = f64::INFINITY;
        for seg in segments {
            let kernel = omega_composed(pert, &doubling_decomposition(seg)?, &c, rows)?;
            min = min.min(kernel.min_entry().as_f64());
        }
        min_entries.push(min);
    }
    let positive = min_entries.iter().take_while(|&&m| m > 0.0).count();
    Ok(PositivityScan {
        segments: segments.iter().map(Segment::to_f64).collect(),
        epsilon_hat: positive.checked_sub(1).map(|k| epsilons[k]),
        monotone: min_entries.windows(2).all(|w| w[1] <= w[0]),
        epsilons,
        min_entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    pub y: f64,
    pub segment: (f64, f64),
    /// `max_x |Ω_Δψ − ψ|/ψ · y/|Δ|`.
    pub constant: f64,
    /// `exp(−4c|Δ|/y) ψ <= Ω_Δψ` at every node with the fitted `c`.
    pub lower_envelope: bool,
    /// `Ω_Δψ <= exp(2c|Δ|/y) ψ` at every node.
    pub upper_envelope: bool,
    pub final_depth: u32,
}

/// Fits the constant of `|Ω_Δψ − ψ| <= c (|Δ|/y) ψ` for `Δ ⊂ (0, y]` and checks the
/// exponential envelopes with it.
pub fn phi_property_check<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    psi: &[F],
    y: f64,
    segment: &Segment<Q>,
    cfg: &OmegaConfig,
) -> Result<PhiReport, OmegaError> {
    let (a, b) = segment.to_f64();
    if !(a > 0.0 && b <= y) {
        return Err(KernelError::InvalidSegment(a, b).into());
    }
    let min = psi.iter().map(|v| v.as_f64()).fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(OmegaError::NonPositivePsi(min));
    }
    let (out, rep) = omega_apply(pert, segment, cfg, psi)?;
    let r = (b - a) / y;
    let rel: Vec<f64> = out.iter().zip(psi).map(|(o, p)| o.as_f64() / p.as_f64()).collect();
    let constant = rel.iter().map(|q| (q - 1.0).abs()).fold(0.0, f64::max) / r;
    Ok(PhiReport {
        y,
        segment: (a, b),
        constant,
        lower_envelope: rel.iter().all(|&q| q >= (-4.0 * constant * r).exp()),
        upper_envelope: rel.iter().all(|&q| q <= (2.0 * constant * r).exp()),
        final_depth: rep.final_depth,
    })
}

/// `max_x (Ω_η φ_y)(x) / (Ω_y φ_y)(x)` with `Ω_t = Ω_{[t, 1]}`, for `η < y <= 1/2`.
pub fn very_important_constant<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    phi_y: &[F],
    eta: Q,
    y: Q,
    cfg: &OmegaConfig,
) -> Result<f64, OmegaError> {
    let one = Q::one();
    let low = omega_apply(pert, &Segment::new(eta, one.clone())?, cfg, phi_y)?.0;
    let high = omega_apply(pert, &Segment::new(y, one)?, cfg, phi_y)?.0;
    Ok(low.iter().zip(&high).map(|(a, b)| a.as_f64() / b.as_f64()).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub epsilon: f64,
    pub ys: Vec<f64>,
    /// Extremes of `log(ω_y/k_{1−y}) / log y` over entries, per `y`.
    pub min_exponents: Vec<f64>,
    pub max_exponents: Vec<f64>,
    /// `max |exponent| / ε`.
    pub fitted_constant: f64,
}

/// Compares `ω_y = ω_{[y,1]}` with `k_{1−y}` entrywise through `log(ω_y/k_{1−y})/log y`.
pub fn omega_vs_k_envelope<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    ys: &[Q],
    cfg: &OmegaConfig,
    rows: Option<&[usize]>,
) -> Result<EnvelopeReport, OmegaError> {
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for y in ys {
        let seg = Segment::new(y.clone(), Q::one())?;
        let omega = omega_composed(pert, &doubling_decomposition(&seg)?, cfg, rows)?;
        let yf = y.to_f64();
        let min = omega.min_entry().as_f64();
        if !(min > 0.0) {
            return Err(OmegaError::NonPositiveOmega { y: yf, min });
        }
        let k = k_kernel(pert.family(), F::lit(1.0 - yf), rows)?;
        let exps: Vec<f64> =
            omega.values.iter().zip(&k.values).map(|(w, kv)| (w.as_f64() / kv.as_f64()).ln() / yf.ln()).collect();
        lo.push(exps.iter().copied().fold(f64::INFINITY, f64::min));
        hi.push(exps.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let worst = lo.iter().chain(&hi).map(|v| v.abs()).fold(0.0, f64::max);
    Ok(EnvelopeReport {
        epsilon: cfg.epsilon,
        ys: ys.iter().map(Exact::to_f64).collect(),
        min_exponents: lo,
        max_exponents: hi,
        fitted_constant: if cfg.epsilon > 0.0 { worst / cfg.epsilon } else { f64::NAN },
    })
}

/// Fitted `c` in `|Π^μ| <= k_{|Δ|} + c ε k_{m(Δ)}`; zero when the bound holds with `c = 0`.
pub fn pi_bound_constant<F: Scalar>(
    pi: &DiscreteKernel<F>,
    k_length: &DiscreteKernel<F>,
    k_min: &DiscreteKernel<F>,
    epsilon: f64,
) -> Result<f64, KernelError> {
    if pi.values.len() != k_length.values.len() || pi.values.len() != k_min.values.len() {
        return Err(KernelError::ShapeMismatch { expected: k_length.values.len(), got: pi.values.len() });
    }
    Ok(pi
        .values
        .iter()
        .zip(&k_length.values)
        .zip(&k_min.values)
        .map(|((p, kl), km)| ((p.abs() - *kl).as_f64() / (epsilon * km.as_f64())).max(0.0))
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeReport {
    pub node: usize,
    pub y1: f64,
    pub y2: f64,
    pub step: f64,
    pub f_y1: f64,
    pub f_y2: f64,
    /// Trapezoid value of `∫_{y1}^{y2} ε (Ω_t B_t φ_t)(x) dt`.
    pub integral: f64,
    pub residual: f64,
    /// Largest difference quotient of `f^x` on the grid over `[y1, 1]`.
    pub lipschitz: f64,
}

/// Residual of `f^x(y2) − f^x(y1) = ∫_{y1}^{y2} ε (Ω_t B_t φ_t)(x) dt`, with
/// `f^x(t) = (Ω_t φ_t)(x)` and `φ_t` the trace of the field at height `t`.
///
/// The row `e_xᵀ Ω_{[t,1]}` is propagated down a uniform grid of step `1/steps_per_unit`
/// with one `ω̃` factor per step, so `Ω_t` is the partition kernel of that grid.
pub fn ode_residual<F: Scalar, K: KernelFamily<F> + ?Sized>(
    pert: &Perturbation<'_, F, K>,
    node: usize,
    (y1, y2): (f64, f64),
    steps_per_unit: usize,
    cfg: &OmegaConfig,
) -> Result<OdeReport, OmegaError> {
    cfg.validate()?;
    let n = pert.family().len();
    if node >= n {
        return Err(KernelError::ShapeMismatch { expected: n, got: node }.into());
    }
    if !(y1 > 0.0 && y1 <= y2 && y2 <= 1.0) || steps_per_unit == 0 {
        return Err(KernelError::InvalidSegment(y1, y2).into());
    }
    let h = 1.0 / steps_per_unit as f64;
    let count = ((1.0 - y1) / h).round() as usize;
    let i2 = ((y2 - y1) / h).round() as usize;
    if (y1 + count as f64 * h - 1.0).abs() > 1e-12 || (y1 + i2 as f64 * h - y2).abs() > 1e-12 {
        return Err(OmegaError::InvalidConfig("y1 and y2 must lie on the height grid".into()));
    }
    let t = |i: usize| if i == count { 1.0 } else { y1 + i as f64 * h };
    let eps = F::lit(cfg.epsilon);
    let dot = |a: &[F], b: &[F]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<F>().as_f64();
    let mut row = vec![F::zero(); n];
    row[node] = F::one();
    let (mut f, mut g) = (vec![0.0; count + 1], vec![0.0; count + 1]);
    for i in (0..=count).rev() {
        if i < count {
            row = pert.adjoint_omega_tilde((F::lit(t(i)), F::lit(t(i + 1))), eps, cfg.quad_points, &row);
        }
        let trace = pert.trace(F::lit(t(i)));
        f[i] = dot(&row, &trace);
        if i <= i2 {
            g[i] = cfg.epsilon * dot(&row, &pert.apply_b(F::lit(t(i)), &trace));
        }
    }
    let integral: f64 = (0..i2).map(|i| (g[i] + g[i + 1]) * h / 2.0).sum();
    let lipschitz = f.windows(2).map(|w| (w[1] - w[0]).abs() / h).fold(0.0, f64::max);
    Ok(OdeReport {
        node,
        y1,
        y2,
        step: h,
        f_y1: f[0],
        f_y2: f[i2],
        integral,
        residual: (f[i2] - f[0] - integral).abs(),
        lipschitz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryMesh;
    use crate::kernels::SpectralFamily;
    use num_rational::Ratio;

    type Q = Ratio<i128>;

    fn setup(n: usize) -> SpectralFamily<f64> {
        SpectralFamily::new(BoundaryMesh::periodic(2, 8.0, n, 1.0).unwrap()).unwrap()
    }

    fn bump(fam: &SpectralFamily<f64>) -> Vec<f64> {
        fam.mesh().nodes().iter().map(|p| (1.0 - (p[0] / 0.7).powi(2)).max(0.0) + 0.2).collect()
    }

    fn quick() -> OmegaConfig {
        OmegaConfig { tolerance: 1e-3, min_depth: 3, max_depth: 9, ..OmegaConfig::default() }
    }

    #[test]
    fn ode_trivial_cases() {
        let fam = setup(32);
        let pert = Perturbation::new(&fam, bump(&fam)).unwrap();
        let same = ode_residual(&pert, 16, (0.5, 0.5), 16, &quick()).unwrap();
        assert_eq!(same.residual, 0.0);
        // ε = 0: f^x(t) = (K_{1−t} K_t φ)(x) is constant in t.
        let flat = ode_residual(&pert, 16, (0.5, 0.75), 16, &quick().with_epsilon(0.0)).unwrap();
        assert!(flat.residual < 1e-12 && flat.lipschitz < 1e-10);
        assert!(ode_residual(&pert, 16, (0.5, 0.7), 16, &quick()).is_err());
    }

    #[test]
    fn ode_residual_shrinks_with_the_step() {
        let fam = setup(32);
        let pert = Perturbation::new(&fam, bump(&fam)).unwrap();
        let coarse = ode_residual(&pert, 16, (0.5, 0.75), 16, &quick()).unwrap();
        let fine = ode_residual(&pert, 16, (0.5, 0.75), 32, &quick()).unwrap();
        assert!(fine.residual < 0.7 * coarse.residual, "{coarse:?} {fine:?}");
    }

    #[test]
    fn phi_property_of_constant_is_zero() {
        let fam = setup(32);
        let pert = Perturbation::new(&fam, bump(&fam)).unwrap();
        let seg = Segment::<Q>::of((1, 8), (1, 4)).unwrap();
        let rep = phi_property_check(&pert, &vec![1.0; 32], 0.5, &seg, &quick()).unwrap();
        assert!(rep.constant < 1e-9);
        assert!(phi_property_check(&pert, &vec![-1.0; 32], 0.5, &seg, &quick()).is_err());
        let wide = Segment::<Q>::of((1, 4), (1, 1)).unwrap();
        assert!(phi_property_check(&pert, &vec![1.0; 32], 0.5, &wide, &quick()).is_err());
    }

    #[test]
    fn small_epsilon_envelope_is_small() {
        let fam = setup(32);
        let pert = Perturbation::new(&fam, bump(&fam)).unwrap();
        let rep = omega_vs_k_envelope(&pert, &[Q::new(1, 8)], &quick().with_epsilon(0.01), Some(&[0, 16])).unwrap();
        assert!(rep.min_exponents[0].abs() < 0.05 && rep.max_exponents[0].abs() < 0.05, "{rep:?}");
    }
}
