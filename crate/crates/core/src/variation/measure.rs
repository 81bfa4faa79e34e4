//! Measures on mesh cells: the weight `κ`, the pushed-forward densities `γ_y` and the
//! finite-height approximation of `ν_ε`.

use serde::Serialize;

use super::{variation_profile, VariationError, VariationProfile};
use crate::geometry::{surface_ball, BoundaryMesh};
use crate::kernels::{KernelFamily, Perturbation};
use crate::omega::{omega_y_vector, OmegaConfig};
use crate::partitions::Exact;
use crate::scalar::Scalar;

/// How a `κ` was chosen.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum KappaChoice {
    /// `ω^p` with `p` at `height` above node `node`.
    ExitFromAbove {
        node: usize,
        height: f64,
    },
    PointMass {
        node: usize,
    },
    /// Normalized surface measure on a ball.
    UniformBall {
        center: Vec<f64>,
        radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum MeasureProvenance {
    Kappa(KappaChoice),
    /// `γ_y · ω^{z0}`.
    Gamma {
        y: f64,
    },
    /// `γ_{y_min} · ω^{z0}` standing in for `ν_ε`.
    Nu {
        y_min: f64,
        epsilon: f64,
    },
}

/// Nonnegative mass per mesh cell.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct MeasureOnMesh<F: Scalar> {
    pub weights: Vec<F>,
    pub total: F,
    pub provenance: MeasureProvenance,
}

impl<F: Scalar> MeasureOnMesh<F> {
    pub fn new(weights: Vec<F>, provenance: MeasureProvenance) -> Result<Self, VariationError> {
        if let Some((cell, &m)) = weights.iter().enumerate().find(|(_, m)| !(**m >= F::zero())) {
            return Err(VariationError::NonPositive { cell, mass: m.as_f64() });
        }
        let total = weights.iter().copied().sum();
        Ok(MeasureOnMesh { weights, total, provenance })
    }

    /// `∫ f dμ` for nodal `f`.
    pub fn integrate(&self, f: &[F]) -> F {
        self.weights.iter().zip(f).map(|(&m, &v)| m * v).sum()
    }

    /// Density against the mesh weights `ω^{z0}`; zero on cells without weight.
    pub fn density(&self, mesh: &BoundaryMesh<F>) -> Vec<F> {
        self.weights.iter().zip(mesh.weights()).map(|(&m, &w)| if w > F::zero() { m / w } else { F::zero() }).collect()
    }

    /// `μ(B(center, radius) ∩ S)` over the nodes of the ball.
    pub fn ball_mass(&self, mesh: &BoundaryMesh<F>, center: &[F], radius: F) -> Result<F, VariationError> {
        Ok(surface_ball(mesh, center, radius)?.into_iter().map(|i| self.weights[i]).sum())
    }
}

/// `κ = ω^{(x_node)_height}`; `height = y − 1` for the anchor height `y` gives the choice
/// `ω^{z_y − e_d}`.
pub fn kappa_exit<F: Scalar, K: KernelFamily<F> + ?Sized>(
    family: &K,
    node: usize,
    height: F,
) -> Result<MeasureOnMesh<F>, VariationError> {
    let n = family.len();
    if node >= n {
        return Err(VariationError::ShapeMismatch { expected: n, got: node + 1 });
    }
    let mut e = vec![F::zero(); n];
    e[node] = F::one();
    let row = family.adjoint_k(height, &e);
    let row = row.into_iter().map(|v| v.max(F::zero())).collect();
    MeasureOnMesh::new(row, MeasureProvenance::Kappa(KappaChoice::ExitFromAbove { node, height: height.as_f64() }))
}

pub fn kappa_point<F: Scalar>(len: usize, node: usize) -> Result<MeasureOnMesh<F>, VariationError> {
    if node >= len {
        return Err(VariationError::ShapeMismatch { expected: len, got: node + 1 });
    }
    let mut w = vec![F::zero(); len];
    w[node] = F::one();
    MeasureOnMesh::new(w, MeasureProvenance::Kappa(KappaChoice::PointMass { node }))
}

pub fn kappa_uniform_ball<F: Scalar>(
    mesh: &BoundaryMesh<F>,
    center: &[F],
    radius: F,
) -> Result<MeasureOnMesh<F>, VariationError> {
    let ball = surface_ball(mesh, center, radius)?;
    let volumes = mesh.cell_volumes();
    let total: F = ball.iter().map(|&i| volumes[i]).sum();
    let mut w = vec![F::zero(); mesh.len()];
    for i in ball {
        w[i] = volumes[i] / total;
    }
    let choice =
        KappaChoice::UniformBall { center: center.iter().map(|c| c.as_f64()).collect(), radius: radius.as_f64() };
    MeasureOnMesh::new(w, MeasureProvenance::Kappa(choice))
}

/// `γ_y · ω^{z0} = κᵀ Ω_{[y,1]}`, for `y <= 1/2`.
pub fn gamma_density<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    kappa: &MeasureOnMesh<F>,
    y: &Q,
    cfg: &OmegaConfig,
) -> Result<MeasureOnMesh<F>, VariationError> {
    let w = omega_y_vector(pert, y, cfg, &kappa.weights, true, |_, _| {})?;
    MeasureOnMesh::new(w, MeasureProvenance::Gamma { y: y.to_f64() })
}

/// Gaussian bumps `exp(−|x − c_k|² / 2w²)` with centers evenly spaced along the first axis
/// over `center ± spread`.
pub fn gaussian_tests<F: Scalar>(
    mesh: &BoundaryMesh<F>,
    count: usize,
    center: &[F],
    spread: F,
    width: F,
) -> Vec<Vec<F>> {
    (0..count)
        .map(|k| {
            let mut c = center.to_vec();
            let t = if count > 1 { F::of_usize(k) / F::of_usize(count - 1) } else { F::lit(0.5) };
            c[0] = c[0] - spread + F::lit(2.0) * spread * t;
            mesh.nodes()
                .iter()
                .map(|x| {
                    let r = mesh.boundary_distance(x, &c);
                    (-(r * r) / (F::lit(2.0) * width * width)).exp()
                })
                .collect()
        })
        .collect()
}

/// Stability record of the `ν_ε` approximation.
#[derive(Clone, Debug, Serialize)]
pub struct NuReport {
    pub epsilon: f64,
    /// Heights `2^{-k}`, `k = 1..=levels`.
    pub ys: Vec<f64>,
    pub totals: Vec<f64>,
    /// Test integrals per height.
    pub integrals: Vec<Vec<f64>>,
    /// `max_α |I_k(α) − I_{k−1}(α)|` for consecutive heights.
    pub increments: Vec<f64>,
    /// Last increment; the agreement tolerance of the second sequence.
    pub tolerance: f64,
    /// Endpoint `3^{-j}` of the second sequence, the first power below `2^{-levels}`.
    pub alt_y: f64,
    pub alt_integrals: Vec<f64>,
    pub alt_total: f64,
    /// `max_α |I(2^{-levels}) − I(3^{-j})|`.
    pub alt_gap: f64,
    pub sequences_agree: bool,
}

/// `ν_ε ≈ γ_{y_min} · ω^{z0}` at `y_min = 2^{-levels}`. The test integrals `∫ α dγ_y` are
/// followed along `2^{-k}`; the final increment must be below `cauchy_tolerance`, and the
/// endpoint of the sequence `3^{-j}` must agree within twice the final increment.
pub fn nu_approx<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    kappa: &MeasureOnMesh<F>,
    levels: u32,
    tests: &[Vec<F>],
    cauchy_tolerance: f64,
    cfg: &OmegaConfig,
) -> Result<(MeasureOnMesh<F>, NuReport), VariationError> {
    if levels < 2 {
        return Err(VariationError::InvalidArgument(format!("need at least 2 levels, got {levels}")));
    }
    if tests.is_empty() {
        return Err(VariationError::InvalidArgument("no test functions".into()));
    }
    let n = pert.family().len();
    if let Some(t) = tests.iter().find(|t| t.len() != n) {
        return Err(VariationError::ShapeMismatch { expected: n, got: t.len() });
    }
    let integrals_of = |w: &[F]| -> Vec<f64> {
        tests.iter().map(|t| t.iter().zip(w).map(|(&a, &m)| a * m).sum::<F>().as_f64()).collect()
    };
    let mut ys = Vec::new();
    let mut totals = Vec::new();
    let mut integrals = Vec::new();
    let y_min = Q::ratio(1, 1i64 << levels);
    let last = omega_y_vector(pert, &y_min, cfg, &kappa.weights, true, |y, w| {
        ys.push(y.to_f64());
        totals.push(w.iter().copied().sum::<F>().as_f64());
        integrals.push(integrals_of(w));
    })?;
    let increments: Vec<f64> =
        integrals.windows(2).map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).collect();
    let tolerance = *increments.last().unwrap_or(&f64::INFINITY);
    if !(tolerance <= cauchy_tolerance) {
        return Err(VariationError::NotCauchy { increment: tolerance, tolerance: cauchy_tolerance });
    }

    let mut j = 1u32;
    while 3f64.powi(j as i32) < f64::powi(2.0, levels as i32) {
        j += 1;
    }
    let alt_y = Q::ratio(1, 3i64.pow(j));
    let alt = omega_y_vector(pert, &alt_y, cfg, &kappa.weights, true, |_, _| {})?;
    let alt_integrals = integrals_of(&alt);
    let alt_gap = integrals
        .last()
        .map(|i| i.iter().zip(&alt_integrals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY);
    let report = NuReport {
        epsilon: cfg.epsilon,
        ys,
        totals,
        integrals,
        increments,
        tolerance,
        alt_y: alt_y.to_f64(),
        alt_integrals,
        alt_total: alt.iter().copied().sum::<F>().as_f64(),
        alt_gap,
        sequences_agree: alt_gap <= 2.0 * tolerance,
    };
    let nu = MeasureOnMesh::new(last, MeasureProvenance::Nu { y_min: y_min.to_f64(), epsilon: cfg.epsilon })?;
    Ok((nu, report))
}

/// Both sides of `∫ V dν_ε ≤ (c/ε) ∫ u_1 dκ` and the constant `c = ε · lhs / rhs`.
#[derive(Clone, Debug, Serialize)]
pub struct BudgetReport {
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub fitted_constant: f64,
}

pub fn budget_check<F: Scalar, K: KernelFamily<F> + ?Sized>(
    pert: &Perturbation<'_, F, K>,
    kappa: &MeasureOnMesh<F>,
    nu: &MeasureOnMesh<F>,
    profile: &VariationProfile<F>,
    epsilon: f64,
) -> Result<BudgetReport, VariationError> {
    let n = pert.family().len();
    for len in [kappa.weights.len(), nu.weights.len(), profile.values.len()] {
        if len != n {
            return Err(VariationError::ShapeMismatch { expected: n, got: len });
        }
    }
    let lhs = nu.integrate(&profile.values).as_f64();
    let rhs = kappa.integrate(&pert.trace(F::one())).as_f64();
    let fitted_constant = if rhs > 0.0 { epsilon * lhs / rhs } else { f64::INFINITY };
    Ok(BudgetReport { epsilon, lhs, rhs, fitted_constant })
}

/// `J(δ) = ∫ V_δ dν` for each cut, with `cells_per_octave` height cells per halving of `δ`.
pub fn budget_curve<F: Scalar, K: KernelFamily<F> + ?Sized>(
    pert: &Perturbation<'_, F, K>,
    nu: &MeasureOnMesh<F>,
    deltas: &[F],
    cells_per_octave: usize,
) -> Result<Vec<(f64, f64)>, VariationError> {
    deltas
        .iter()
        .map(|&delta| {
            let octaves = (-delta.log2()).as_f64().ceil().max(1.0) as usize;
            let cells = (octaves * cells_per_octave).next_multiple_of(2);
            let profile = variation_profile(pert, delta, cells)?;
            Ok((delta.as_f64(), nu.integrate(&profile.values).as_f64()))
        })
        .collect()
}
