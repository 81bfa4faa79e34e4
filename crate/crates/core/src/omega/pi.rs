//! `Π^μ` by row propagation and the refinement driver towards `ω_Δ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OmegaConfig, OmegaError};
use crate::kernels::{compose, DiscreteKernel, KernelError, KernelFamily, KernelKind, KernelLabel, Perturbation};
use crate::partitions::{doubling_decomposition, joint_lambda_refinement, make_dyadic, Exact, Partition, Segment};
use crate::scalar::Scalar;

fn pieces_of<F: Scalar, Q: Exact>(partition: &Partition<Q>) -> Vec<(F, F)> {
    partition.to_f64().into_iter().map(|(a, b)| (F::lit(a), F::lit(b))).collect()
}

fn resolve_rows(n: usize, rows: Option<&[usize]>) -> Result<Vec<usize>, KernelError> {
    match rows {
        None => Ok((0..n).collect()),
        Some(r) => match r.iter().find(|&&i| i >= n) {
            Some(&bad) => Err(KernelError::ShapeMismatch { expected: n, got: bad }),
            None => Ok(r.to_vec()),
        },
    }
}

/// Replaces every row vector `m` of `block` with `mᵀ Π^μ`, walking the pieces from the top.
///
/// The first row of each sweep runs alone so that per-height caches of the family are
/// filled once before the parallel rows read them.
pub fn propagate_rows<F: Scalar, K: KernelFamily<F> + ?Sized>(
    pert: &Perturbation<'_, F, K>,
    pieces: &[(F, F)],
    epsilon: F,
    quad_points: usize,
    block: &mut [Vec<F>],
) {
    for &piece in pieces.iter().rev() {
        if let Some((first, rest)) = block.split_first_mut() {
            *first = pert.adjoint_omega_tilde(piece, epsilon, quad_points, first);
            rest.par_iter_mut().for_each(|m| *m = pert.adjoint_omega_tilde(piece, epsilon, quad_points, m));
        }
    }
}

/// `Π^μ = ω̃_{j_K} ∘ ⋯ ∘ ω̃_{j_1}` on the requested rows.
pub fn iterate_pi<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    partition: &Partition<Q>,
    cfg: &OmegaConfig,
    rows: Option<&[usize]>,
) -> Result<DiscreteKernel<F>, OmegaError> {
    cfg.validate()?;
    let family = pert.family();
    let n = family.len();
    let rows = resolve_rows(n, rows)?;
    let mut block: Vec<Vec<F>> = rows
        .iter()
        .map(|&i| {
            let mut e = vec![F::zero(); n];
            e[i] = F::one();
            e
        })
        .collect();
    propagate_rows(pert, &pieces_of(partition), F::lit(cfg.epsilon), cfg.quad_points, &mut block);
    let label = KernelLabel::Partition { segment: partition.span().to_f64(), pieces: partition.len() };
    let kernel = DiscreteKernel::from_measure_form(
        KernelKind::Pi,
        label,
        family.provenance(),
        rows,
        block.concat(),
        family.mesh().weights().to_vec(),
    )?;
    Ok(kernel.with_epsilon(cfg.epsilon))
}

/// Refinement history of `Π^{d_n(Δ)}` and checks of the limit kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub segment: (f64, f64),
    pub epsilon: f64,
    pub tolerance: f64,
    /// `depths[k]` is the `n` of `increments[k] = ‖Π^{d_n} − Π^{d_{n−1}}‖_max`.
    pub depths: Vec<u32>,
    pub increments: Vec<f64>,
    /// `sup_j |j| = |Δ| 2^{−n}` at each depth.
    pub mesh_sizes: Vec<f64>,
    /// Consecutive increment ratios.
    pub ratios: Vec<f64>,
    /// Geometric rate fitted to the increments beyond depth 3.
    pub rate: f64,
    /// Log-log slope of the increments against the mesh size beyond depth 3.
    pub mesh_slope: f64,
    pub final_depth: u32,
    /// `max_x |∫ ω_Δ(x, ·) dω^{z0} − 1|`.
    pub mean_one_residual: f64,
    pub min_entry: f64,
    /// `sup_x Σ_j |ω_Δ(x, ξ_j)| w_j`.
    pub l1_row_norm: f64,
    /// Max-norm distance to `Π^{τ}` for the λ = 2 joint refinement `τ` of `d_n(Δ)` and the
    /// thirds of `Δ`, when requested.
    pub independence: Option<f64>,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Partition of `Δ` into three equal pieces.
fn thirds<Q: Exact>(segment: &Segment<Q>) -> Partition<Q> {
    let step = segment.length() / Q::integer(3);
    let a = segment.min().clone();
    Partition::from_breakpoints(&[a.clone(), a.clone() + step.clone(), a + step * Q::integer(2), segment.max().clone()])
        .expect("thirds increase")
}

/// `ω_Δ` as the Richardson extrapolation `2Π^{d_n} − Π^{d_{n−1}}` at the first depth
/// `n >= min_depth` whose increment is below the tolerance; the increments decay like
/// `|Δ| 2^{−n}`, so the extrapolation removes the leading error term.
pub fn omega_segment<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    segment: &Segment<Q>,
    cfg: &OmegaConfig,
    rows: Option<&[usize]>,
    check_independence: bool,
) -> Result<(DiscreteKernel<F>, ConvergenceReport), OmegaError> {
    cfg.validate()?;
    let length = segment.length().to_f64();
    let mut prev = iterate_pi(pert, &make_dyadic(segment, 0), cfg, rows)?;
    let (mut depths, mut increments, mut mesh_sizes) = (Vec::new(), Vec::new(), Vec::new());
    let mut done = None;
    for n in 1..=cfg.depth_cap() {
        let cur = iterate_pi(pert, &make_dyadic(segment, n), cfg, rows)?;
        let inc = cur.max_abs_diff(&prev)?.as_f64();
        depths.push(n);
        increments.push(inc);
        mesh_sizes.push(length / f64::powi(2.0, n as i32));
        if cfg.stops(n, inc, cfg.tolerance) {
            done = Some((n, cur));
            break;
        }
        prev = cur;
    }
    let (final_depth, cur) = done.ok_or(OmegaError::NoConvergence {
        depth: cfg.depth_cap(),
        increment: *increments.last().unwrap_or(&f64::NAN),
        tolerance: cfg.tolerance,
    })?;
    let mut omega = cur.combine(F::lit(2.0), &prev, -F::one(), KernelKind::Omega)?;
    omega.label = KernelLabel::Segment(segment.to_f64().0, segment.to_f64().1);
    omega.epsilon = Some(cfg.epsilon);
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let tail: Vec<usize> = (0..depths.len()).filter(|&k| depths[k] > 3).collect();
    let log_inc: Vec<f64> = tail.iter().map(|&k| increments[k].ln()).collect();
    let rate = slope(&tail.iter().map(|&k| depths[k] as f64).collect::<Vec<_>>(), &log_inc).exp();
    let mesh_slope = slope(&tail.iter().map(|&k| mesh_sizes[k].ln()).collect::<Vec<_>>(), &log_inc);
    let independence = if check_independence {
        let tau = joint_lambda_refinement(&make_dyadic(segment, final_depth), &thirds(segment), &Q::integer(2))?;
        Some(iterate_pi(pert, &tau, cfg, rows)?.max_abs_diff(&omega)?.as_f64())
    } else {
        None
    };
    let report = ConvergenceReport {
        segment: segment.to_f64(),
        epsilon: cfg.epsilon,
        tolerance: cfg.tolerance,
        depths,
        increments,
        mesh_sizes,
        ratios,
        rate,
        mesh_slope,
        final_depth,
        mean_one_residual: omega.row_integrals().iter().map(|v| (v.as_f64() - 1.0).abs()).fold(0.0, f64::max),
        min_entry: omega.min_entry().as_f64(),
        l1_row_norm: omega.l1_row_norm().as_f64(),
        independence,
    };
    Ok((omega, report))
}

/// `ω_{𝒰(μ)} = ω_{j_K} ∘ ⋯ ∘ ω_{j_1}` from the limit kernels of the pieces of `μ`.
pub fn omega_composed<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    partition: &Partition<Q>,
    cfg: &OmegaConfig,
    rows: Option<&[usize]>,
) -> Result<DiscreteKernel<F>, OmegaError> {
    let pieces = partition.pieces();
    let (top, lower) = pieces.split_last().expect("partitions are nonempty");
    let mut acc = omega_segment(pert, top, cfg, rows, false)?.0;
    for piece in lower.iter().rev() {
        let full = omega_segment(pert, piece, cfg, None, false)?.0;
        acc = compose(&acc, &full)?;
    }
    acc.kind = KernelKind::Omega;
    acc.label = KernelLabel::Partition { segment: partition.span().to_f64(), pieces: partition.len() };
    acc.epsilon = Some(cfg.epsilon);
    acc.provenance = pert.family().provenance();
    Ok(acc)
}

/// Refinement history of `Ω_Δ f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub increments: Vec<f64>,
    pub final_depth: u32,
}

/// `Ω_Δ f` (or `mᵀ Ω_Δ` when `transpose`) by the same driver as [`omega_segment`]; the
/// tolerance is relative to `max |v|`.
pub fn omega_vector<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    segment: &Segment<Q>,
    cfg: &OmegaConfig,
    v: &[F],
    transpose: bool,
) -> Result<(Vec<F>, ApplyReport), OmegaError> {
    cfg.validate()?;
    if v.len() != pert.family().len() {
        return Err(KernelError::ShapeMismatch { expected: pert.family().len(), got: v.len() }.into());
    }
    let eps = F::lit(cfg.epsilon);
    let scale = v.iter().map(|x| x.abs().as_f64()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let run = |n: u32| {
        let pieces = pieces_of(&make_dyadic(segment, n));
        if transpose {
            pert.adjoint_pi(&pieces, eps, cfg.quad_points, v)
        } else {
            pert.apply_pi(&pieces, eps, cfg.quad_points, v)
        }
    };
    let mut prev = run(0);
    let mut increments = Vec::new();
    for n in 1..=cfg.depth_cap() {
        let cur = run(n);
        let inc = cur.iter().zip(&prev).map(|(a, b)| (*a - *b).abs().as_f64()).fold(0.0, f64::max) / scale;
        increments.push(inc);
        if cfg.stops(n, inc, cfg.tolerance) {
            let out = cur.iter().zip(&prev).map(|(&a, &b)| F::lit(2.0) * a - b).collect();
            return Ok((out, ApplyReport { increments, final_depth: n }));
        }
        prev = cur;
    }
    Err(OmegaError::NoConvergence {
        depth: cfg.depth_cap(),
        increment: *increments.last().unwrap_or(&f64::NAN),
        tolerance: cfg.tolerance,
    })
}

/// `Ω_Δ f`.
pub fn omega_apply<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    segment: &Segment<Q>,
    cfg: &OmegaConfig,
    f: &[F],
) -> Result<(Vec<F>, ApplyReport), OmegaError> {
    omega_vector(pert, segment, cfg, f, false)
}

/// `mᵀ Ω_Δ`: pushes a measure given by cell masses `m` forward through `ω_Δ`.
pub fn omega_transpose_apply<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    segment: &Segment<Q>,
    cfg: &OmegaConfig,
    m: &[F],
) -> Result<(Vec<F>, ApplyReport), OmegaError> {
    omega_vector(pert, segment, cfg, m, true)
}

/// `Ω_y = Ω_{[y,1]}` applied to `v` through the doubling decomposition of `[y, 1]`
/// (`y <= 1/2`). With `transpose`, the row is propagated from the top piece down and
/// `visit` sees it after each piece, i.e. at every lower endpoint `t` as `vᵀ Ω_t`.
pub fn omega_y_vector<F: Scalar, K: KernelFamily<F> + ?Sized, Q: Exact>(
    pert: &Perturbation<'_, F, K>,
    y: &Q,
    cfg: &OmegaConfig,
    v: &[F],
    transpose: bool,
    mut visit: impl FnMut(&Q, &[F]),
) -> Result<Vec<F>, OmegaError> {
    let seg = Segment::new(y.clone(), Q::one())?;
    let parts = doubling_decomposition(&seg)?;
    let mut out = v.to_vec();
    if transpose {
        for piece in parts.pieces().iter().rev() {
            out = omega_vector(pert, piece, cfg, &out, true)?.0;
            visit(piece.min(), &out);
        }
    } else {
        for piece in parts.pieces() {
            out = omega_vector(pert, piece, cfg, &out, false)?.0;
            visit(piece.max(), &out);
        }
    }
    Ok(out)
}
