//! `V(x) = ∫_δ^1 (B_y u_y)(x) dy` on the mesh nodes.

use serde::Serialize;

use super::VariationError;
use crate::kernels::{KernelFamily, Perturbation};
use crate::scalar::Scalar;

/// Largest relative change of `V` allowed when the height grid is halved.
pub const GRID_CHANGE_LIMIT: f64 = 0.05;

/// `V` at the nodes with the quadrature data it was computed from.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct VariationProfile<F: Scalar> {
    /// `∫ (B_y u_y)(x) dy`.
    pub values: Vec<F>,
    /// The same integral with the integrand `(K_y ‖∇u_{2y}‖)(x)`.
    pub via_kernel: Vec<F>,
    pub heights: Vec<F>,
    pub weights: Vec<F>,
    pub delta: F,
    /// `∫_δ^1 ‖∇u(x_t)‖ dt`.
    pub radial: Vec<F>,
    /// `∫_δ^1 ‖∇u(x_{3y})‖ dy`, dominated by `V`.
    pub lower_bound: Vec<F>,
    /// `max |V_n − V_{n/2}| / max V`.
    pub grid_change: f64,
    /// `max |values − via_kernel| / max V`.
    pub route_gap: f64,
    /// Absolute slack of the lower-bound comparison.
    pub tolerance: f64,
}

impl<F: Scalar> VariationProfile<F> {
    /// Smallest `V(x) − lower(x)` over the nodes.
    pub fn lower_bound_margin(&self) -> f64 {
        self.values.iter().zip(&self.lower_bound).map(|(&v, &l)| (v - l).as_f64()).fold(f64::INFINITY, f64::min)
    }
}

/// Geometric cells of `[δ, 1]`, as `(y, weight)` pairs with `y` the geometric midpoint and
/// the weight the cell length, so constants integrate exactly. The nodes crowd toward `δ`.
pub fn log_height_rule<F: Scalar>(delta: F, cells: usize) -> Vec<(F, F)> {
    let h = -delta.ln() / F::of_usize(cells);
    let edge = |i: usize| if i == cells { F::one() } else { (delta.ln() + h * F::of_usize(i)).exp() };
    (0..cells)
        .map(|i| {
            let y = (delta.ln() + h * (F::of_usize(i) + F::lit(0.5))).exp();
            (y, edge(i + 1) - edge(i))
        })
        .collect()
}

fn quadrature<F: Scalar>(rule: &[(F, F)], n: usize, integrand: impl Fn(F) -> Vec<F>) -> Vec<F> {
    let mut acc = vec![F::zero(); n];
    for &(y, w) in rule {
        for (a, v) in acc.iter_mut().zip(integrand(y)) {
            *a = *a + w * v;
        }
    }
    acc
}

fn max_abs<F: Scalar>(v: &[F]) -> f64 {
    v.iter().map(|x| x.abs().as_f64()).fold(0.0, f64::max)
}

/// Computes `V` for the field `u = K φ` of `pert` with lower cut `delta` and `cells`
/// logarithmic height cells (even, so that the halved grid is defined).
pub fn variation_profile<F: Scalar, K: KernelFamily<F> + ?Sized>(
    pert: &Perturbation<'_, F, K>,
    delta: F,
    cells: usize,
) -> Result<VariationProfile<F>, VariationError> {
    if !(delta > F::zero() && delta < F::lit(0.25)) {
        return Err(VariationError::InvalidCut(delta.as_f64()));
    }
    if cells < 2 || cells % 2 == 1 {
        return Err(VariationError::InvalidArgument(format!("height cells must be even and >= 2, got {cells}")));
    }
    let n = pert.family().len();
    let two = F::lit(2.0);
    let rule = log_height_rule(delta, cells);
    let via_b = |y: F| pert.apply_b(y, &pert.trace(y));
    let values = quadrature(&rule, n, via_b);
    let coarse = quadrature(&log_height_rule(delta, cells / 2), n, via_b);
    let via_kernel = quadrature(&rule, n, |y| pert.family().apply_k(y, &pert.gradient_norm(two * y)));
    let radial = quadrature(&rule, n, |t| pert.gradient_norm(t));
    let lower_bound = quadrature(&rule, n, |y| pert.gradient_norm(F::lit(3.0) * y));

    let scale = max_abs(&values);
    let spread = |a: &[F], b: &[F]| a.iter().zip(b).map(|(&x, &y)| (x - y).abs().as_f64()).fold(0.0, f64::max);
    let (grid_change, route_gap) =
        if scale > 0.0 { (spread(&values, &coarse) / scale, spread(&values, &via_kernel) / scale) } else { (0.0, 0.0) };
    if grid_change > GRID_CHANGE_LIMIT {
        return Err(VariationError::GridTooCoarse { change: grid_change, limit: GRID_CHANGE_LIMIT });
    }
    let tolerance = (grid_change * scale).max(1e-9 * scale.max(1.0));
    for (i, (&v, &l)) in values.iter().zip(&lower_bound).enumerate() {
        let deficit = (l - v).as_f64();
        if deficit > tolerance {
            return Err(VariationError::LowerBoundViolated { node: i, deficit });
        }
    }
    Ok(VariationProfile {
        values,
        via_kernel,
        heights: rule.iter().map(|r| r.0).collect(),
        weights: rule.iter().map(|r| r.1).collect(),
        delta,
        radial,
        lower_bound,
        grid_change,
        route_gap,
        tolerance,
    })
}
