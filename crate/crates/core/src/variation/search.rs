//! Points of small variation in surface balls, and the ball-mass scaling of a measure.

use serde::Serialize;

use super::{log_height_rule, MeasureOnMesh, VariationError, VariationProfile};
use crate::geometry::{surface_ball, BoundaryMesh, LipschitzGraph};
use crate::harmonic::{harnack_envelope, run_walks, HarmonicField, WalkConfig};
use crate::scalar::Scalar;

/// Minimizer of `V` over a ball and the quantities around the bound `V(x) <= c u(x_y)`.
#[derive(Clone, Debug, Serialize)]
pub struct BourgainPoint {
    /// Index of the minimizer among the candidates (mesh node or sample).
    pub index: usize,
    pub point: Vec<f64>,
    pub variation: f64,
    /// Standard error of `variation`; zero for deterministic operators.
    pub std_error: f64,
    /// `u(x*_{y})` at the anchor height.
    pub anchor_value: f64,
    /// `V(x*) / u(x*_y)`.
    pub ratio: f64,
    /// `u(z_y) / u(x*_y)` for the ball center `z`.
    pub harnack_factor: f64,
    /// Harnack upper envelope of `u(z_y) / u(x*_y)` in the ball of radius `dist(x*_y, S)`.
    pub harnack_bound: Option<f64>,
    /// `ν`-average of `V` over the ball; the minimum cannot exceed it.
    pub nu_average: Option<f64>,
    pub candidates: usize,
}

fn horizontal_distance<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<F>().sqrt()
}

fn harnack_bound<F: Scalar>(separation: F, radius: F, dim: usize) -> Option<f64> {
    harnack_envelope(F::one(), separation, radius, dim).ok().map(|(_, hi)| hi.as_f64())
}

/// Searches the mesh nodes of `B(center, radius)` (`center` a point of `S`, all `d`
/// coordinates) for the minimum of `V`. `anchor` holds
/// `u` at height `y_anchor` above every node and `center_anchor` the value `u(z_y)`.
#[allow(clippy::too_many_arguments)]
pub fn bourgain_search<F: Scalar>(
    mesh: &BoundaryMesh<F>,
    profile: &VariationProfile<F>,
    anchor: &[F],
    center: &[F],
    center_anchor: F,
    radius: F,
    y_anchor: F,
    nu: Option<&MeasureOnMesh<F>>,
) -> Result<BourgainPoint, VariationError> {
    for len in [profile.values.len(), anchor.len()] {
        if len != mesh.len() {
            return Err(VariationError::ShapeMismatch { expected: mesh.len(), got: len });
        }
    }
    if !(y_anchor > F::one()) {
        return Err(VariationError::InvalidArgument(format!("anchor height {y_anchor} must exceed 1")));
    }
    let ball = surface_ball(mesh, center, radius)?;
    let best = *ball
        .iter()
        .min_by(|&&a, &&b| profile.values[a].partial_cmp(&profile.values[b]).unwrap_or(std::cmp::Ordering::Equal))
        .expect("surface_ball is nonempty");
    let v = profile.values[best];
    let u = anchor[best];
    let nu_average = nu.and_then(|nu| {
        let mass: F = ball.iter().map(|&i| nu.weights[i]).sum();
        let integral: F = ball.iter().map(|&i| nu.weights[i] * profile.values[i]).sum();
        (mass > F::zero()).then(|| (integral / mass).as_f64())
    });
    let separation = mesh.boundary_distance(mesh.node(best), center);
    Ok(BourgainPoint {
        index: best,
        point: mesh.node(best).iter().map(|c| c.as_f64()).collect(),
        variation: v.as_f64(),
        std_error: 0.0,
        anchor_value: u.as_f64(),
        ratio: (v / u).as_f64(),
        harnack_factor: (center_anchor / u).as_f64(),
        harnack_bound: harnack_bound(separation, y_anchor, mesh.dim()),
        nu_average,
        candidates: ball.len(),
    })
}

/// Monte Carlo estimate of `V(x) = ∫_δ^1 E‖∇u(W + 2y e_d)‖ dy`, where `W` is the exit point
/// of a walk from `x_y`; valid on any Lipschitz graph for a field with a closed-form gradient.
#[derive(Clone, Debug, Serialize)]
pub struct McVariation {
    pub point: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
    /// `∫_δ^1 ‖∇u(x_t)‖ dt`.
    pub radial: f64,
    /// `∫_δ^1 ‖∇u(x_{3y})‖ dy`.
    pub lower_bound: f64,
}

fn gradient_norm<F: Scalar>(field: &HarmonicField<F>, p: &[F]) -> Result<F, VariationError> {
    let g = field.closed_gradient(p).ok_or(VariationError::NoClosedGradient)?;
    Ok(g.iter().map(|&c| c * c).sum::<F>().sqrt())
}

fn lifted<F: Scalar>(base: &[F], height: F) -> Vec<F> {
    let mut p = base.to_vec();
    let d = p.len();
    p[d - 1] = p[d - 1] + height;
    p
}

/// `V` at the boundary point above `xbar`, with `cells` logarithmic height cells and `walks`
/// walks per height.
#[allow(clippy::too_many_arguments)]
pub fn tent_variation<F: Scalar>(
    graph: &LipschitzGraph<F>,
    field: &HarmonicField<F>,
    xbar: &[F],
    delta: F,
    cells: usize,
    walks: usize,
    seed: u64,
    walk: &WalkConfig<F>,
) -> Result<McVariation, VariationError> {
    if !(delta > F::zero() && delta < F::lit(0.25)) {
        return Err(VariationError::InvalidCut(delta.as_f64()));
    }
    if walks < 2 || cells == 0 {
        return Err(VariationError::InvalidArgument("need at least 2 walks and 1 height cell".into()));
    }
    let x = graph.lift(xbar);
    gradient_norm(field, &lifted(&x, F::one()))?;
    let (mut value, mut variance, mut radial, mut lower) = (0.0, 0.0, 0.0, 0.0);
    for (k, (y, w)) in log_height_rule(delta, cells).into_iter().enumerate() {
        let start = lifted(&x, y);
        let two_y = F::lit(2.0) * y;
        let (s1, s2) = run_walks(
            graph,
            &start,
            walks,
            seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k as u64 + 1)),
            walk,
            || (0.0f64, 0.0f64),
            |acc, hit| {
                let g = gradient_norm(field, &lifted(&hit.point, two_y)).map(|g| g.as_f64()).unwrap_or(f64::NAN);
                acc.0 += g;
                acc.1 += g * g;
            },
            |a, b| (a.0 + b.0, a.1 + b.1),
        )?;
        let n = walks as f64;
        let mean = s1 / n;
        let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
        let w = w.as_f64();
        value += w * mean;
        variance += w * w * var / n;
        radial += w * gradient_norm(field, &start)?.as_f64();
        lower += w * gradient_norm(field, &lifted(&x, F::lit(3.0) * y))?.as_f64();
    }
    if !value.is_finite() {
        return Err(VariationError::NoClosedGradient);
    }
    Ok(McVariation {
        point: x.iter().map(|c| c.as_f64()).collect(),
        value,
        std_error: variance.sqrt(),
        radial,
        lower_bound: lower,
    })
}

/// Result of [`tent_bourgain_search`]: every candidate and the minimizer.
#[derive(Clone, Debug, Serialize)]
pub struct TentSearch {
    pub candidates: Vec<McVariation>,
    pub best: BourgainPoint,
}

/// Minimizes the Monte Carlo `V` over a grid of `samples` points per horizontal axis in the
/// surface ball `B(z, radius)`, `z` the boundary point above `center`.
#[allow(clippy::too_many_arguments)]
pub fn tent_bourgain_search<F: Scalar>(
    graph: &LipschitzGraph<F>,
    field: &HarmonicField<F>,
    center: &[F],
    radius: F,
    samples: usize,
    y_anchor: F,
    delta: F,
    cells: usize,
    walks: usize,
    seed: u64,
    walk: &WalkConfig<F>,
) -> Result<TentSearch, VariationError> {
    if !(y_anchor > F::one()) {
        return Err(VariationError::InvalidArgument(format!("anchor height {y_anchor} must exceed 1")));
    }
    let d = graph.dim();
    let z = graph.lift(center);
    let axes = d - 1;
    let count = samples.max(1).pow(axes as u32);
    let mut points = Vec::new();
    for flat in 0..count {
        let mut xbar = Vec::with_capacity(axes);
        let mut rest = flat;
        for &c in &center[..axes] {
            let k = rest % samples.max(1);
            rest /= samples.max(1);
            let t = if samples > 1 { F::of_usize(k) / F::of_usize(samples - 1) } else { F::lit(0.5) };
            xbar.push(c - radius + F::lit(2.0) * radius * t);
        }
        if horizontal_distance(&graph.lift(&xbar), &z) <= radius {
            points.push(xbar);
        }
    }
    if points.is_empty() {
        return Err(VariationError::EmptyBall { radius: radius.as_f64() });
    }
    let candidates = points
        .iter()
        .enumerate()
        .map(|(i, xbar)| tent_variation(graph, field, xbar, delta, cells, walks, seed.wrapping_add(i as u64), walk))
        .collect::<Result<Vec<_>, _>>()?;
    let (index, best) = candidates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.partial_cmp(&b.1.value).unwrap_or(std::cmp::Ordering::Equal))
        .expect("nonempty");
    let x = graph.lift(&points[index]);
    let x_y = lifted(&x, y_anchor);
    let value_at = |p: &[F]| field.closed_form(p).ok_or(VariationError::NoClosedGradient);
    let u = value_at(&x_y)?.as_f64();
    let u_center = value_at(&lifted(&z, y_anchor))?.as_f64();
    let reach = graph.distance_to_boundary(&x_y)?;
    let separation = horizontal_distance(&x_y, &lifted(&z, y_anchor));
    let best = BourgainPoint {
        index,
        point: best.point.clone(),
        variation: best.value,
        std_error: best.std_error,
        anchor_value: u,
        ratio: best.value / u,
        harnack_factor: u_center / u,
        harnack_bound: harnack_bound(separation, reach, d),
        nu_average: None,
        candidates: candidates.len(),
    };
    Ok(TentSearch { candidates, best })
}

/// Least-squares fit of `log μ(B(center, r))` against `log r`.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for an exact fit through two or more points.
    pub std_error: f64,
}

/// Fits the ball-mass scaling of `measure`; radii with empty balls or zero mass are skipped
/// and at least four must remain.
pub fn scaling_exponent<F: Scalar>(
    mesh: &BoundaryMesh<F>,
    measure: &MeasureOnMesh<F>,
    center: &[F],
    radii: &[F],
) -> Result<ScalingFit, VariationError> {
    let mut used = Vec::new();
    let mut masses = Vec::new();
    for &r in radii {
        let Ok(ball) = surface_ball(mesh, center, r) else { continue };
        let m: F = ball.into_iter().map(|i| measure.weights[i]).sum();
        if m > F::zero() {
            used.push(r.as_f64());
            masses.push(m.as_f64());
        }
    }
    if used.len() < 4 {
        return Err(VariationError::InsufficientRadii { usable: used.len() });
    }
    let xs: Vec<f64> = used.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let std_error = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ScalingFit { radii: used, masses, slope, intercept, std_error })
}
