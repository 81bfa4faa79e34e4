//! Near half spaces as epigraphs of compactly supported piecewise-linear functions.

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::scalar::Scalar;

/// Horizontal sampling grid on which the boundary function is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum GraphGrid<F: Scalar> {
    /// No grid: the boundary is the hyperplane `x_d = 0` in any dimension.
    Flat { dim: usize },
    /// `d = 2`: strictly increasing abscissae.
    Line { xs: Vec<F> },
    /// `d = 3`: square lattice `lower + spacing * (i, j)`, `0 <= i, j < per_axis`,
    /// triangulated along the `(i, j) -> (i+1, j+1)` diagonal.
    Square { lower: F, spacing: F, per_axis: usize },
}

impl<F: Scalar> GraphGrid<F> {
    pub fn dim(&self) -> usize {
        match self {
            GraphGrid::Flat { dim } => *dim,
            GraphGrid::Line { .. } => 2,
            GraphGrid::Square { .. } => 3,
        }
    }

    fn node_count(&self) -> usize {
        match self {
            GraphGrid::Flat { .. } => 0,
            GraphGrid::Line { xs } => xs.len(),
            GraphGrid::Square { per_axis, .. } => per_axis * per_axis,
        }
    }
}

/// Closest point on the boundary together with its distance.
#[derive(Clone, Debug, PartialEq)]
pub struct Closest<F> {
    pub distance: F,
    pub point: Vec<F>,
}

/// Boundary `S = {(x̄, Φ(x̄))}` of a near half space `O = {x_d > Φ(x̄)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LipschitzGraph<F: Scalar> {
    grid: GraphGrid<F>,
    values: Vec<F>,
    declared_lipschitz: F,
    measured_lipschitz: F,
    support_radius: F,
}

/// Validates and builds a graph; the measured Lipschitz constant is the largest facet
/// gradient norm, which is the exact Lipschitz constant of the interpolant.
pub fn build_graph<F: Scalar>(
    grid: GraphGrid<F>,
    values: Vec<F>,
    declared_lipschitz: F,
    support_radius: F,
) -> Result<LipschitzGraph<F>, GeometryError> {
    let dim = grid.dim();
    if dim < 2 {
        return Err(GeometryError::InvalidGrid(format!("dimension {dim} < 2")));
    }
    if !(support_radius > F::zero() && support_radius < F::one()) {
        return Err(GeometryError::InvalidGrid(format!("support radius {support_radius} outside (0, 1)")));
    }
    if declared_lipschitz < F::zero() || !declared_lipschitz.is_finite() {
        return Err(GeometryError::InvalidGrid("declared Lipschitz constant must be finite and >= 0".into()));
    }
    if values.len() != grid.node_count() {
        return Err(GeometryError::InvalidGrid(format!(
            "{} values for {} grid nodes",
            values.len(),
            grid.node_count()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::InvalidGrid("non-finite boundary value".into()));
    }
    match &grid {
        GraphGrid::Flat { .. } => {}
        GraphGrid::Line { xs } => {
            if xs.len() < 2 || xs.windows(2).any(|w| w[1] <= w[0]) {
                return Err(GeometryError::InvalidGrid("abscissae must be strictly increasing".into()));
            }
            if xs[0] > -support_radius || xs[xs.len() - 1] < support_radius {
                return Err(GeometryError::InvalidGrid("grid does not cover the support ball".into()));
            }
        }
        GraphGrid::Square { lower, spacing, per_axis } => {
            let upper = *lower + *spacing * F::of_usize(per_axis.saturating_sub(1));
            if *per_axis < 2 || *spacing <= F::zero() {
                return Err(GeometryError::InvalidGrid("square grid needs >= 2 nodes per axis".into()));
            }
            if *lower > -support_radius || upper < support_radius {
                return Err(GeometryError::InvalidGrid("grid does not cover the support ball".into()));
            }
        }
    }
    let graph = LipschitzGraph { grid, values, declared_lipschitz, measured_lipschitz: F::zero(), support_radius };
    graph.check_support()?;
    let measured = graph.facet_lipschitz();
    // Relative slack absorbs rounding in the slope computation only.
    if measured > declared_lipschitz * (F::one() + F::lit(1e-12)) {
        return Err(GeometryError::LipschitzViolation {
            measured: measured.as_f64(),
            declared: declared_lipschitz.as_f64(),
        });
    }
    Ok(LipschitzGraph { measured_lipschitz: measured, ..graph })
}

impl<F: Scalar> LipschitzGraph<F> {
    /// The hyperplane `x_d = 0` in dimension `dim`.
    pub fn flat(dim: usize) -> Self {
        LipschitzGraph {
            grid: GraphGrid::Flat { dim },
            values: Vec::new(),
            declared_lipschitz: F::zero(),
            measured_lipschitz: F::zero(),
            support_radius: F::lit(0.5),
        }
    }

    /// Radially symmetric tent of height `apex` at the origin, vanishing for `|x̄| >= base`,
    /// sampled with `spacing`; in `d = 3` nodes whose cells leave the support ball are zeroed.
    pub fn tent(dim: usize, apex: F, base: F, spacing: F) -> Result<Self, GeometryError> {
        let slope = apex / base;
        let profile = |r: F| if r >= base { F::zero() } else { (apex - slope * r).max(F::zero()) };
        match dim {
            2 => {
                let n = (base / spacing).round().to_usize().unwrap_or(0).max(1);
                let h = base / F::of_usize(n);
                // Endpoints pinned so that rounding never leaves the support uncovered.
                let xs: Vec<F> =
                    (0..=2 * n).map(|i| if i == 2 * n { base } else { -base + h * F::of_usize(i) }).collect();
                let values = xs.iter().map(|&x| profile(x.abs())).collect();
                build_graph(GraphGrid::Line { xs }, values, slope, base)
            }
            3 => {
                let n = (base / spacing).round().to_usize().unwrap_or(0).max(1) + 2;
                let h = base / F::of_usize(n - 2);
                let lower = -h * F::of_usize(n);
                let per_axis = 2 * n + 1;
                let support = base + h * F::lit(1.5);
                let mut values = Vec::with_capacity(per_axis * per_axis);
                for i in 0..per_axis {
                    for j in 0..per_axis {
                        let x = lower + h * F::of_usize(i);
                        let y = lower + h * F::of_usize(j);
                        values.push(profile((x * x + y * y).sqrt()));
                    }
                }
                let support = support.min(F::lit(0.999));
                let grid = GraphGrid::Square { lower, spacing: h, per_axis };
                let measured = {
                    let probe = LipschitzGraph {
                        grid: grid.clone(),
                        values: values.clone(),
                        declared_lipschitz: F::infinity(),
                        measured_lipschitz: F::zero(),
                        support_radius: support,
                    };
                    probe.facet_lipschitz()
                };
                build_graph(grid, values, measured, support)
            }
            _ => Err(GeometryError::UnsupportedDimension(dim)),
        }
    }

    /// Random `d = 2` graph on `[−radius, radius]` with `knots` interior knots: slopes are
    /// drawn from `[−L/2, L/2]` and recentred to sum to zero, so `|Φ'| <= L` and `Φ`
    /// vanishes at both ends.
    pub fn random_piecewise_linear(lipschitz: F, radius: F, knots: usize, seed: u64) -> Result<Self, GeometryError> {
        use rand::{Rng, SeedableRng};
        if knots == 0 {
            return Err(GeometryError::InvalidGrid("need at least one interior knot".into()));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let half = lipschitz.as_f64() / 2.0;
        let mut slopes: Vec<f64> = (0..=knots).map(|_| rng.gen_range(-half..=half)).collect();
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        slopes.iter_mut().for_each(|s| *s -= mean);
        let h = F::lit(2.0) * radius / F::of_usize(knots + 1);
        let xs: Vec<F> =
            (0..=knots + 1).map(|i| if i == knots + 1 { radius } else { -radius + h * F::of_usize(i) }).collect();
        let mut values = vec![F::zero()];
        for s in &slopes[..knots] {
            let last = *values.last().expect("starts at zero");
            values.push(last + F::lit(*s) * h);
        }
        values.push(F::zero());
        build_graph(GraphGrid::Line { xs }, values, lipschitz, radius)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn grid(&self) -> &GraphGrid<F> {
        &self.grid
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.grid, GraphGrid::Flat { .. }) || self.values.iter().all(|v| v.is_zero())
    }

    pub fn declared_lipschitz(&self) -> F {
        self.declared_lipschitz
    }

    pub fn measured_lipschitz(&self) -> F {
        self.measured_lipschitz
    }

    pub fn support_radius(&self) -> F {
        self.support_radius
    }

    /// `c_S = 1/√(L²+1)` for the declared constant.
    pub fn cone_constant(&self) -> F {
        F::one() / (self.declared_lipschitz * self.declared_lipschitz + F::one()).sqrt()
    }

    /// Boundary height `Φ(x̄)` at a horizontal position.
    pub fn height(&self, xbar: &[F]) -> F {
        match &self.grid {
            GraphGrid::Flat { .. } => F::zero(),
            GraphGrid::Line { xs } => {
                let x = xbar[0];
                if x <= xs[0] || x >= xs[xs.len() - 1] {
                    return F::zero();
                }
                let k = xs.partition_point(|&t| t <= x) - 1;
                let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
                self.values[k] + t * (self.values[k + 1] - self.values[k])
            }
            GraphGrid::Square { lower, spacing, per_axis } => {
                let n = *per_axis;
                let u = (xbar[0] - *lower) / *spacing;
                let v = (xbar[1] - *lower) / *spacing;
                let top = F::of_usize(n - 1);
                if u <= F::zero() || v <= F::zero() || u >= top || v >= top {
                    return F::zero();
                }
                let i = u.floor().to_usize().unwrap().min(n - 2);
                let j = v.floor().to_usize().unwrap().min(n - 2);
                let (s, t) = (u - F::of_usize(i), v - F::of_usize(j));
                let at = |a: usize, b: usize| self.values[a * n + b];
                if s >= t {
                    at(i, j) + s * (at(i + 1, j) - at(i, j)) + t * (at(i + 1, j + 1) - at(i + 1, j))
                } else {
                    at(i, j) + t * (at(i, j + 1) - at(i, j)) + s * (at(i + 1, j + 1) - at(i, j + 1))
                }
            }
        }
    }

    /// Whether `p` lies strictly above the graph.
    pub fn contains(&self, p: &[F]) -> bool {
        let d = self.dim();
        p.len() == d && p[d - 1] > self.height(&p[..d - 1])
    }

    /// Point of `S` above the horizontal position `xbar`.
    pub fn lift(&self, xbar: &[F]) -> Vec<F> {
        let mut p = xbar.to_vec();
        p.push(self.height(xbar));
        p
    }

    /// Exact Euclidean distance from an interior point to `S`.
    pub fn distance_to_boundary(&self, p: &[F]) -> Result<F, GeometryError> {
        Ok(self.closest(p)?.distance)
    }

    /// Closest point of `S` to an interior point.
    pub fn closest(&self, p: &[F]) -> Result<Closest<F>, GeometryError> {
        if !self.contains(p) {
            return Err(GeometryError::OutsideDomain);
        }
        Ok(self.closest_unchecked(p))
    }

    /// Closest point without the membership check; used inside random walks where the
    /// walker never leaves `O`.
    pub fn closest_unchecked(&self, p: &[F]) -> Closest<F> {
        let d = p.len();
        match &self.grid {
            GraphGrid::Flat { .. } => {
                let mut point = p.to_vec();
                point[d - 1] = F::zero();
                Closest { distance: p[d - 1].abs(), point }
            }
            GraphGrid::Line { xs } => self.closest_line(xs, p),
            GraphGrid::Square { lower, spacing, per_axis } => self.closest_square(*lower, *spacing, *per_axis, p),
        }
    }

    fn closest_line(&self, xs: &[F], p: &[F]) -> Closest<F> {
        let (px, py) = (p[0], p[1]);
        let (first, last) = (xs[0], xs[xs.len() - 1]);
        // Flat exterior rays.
        let qx = if px <= first || px >= last {
            px
        } else if px - first < last - px {
            first
        } else {
            last
        };
        let mut best = Closest { distance: ((px - qx) * (px - qx) + py * py).sqrt(), point: vec![qx, F::zero()] };
        // Only segments whose horizontal extent is within the current best can improve it.
        let lo = xs.partition_point(|&t| t < px - best.distance).saturating_sub(1);
        let hi = xs.partition_point(|&t| t <= px + best.distance).min(xs.len() - 1);
        for k in lo..hi {
            if xs[k + 1] < px - best.distance || xs[k] > px + best.distance {
                continue;
            }
            let (ax, ay) = (xs[k], self.values[k]);
            let (bx, by) = (xs[k + 1], self.values[k + 1]);
            let (ex, ey) = (bx - ax, by - ay);
            let t = (((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)).max(F::zero()).min(F::one());
            let (qx, qy) = (ax + t * ex, ay + t * ey);
            let dist = ((px - qx) * (px - qx) + (py - qy) * (py - qy)).sqrt();
            if dist < best.distance {
                best = Closest { distance: dist, point: vec![qx, qy] };
            }
        }
        best
    }

    fn closest_square(&self, lower: F, h: F, n: usize, p: &[F]) -> Closest<F> {
        let upper = lower + h * F::of_usize(n - 1);
        let (px, py, pz) = (p[0], p[1], p[2]);
        // Flat exterior: plane outside the open grid square.
        let inside = px > lower && px < upper && py > lower && py < upper;
        let mut best = if inside {
            let cands =
                [(px - lower, lower, py), (upper - px, upper, py), (py - lower, px, lower), (upper - py, px, upper)];
            let (gap, qx, qy) =
                cands.iter().copied().fold((F::infinity(), px, py), |acc, c| if c.0 < acc.0 { c } else { acc });
            Closest { distance: (gap * gap + pz * pz).sqrt(), point: vec![qx, qy, F::zero()] }
        } else {
            Closest { distance: pz.abs(), point: vec![px, py, F::zero()] }
        };
        let cells = n - 1;
        let cell_range = |c: F, radius: F| -> (usize, usize) {
            let a = ((c - radius - lower) / h).floor();
            let b = ((c + radius - lower) / h).floor();
            let clamp = |v: F| v.max(F::zero()).min(F::of_usize(cells - 1)).to_usize().unwrap();
            (clamp(a), clamp(b))
        };
        let (i0, i1) = cell_range(px, best.distance);
        let (j0, j1) = cell_range(py, best.distance);
        let at = |a: usize, b: usize| -> [F; 3] {
            [lower + h * F::of_usize(a), lower + h * F::of_usize(b), self.values[a * n + b]]
        };
        let q = [px, py, pz];
        for i in i0..=i1 {
            for j in j0..=j1 {
                let cx0 = lower + h * F::of_usize(i);
                let cy0 = lower + h * F::of_usize(j);
                let dx = (cx0 - px).max(px - cx0 - h).max(F::zero());
                let dy = (cy0 - py).max(py - cy0 - h).max(F::zero());
                if (dx * dx + dy * dy).sqrt() >= best.distance {
                    continue;
                }
                let (a, b, c, e) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
                for tri in [[a, b, c], [a, c, e]] {
                    let cp = closest_on_triangle(&q, &tri);
                    let dist =
                        ((cp[0] - px) * (cp[0] - px) + (cp[1] - py) * (cp[1] - py) + (cp[2] - pz) * (cp[2] - pz))
                            .sqrt();
                    if dist < best.distance {
                        best = Closest { distance: dist, point: cp.to_vec() };
                    }
                }
            }
        }
        best
    }

    fn check_support(&self) -> Result<(), GeometryError> {
        let r = self.support_radius * (F::one() + F::lit(1e-12));
        match &self.grid {
            GraphGrid::Flat { .. } => Ok(()),
            GraphGrid::Line { xs } => {
                for (k, v) in self.values.iter().enumerate() {
                    if v.is_zero() {
                        continue;
                    }
                    let lo = xs[k.saturating_sub(1)];
                    let hi = xs[(k + 1).min(xs.len() - 1)];
                    let edge_node = k == 0 || k + 1 == xs.len();
                    if edge_node || lo.abs() > r || hi.abs() > r {
                        return Err(GeometryError::SupportViolation { position: vec![xs[k].as_f64()] });
                    }
                }
                Ok(())
            }
            GraphGrid::Square { lower, spacing, per_axis } => {
                let n = *per_axis;
                let coord = |a: usize| *lower + *spacing * F::of_usize(a);
                for a in 0..n {
                    for b in 0..n {
                        if self.values[a * n + b].is_zero() {
                            continue;
                        }
                        let on_rim = a == 0 || b == 0 || a + 1 == n || b + 1 == n;
                        let mut far = on_rim;
                        for da in [-1i64, 0, 1] {
                            for db in [-1i64, 0, 1] {
                                let (aa, bb) = (a as i64 + da, b as i64 + db);
                                if aa < 0 || bb < 0 || aa >= n as i64 || bb >= n as i64 {
                                    continue;
                                }
                                let (x, y) = (coord(aa as usize), coord(bb as usize));
                                if (x * x + y * y).sqrt() > r {
                                    far = true;
                                }
                            }
                        }
                        if far {
                            return Err(GeometryError::SupportViolation {
                                position: vec![coord(a).as_f64(), coord(b).as_f64()],
                            });
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn facet_lipschitz(&self) -> F {
        match &self.grid {
            GraphGrid::Flat { .. } => F::zero(),
            GraphGrid::Line { xs } => xs
                .windows(2)
                .zip(self.values.windows(2))
                .map(|(x, v)| ((v[1] - v[0]) / (x[1] - x[0])).abs())
                .fold(F::zero(), F::max),
            GraphGrid::Square { spacing, per_axis, .. } => {
                let n = *per_axis;
                let at = |a: usize, b: usize| self.values[a * n + b];
                let mut worst = F::zero();
                for i in 0..n - 1 {
                    for j in 0..n - 1 {
                        let g1 = [(at(i + 1, j) - at(i, j)) / *spacing, (at(i + 1, j + 1) - at(i + 1, j)) / *spacing];
                        let g2 = [(at(i + 1, j + 1) - at(i, j + 1)) / *spacing, (at(i, j + 1) - at(i, j)) / *spacing];
                        for g in [g1, g2] {
                            worst = worst.max((g[0] * g[0] + g[1] * g[1]).sqrt());
                        }
                    }
                }
                worst
            }
        }
    }
}

/// Closest point on a triangle in `R^3` (Voronoi-region case analysis).
fn closest_on_triangle<F: Scalar>(p: &[F; 3], tri: &[[F; 3]; 3]) -> [F; 3] {
    let sub = |u: &[F; 3], v: &[F; 3]| [u[0] - v[0], u[1] - v[1], u[2] - v[2]];
    let dot = |u: &[F; 3], v: &[F; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let lerp = |u: &[F; 3], e: &[F; 3], t: F| [u[0] + t * e[0], u[1] + t * e[1], u[2] + t * e[2]];
    let (a, b, c) = (&tri[0], &tri[1], &tri[2]);
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= F::zero() && d2 <= F::zero() {
        return *a;
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= F::zero() && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= F::zero() && d1 >= F::zero() && d3 <= F::zero() {
        return lerp(a, &ab, d1 / (d1 - d3));
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= F::zero() && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= F::zero() && d2 >= F::zero() && d6 <= F::zero() {
        return lerp(a, &ac, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= F::zero() && (d4 - d3) >= F::zero() && (d5 - d6) >= F::zero() {
        let bc = sub(c, b);
        return lerp(b, &bc, (d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = F::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [a[0] + ab[0] * v + ac[0] * w, a[1] + ab[1] * v + ac[1] * w, a[2] + ab[2] * v + ac[2] * w]
}
