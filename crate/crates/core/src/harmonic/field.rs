//! Positive harmonic test functions given by boundary data and an extension rule.

use serde::{Deserialize, Serialize};

use super::hitting::{hitting_masses, RowEstimator};
use super::{halfspace_kernel, poisson_constant, HarmonicError};
use crate::geometry::{BoundaryMesh, LipschitzGraph};
use crate::scalar::Scalar;

/// Evaluation rule of a [`HarmonicField`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum FieldForm<F: Scalar> {
    /// Quadrature of the nodal data against hitting masses.
    Quadrature,
    Constant(F),
    /// `u(p) = p_d`; harmonic and positive on the flat half space only.
    HeightCoordinate,
    /// Poisson extension to the flat half plane of the piecewise-linear function with the
    /// given knot values, zero outside the knots.
    PiecewiseLinearBump {
        knots: Vec<F>,
        values: Vec<F>,
    },
    /// `scale · P(p̄ − center, p_d + depth)`: a Poisson kernel with its pole below `S`,
    /// harmonic and positive on `{x_d > −depth}`.
    ExteriorPole {
        center: Vec<F>,
        depth: F,
        scale: F,
    },
}

/// Boundary data `f >= 0` on mesh nodes with a bound `f <= C` and an evaluation rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HarmonicField<F: Scalar> {
    pub data: Vec<F>,
    pub bound: F,
    pub form: FieldForm<F>,
}

impl<F: Scalar> HarmonicField<F> {
    /// Field defined by nodal data and extended by quadrature.
    pub fn from_data(data: Vec<F>) -> Result<Self, HarmonicError> {
        if data.iter().any(|&v| v < F::zero() || !v.is_finite()) {
            return Err(HarmonicError::NegativeData);
        }
        let bound = data.iter().copied().fold(F::zero(), F::max);
        Ok(HarmonicField { data, bound, form: FieldForm::Quadrature })
    }

    /// Field with a closed form; `data` is its trace on the mesh nodes.
    pub fn analytic(form: FieldForm<F>, mesh: &BoundaryMesh<F>) -> Result<Self, HarmonicError> {
        let mut field = HarmonicField { data: Vec::new(), bound: F::zero(), form };
        field.data = mesh.nodes().iter().map(|x| field.closed_form(x).unwrap_or(F::zero())).collect();
        if field.data.iter().any(|&v| v < F::zero()) {
            return Err(HarmonicError::NegativeData);
        }
        field.bound = match field.form {
            FieldForm::HeightCoordinate => F::infinity(),
            _ => field.data.iter().copied().fold(F::zero(), F::max),
        };
        Ok(field)
    }

    pub fn constant(value: F, mesh: &BoundaryMesh<F>) -> Self {
        HarmonicField { data: vec![value; mesh.len()], bound: value, form: FieldForm::Constant(value) }
    }

    /// Closed-form value, if the form has one.
    pub fn closed_form(&self, p: &[F]) -> Option<F> {
        let d = p.len();
        match &self.form {
            FieldForm::Quadrature => None,
            FieldForm::Constant(c) => Some(*c),
            FieldForm::HeightCoordinate => Some(p[d - 1]),
            FieldForm::PiecewiseLinearBump { knots, values } => Some(bump_value_gradient(knots, values, p[0], p[1]).0),
            FieldForm::ExteriorPole { center, depth, scale } => {
                Some(*scale * halfspace_kernel(d, p[d - 1] + *depth, &p[..d - 1], center))
            }
        }
    }

    /// Closed-form gradient, if the form has one.
    pub fn closed_gradient(&self, p: &[F]) -> Option<Vec<F>> {
        let d = p.len();
        match &self.form {
            FieldForm::Quadrature => None,
            FieldForm::Constant(_) => Some(vec![F::zero(); d]),
            FieldForm::HeightCoordinate => {
                let mut g = vec![F::zero(); d];
                g[d - 1] = F::one();
                Some(g)
            }
            FieldForm::PiecewiseLinearBump { knots, values } => {
                let (_, g) = bump_value_gradient(knots, values, p[0], p[1]);
                Some(g.to_vec())
            }
            FieldForm::ExteriorPole { center, depth, scale } => {
                let c = F::lit(poisson_constant(d)) * *scale;
                let y = p[d - 1] + *depth;
                let r2: F = p[..d - 1].iter().zip(center).map(|(&a, &b)| (a - b) * (a - b)).sum();
                let rho2 = r2 + y * y;
                let half = F::of_usize(d) / F::lit(2.0);
                let base = c / rho2.powf(half);
                let dd = F::of_usize(d);
                let mut g: Vec<F> =
                    p[..d - 1].iter().zip(center).map(|(&a, &b)| -dd * base * y * (a - b) / rho2).collect();
                g.push(base - dd * base * y * y / rho2);
                Some(g)
            }
        }
    }
}

/// Value and gradient of the Poisson extension of a piecewise-linear function on the line.
fn bump_value_gradient<F: Scalar>(knots: &[F], values: &[F], x: F, y: F) -> (F, [F; 2]) {
    let pi = F::PI();
    let two = F::lit(2.0);
    let mut u = F::zero();
    let mut gx = F::zero();
    let mut gy = F::zero();
    for k in 0..knots.len().saturating_sub(1) {
        let (a, b) = (knots[k], knots[k + 1]);
        let beta = (values[k + 1] - values[k]) / (b - a);
        let alpha = values[k] - beta * a;
        let (da, db) = (a - x, b - x);
        let (ra, rb) = (da * da + y * y, db * db + y * y);
        let big_a = (db / y).atan() - (da / y).atan();
        let big_a = big_a / pi;
        let big_l = (rb.ln() - ra.ln()) / (two * pi);
        let ax = (y / ra - y / rb) / pi;
        let ay = (da / ra - db / rb) / pi;
        let (lx, ly) = (ay, -ax);
        let lin = alpha + beta * x;
        u = u + lin * big_a + beta * y * big_l;
        gx = gx + beta * big_a + lin * ax + beta * y * lx;
        gy = gy + lin * ay + beta * big_l + beta * y * ly;
    }
    (u, [gx, gy])
}

/// Value of the field at an interior point: closed form when available, otherwise the
/// quadrature `Σ ω^p(cell_i) f(ξ_i)`.
pub fn extend<F: Scalar>(
    field: &HarmonicField<F>,
    graph: &LipschitzGraph<F>,
    mesh: &BoundaryMesh<F>,
    p: &[F],
    estimator: &RowEstimator<F>,
) -> Result<F, HarmonicError> {
    if !graph.contains(p) {
        return Err(HarmonicError::Geometry(crate::geometry::GeometryError::OutsideDomain));
    }
    if let Some(v) = field.closed_form(p) {
        return Ok(v);
    }
    if field.data.len() != mesh.len() {
        return Err(HarmonicError::DataLength { got: field.data.len(), expected: mesh.len() });
    }
    let masses = hitting_masses(graph, mesh, p, estimator)?;
    Ok(masses.iter().zip(&field.data).map(|(&m, &f)| m * f).sum())
}

/// Central-difference gradient of [`extend`] with step `h`; requires `2h < dist(p, S)`.
pub fn gradient<F: Scalar>(
    field: &HarmonicField<F>,
    graph: &LipschitzGraph<F>,
    mesh: &BoundaryMesh<F>,
    p: &[F],
    h: F,
    estimator: &RowEstimator<F>,
) -> Result<Vec<F>, HarmonicError> {
    let dist = graph.distance_to_boundary(p)?;
    if F::lit(2.0) * h >= dist {
        return Err(HarmonicError::StepTooLarge { step: h.as_f64(), distance: dist.as_f64() });
    }
    (0..p.len())
        .map(|k| {
            let mut plus = p.to_vec();
            let mut minus = p.to_vec();
            plus[k] = plus[k] + h;
            minus[k] = minus[k] - h;
            let up = extend(field, graph, mesh, &plus, estimator)?;
            let down = extend(field, graph, mesh, &minus, estimator)?;
            Ok((up - down) / (F::lit(2.0) * h))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MeshSpec;

    fn bump() -> FieldForm<f64> {
        FieldForm::PiecewiseLinearBump { knots: vec![-0.5, -0.1, 0.3, 0.6], values: vec![0.0, 1.0, 0.4, 0.0] }
    }

    #[test]
    fn bump_extension_matches_direct_quadrature() {
        let knots = [-0.5, -0.1, 0.3, 0.6];
        let values = [0.0, 1.0, 0.4, 0.0];
        let pl = |t: f64| {
            if t <= knots[0] || t >= knots[3] {
                return 0.0;
            }
            let k = knots.partition_point(|&s| s <= t) - 1;
            values[k] + (t - knots[k]) / (knots[k + 1] - knots[k]) * (values[k + 1] - values[k])
        };
        let (x, y) = (0.2, 0.15);
        let n = 200_000;
        let h = 1.1 / n as f64;
        let direct: f64 = (0..n)
            .map(|i| {
                let t = -0.5 + (i as f64 + 0.5) * h;
                halfspace_kernel(2, y, &[x], &[t]) * pl(t) * h
            })
            .sum();
        let (u, _) = bump_value_gradient(&knots, &values, x, y);
        assert!((u - direct).abs() < 1e-8, "{u} vs {direct}");
    }

    #[test]
    fn bump_gradient_matches_differences_and_is_harmonic() {
        let f = HarmonicField { data: vec![], bound: 1.0, form: bump() };
        let p = [0.05, 0.2];
        let g = f.closed_gradient(&p).unwrap();
        let h = 1e-5;
        let v = |x: f64, y: f64| f.closed_form(&[x, y]).unwrap();
        assert!((g[0] - (v(p[0] + h, p[1]) - v(p[0] - h, p[1])) / (2.0 * h)).abs() < 1e-7);
        assert!((g[1] - (v(p[0], p[1] + h) - v(p[0], p[1] - h)) / (2.0 * h)).abs() < 1e-7);
        let h = 1e-3;
        let lap = v(p[0] + h, p[1]) + v(p[0] - h, p[1]) + v(p[0], p[1] + h) + v(p[0], p[1] - h) - 4.0 * v(p[0], p[1]);
        assert!(lap.abs() / (h * h) < 1e-3);
    }

    #[test]
    fn exterior_pole_gradient_matches_differences() {
        let f = HarmonicField::<f64> {
            data: vec![],
            bound: 1.0,
            form: FieldForm::ExteriorPole { center: vec![0.1, -0.2], depth: 0.3, scale: 2.0 },
        };
        let p = [0.3, 0.1, 0.4];
        let g = f.closed_gradient(&p).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut a = p;
            let mut b = p;
            a[k] += h;
            b[k] -= h;
            let fd = (f.closed_form(&a).unwrap() - f.closed_form(&b).unwrap()) / (2.0 * h);
            assert!((g[k] - fd).abs() < 1e-6 * g[k].abs().max(1.0), "{k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn quadrature_extension_of_one_is_one_up_to_tail() {
        let g = LipschitzGraph::<f64>::flat(2);
        let mesh = BoundaryMesh::flat_exact(&MeshSpec::graded(400.0, 0.05, 2.0, 1.1), 1.0).unwrap();
        let field = HarmonicField::from_data(vec![1.0; mesh.len()]).unwrap();
        let v = extend(&field, &g, &mesh, &[0.1, 0.5], &RowEstimator::Oracle).unwrap();
        assert!((v - 1.0).abs() < 1e-3);
    }

    #[test]
    fn height_coordinate_gradient_is_vertical_unit() {
        let g = LipschitzGraph::<f64>::flat(2);
        let mesh = BoundaryMesh::flat_exact(&MeshSpec::uniform(1.0, 0.5), 1.0).unwrap();
        let field = HarmonicField::analytic(FieldForm::HeightCoordinate, &mesh).unwrap();
        let grad = gradient(&field, &g, &mesh, &[0.3, 0.7], 1e-3, &RowEstimator::Oracle).unwrap();
        assert!(grad[0].abs() < 1e-6 && (grad[1] - 1.0).abs() < 1e-6);
        assert!(gradient(&field, &g, &mesh, &[0.3, 0.001], 1e-3, &RowEstimator::Oracle).is_err());
    }
}
