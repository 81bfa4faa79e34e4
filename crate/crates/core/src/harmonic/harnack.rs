//! Harnack envelopes and Harnack-chain quotient bounds.

use serde::{Deserialize, Serialize};

use super::HarmonicError;
use crate::scalar::Scalar;

/// Two-sided Harnack bound for `u(x)` with `|x − x₀| = r` inside a ball of radius `R`.
pub fn harnack_envelope<F: Scalar>(u0: F, r: F, big_r: F, dim: usize) -> Result<(F, F), HarmonicError> {
    if !(r >= F::zero() && r < big_r) {
        return Err(HarmonicError::InvalidRadii { r: r.as_f64(), big_r: big_r.as_f64() });
    }
    let rho = r / big_r;
    let e = (dim - 1) as i32;
    let lower = (F::one() - rho) / (F::one() + rho).powi(e) * u0;
    let upper = (F::one() + rho) / (F::one() - rho).powi(e) * u0;
    Ok((lower, upper))
}

/// Constants of a Harnack chain climbing from height `y1` to `y2` along a vertical line.
///
/// Each step moves up by `step · c_S · y` inside a ball of radius `ball · c_S · y`, which
/// stays in the domain because `dist(x_y, S) >= c_S y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HarnackConstants<F: Scalar> {
    pub dim: usize,
    pub cone: F,
    pub step: F,
    pub ball: F,
    /// Per-step lower Harnack factor `(1−ρ)/(1+ρ)^{d−1}`, `ρ = step/ball`.
    pub step_lower: F,
    /// Per-step upper Harnack factor `(1+ρ)/(1−ρ)^{d−1}`.
    pub step_upper: F,
    /// Growth exponent of the upper quotient bound.
    pub upper_exponent: F,
    /// Decay exponent of the lower quotient bound.
    pub lower_exponent: F,
}

impl<F: Scalar> HarnackConstants<F> {
    /// Constants for a boundary with Lipschitz constant `lipschitz`, using the chain geometry
    /// of half-step `c/2` inside balls of radius `3c/4`.
    pub fn new(dim: usize, lipschitz: F) -> Self {
        Self::with_geometry(dim, lipschitz, F::lit(0.5), F::lit(0.75))
    }

    pub fn with_geometry(dim: usize, lipschitz: F, step: F, ball: F) -> Self {
        let cone = F::one() / (lipschitz * lipschitz + F::one()).sqrt();
        let rho = step / ball;
        let e = (dim - 1) as i32;
        let step_lower = (F::one() - rho) / (F::one() + rho).powi(e);
        let step_upper = (F::one() + rho) / (F::one() - rho).powi(e);
        let log_shrink = (F::one() - step * cone).ln();
        HarnackConstants {
            dim,
            cone,
            step,
            ball,
            step_lower,
            step_upper,
            upper_exponent: step_lower.ln() / log_shrink,
            lower_exponent: -step_upper.ln() / log_shrink,
        }
    }

    /// Bounds on `u_{y2}(x)/u_{y1}(x)` for `y1 <= y2`:
    /// `(C⁽²⁾)⁻¹ (y1/y2)^{α₂} <= u_{y2}/u_{y1} <= (C⁽¹⁾)⁻¹ (y2/y1)^{α₁}`.
    pub fn quotient_bounds(&self, y1: F, y2: F) -> Result<(F, F), HarmonicError> {
        if !(y1 > F::zero() && y1 <= y2) {
            return Err(HarmonicError::InvalidHeights { y1: y1.as_f64(), y2: y2.as_f64() });
        }
        let lower = (y1 / y2).powf(self.lower_exponent) / self.step_upper;
        let upper = (y2 / y1).powf(self.upper_exponent) / self.step_lower;
        Ok((lower, upper))
    }
}

/// Free-function form of [`HarnackConstants::quotient_bounds`].
pub fn chain_quotient_bounds<F: Scalar>(consts: &HarnackConstants<F>, y1: F, y2: F) -> Result<(F, F), HarmonicError> {
    consts.quotient_bounds(y1, y2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_at_center_is_degenerate() {
        assert_eq!(harnack_envelope(2.0_f64, 0.0, 1.0, 3).unwrap(), (2.0, 2.0));
    }

    #[test]
    fn envelope_half_radius_in_the_plane() {
        let (lo, hi) = harnack_envelope(1.0_f64, 0.5, 1.0, 2).unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
        assert!(harnack_envelope(1.0_f64, 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn chain_constants_in_the_plane() {
        let c = HarnackConstants::new(2, 0.0_f64);
        assert!((c.step_lower - 0.2).abs() < 1e-15);
        assert!((c.step_upper - 5.0).abs() < 1e-14);
        assert!(c.upper_exponent > 0.0 && c.lower_exponent > 0.0);
        let (lo, hi) = c.quotient_bounds(0.3, 0.3).unwrap();
        assert!(lo <= 1.0 && 1.0 <= hi);
        assert!(c.quotient_bounds(0.5, 0.3).is_err());
    }

    #[test]
    fn chain_constants_in_space() {
        let c = HarnackConstants::new(3, 1.0_f64);
        assert!((c.step_lower - (1.0 / 3.0) * (0.6_f64).powi(2)).abs() < 1e-15);
        assert!((c.step_upper - 15.0).abs() < 1e-13);
        assert!((c.cone - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }
}
