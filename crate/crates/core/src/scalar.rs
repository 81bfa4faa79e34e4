//! Floating-point scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real scalar used by geometry, Monte Carlo and kernel code: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FftNum
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + for<'de> serde::Deserialize<'de>
    + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    fn lit(x: f64) -> Self;

    /// Converts an index or count.
    fn of_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn lit(x: f64) -> Self {
        x
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// Euclidean norm of a slice.
pub fn norm<F: Scalar>(v: &[F]) -> F {
    v.iter().map(|&x| x * x).sum::<F>().sqrt()
}

/// Euclidean distance between two points of equal dimension.
pub fn distance<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<F>().sqrt()
}

/// Gamma function at `n/2` for a positive integer `n`.
pub fn gamma_half(n: usize) -> f64 {
    assert!(n > 0, "gamma_half needs n >= 1");
    // Γ(1/2) = √π, Γ(1) = 1, Γ(x+1) = xΓ(x).
    let (mut value, mut x) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while x < n as f64 / 2.0 {
        value *= x;
        x += 1.0;
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_half_matches_known_values() {
        let pi = std::f64::consts::PI;
        assert!((gamma_half(1) - pi.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(2), 1.0);
        assert!((gamma_half(3) - pi.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(gamma_half(4), 1.0);
        assert_eq!(gamma_half(6), 2.0);
        assert!((gamma_half(5) - 0.75 * pi.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn norm_and_distance() {
        assert_eq!(norm(&[3.0_f64, 4.0]), 5.0);
        assert_eq!(distance(&[1.0_f32, 1.0], &[4.0, 5.0]), 5.0);
    }
}
