use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, Signed, ToPrimitive};

/// Exact ordered field used for segment endpoints.
pub trait Exact: Clone + Ord + Debug + Display + Num + Signed + Send + Sync + 'static {
    fn ratio(numer: i64, denom: i64) -> Self;
    fn integer(n: i64) -> Self {
        Self::ratio(n, 1)
    }
    fn to_f64(&self) -> f64;
    /// Parses `"p/q"` or `"p"`.
    fn parse(text: &str) -> Option<Self>;
    /// Greatest common divisor of two positive rationals: the largest `g` with both
    /// values integer multiples of `g`.
    fn gcd(&self, other: &Self) -> Self;
    /// Largest integer not above the value.
    fn floor_int(&self) -> Self;
}

fn parse_parts(text: &str) -> Option<(&str, &str)> {
    let text = text.trim();
    Some(match text.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (text, "1"),
    })
}

impl Exact for BigRational {
    fn ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn parse(text: &str) -> Option<Self> {
        let (p, q) = parse_parts(text)?;
        let q: BigInt = q.parse().ok()?;
        if q == BigInt::from(0) {
            return None;
        }
        Some(BigRational::new(p.parse().ok()?, q))
    }

    fn gcd(&self, other: &Self) -> Self {
        use num_integer::Integer;
        // gcd(a/b, c/d) = gcd(ad, cb) / (bd).
        let num = (self.numer() * other.denom()).gcd(&(other.numer() * self.denom()));
        BigRational::new(num, self.denom() * other.denom())
    }

    fn floor_int(&self) -> Self {
        self.floor()
    }
}

impl Exact for Ratio<i128> {
    fn ratio(numer: i64, denom: i64) -> Self {
        Ratio::new(numer as i128, denom as i128)
    }

    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }

    fn parse(text: &str) -> Option<Self> {
        let (p, q) = parse_parts(text)?;
        let q: i128 = q.parse().ok()?;
        if q == 0 {
            return None;
        }
        Some(Ratio::new(p.parse().ok()?, q))
    }

    fn gcd(&self, other: &Self) -> Self {
        use num_integer::Integer;
        let num = (self.numer() * other.denom()).gcd(&(other.numer() * self.denom()));
        Ratio::new(num, self.denom() * other.denom())
    }

    fn floor_int(&self) -> Self {
        self.floor()
    }
}
