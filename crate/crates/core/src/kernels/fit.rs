//! Fitted constants: the quotient exponent `α̂` and max-ratio constants of entrywise bounds.
//! The bounds hold with unspecified constants, so they are estimated, never assumed.

use serde::{Deserialize, Serialize};

use super::{DiscreteKernel, KernelError};
use crate::scalar::Scalar;

/// Entries of the reference below this fraction of its maximum are skipped in ratios.
pub const RATIO_FLOOR: f64 = 1e-12;

/// Least-squares fit `log q = log c + α̂ log(y2/y1)` of the max quotient `q = max k_{y2}/k_{y1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientFit {
    pub alpha: f64,
    pub constant: f64,
    /// Largest `q / (c (y2/y1)^α̂)`; the bound holds on the grid with `c · envelope`.
    pub envelope: f64,
    pub samples: Vec<(f64, f64, f64)>,
}

/// `max_{i,j} a[i][j] / b[i][j]` over entries where `b` is above the floor.
pub fn max_entry_ratio<F: Scalar>(
    a: &DiscreteKernel<F>,
    b: &DiscreteKernel<F>,
    scale: f64,
) -> Result<f64, KernelError> {
    if a.values.len() != b.values.len() {
        return Err(KernelError::ShapeMismatch { expected: b.values.len(), got: a.values.len() });
    }
    let floor = RATIO_FLOOR * b.max_abs().as_f64();
    Ok(a.values
        .iter()
        .zip(&b.values)
        .filter(|(_, &r)| r.as_f64() > floor)
        .map(|(&x, &r)| x.as_f64() / (scale * r.as_f64()))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Fits `α̂` from `(y1, y2, max quotient)` samples with `y1 < y2`.
pub fn fit_quotient_exponent(samples: &[(f64, f64, f64)]) -> Result<QuotientFit, KernelError> {
    if samples.len() < 2 {
        return Err(KernelError::InsufficientData(samples.len()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(y1, y2, q)| ((y2 / y1).ln(), q.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(KernelError::InsufficientData(samples.len()));
    }
    let alpha = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let constant = (my - alpha * mx).exp();
    let envelope = pts.iter().map(|p| (p.1 - constant.ln() - alpha * p.0).exp()).fold(f64::NEG_INFINITY, f64::max);
    Ok(QuotientFit { alpha, constant, envelope, samples: samples.to_vec() })
}

/// Smallest `c` with `|kernel| <= c · scale · reference` entrywise.
pub fn fit_entry_bound<F: Scalar>(
    kernel: &DiscreteKernel<F>,
    reference: &DiscreteKernel<F>,
    scale: f64,
) -> Result<f64, KernelError> {
    let abs = DiscreteKernel { values: kernel.values.iter().map(|v| v.abs()).collect(), ..kernel.clone() };
    max_entry_ratio(&abs, reference, scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightDifferenceReport {
    pub y: f64,
    pub tau: f64,
    pub z: f64,
    pub alpha: f64,
    /// Fitted `c` in `|k_{y+τ} − k_y| <= c ((y+τ)^α − y^α) k_z / z^α`.
    pub constant: f64,
}

/// Fits the constant of the height-difference bound for `z <= y`.
pub fn height_difference_check<F: Scalar>(
    k_upper: &DiscreteKernel<F>,
    k_y: &DiscreteKernel<F>,
    k_z: &DiscreteKernel<F>,
    (y, tau, z): (f64, f64, f64),
    alpha: f64,
) -> Result<HeightDifferenceReport, KernelError> {
    if !(z > 0.0 && z <= y && tau > 0.0) {
        return Err(KernelError::InvalidHeight(z));
    }
    let diff = k_upper.combine(F::one(), k_y, -F::one(), k_y.kind)?;
    let scale = ((y + tau).powf(alpha) - y.powf(alpha)) / z.powf(alpha);
    let constant = fit_entry_bound(&diff, k_z, scale)?;
    Ok(HeightDifferenceReport { y, tau, z, alpha, constant })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let samples: Vec<(f64, f64, f64)> = [(0.1_f64, 0.2_f64), (0.1, 0.4), (0.2, 0.8), (0.05, 0.8)]
            .iter()
            .map(|&(a, b)| (a, b, 3.0 * (b / a).powf(0.7)))
            .collect();
        let fit = fit_quotient_exponent(&samples).unwrap();
        assert!((fit.alpha - 0.7).abs() < 1e-12 && (fit.constant - 3.0).abs() < 1e-12);
        assert!((fit.envelope - 1.0).abs() < 1e-12);
        assert!(fit_quotient_exponent(&samples[..1]).is_err());
    }
}
