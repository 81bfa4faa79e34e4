//! Closed-form harmonic measure of the flat half space and of the flat torus.

use crate::scalar::{gamma_half, Scalar};

/// Normalizing constant `Γ(d/2)/π^{d/2}` of the half-space Poisson kernel in `R^d`.
pub fn poisson_constant(dim: usize) -> f64 {
    gamma_half(dim) / std::f64::consts::PI.powf(dim as f64 / 2.0)
}

/// Half-space Poisson kernel `c_d y / (|x̄ − ξ̄|² + y²)^{d/2}`: the density of the exit
/// distribution from `(x̄, y)` at the boundary point `ξ̄` of `{x_d > 0}`.
pub fn halfspace_kernel<F: Scalar>(dim: usize, y: F, x: &[F], xi: &[F]) -> F {
    let r2: F = x.iter().zip(xi).map(|(&a, &b)| (a - b) * (a - b)).sum();
    F::lit(poisson_constant(dim)) * y / (r2 + y * y).powf(F::of_usize(dim) / F::lit(2.0))
}

/// Exit probability into `[a, b)` from `(x, y)` above the flat line.
pub fn halfplane_cell_mass<F: Scalar>(x: F, y: F, a: F, b: F) -> F {
    // atan((b−x)/y) − atan((a−x)/y) written as one atan2 to avoid cancellation far away.
    let (u, v) = ((a - x) / y, (b - x) / y);
    (v - u).atan2(F::one() + u * v) / F::PI()
}

/// Gradient `(∂_x, ∂_y)` of [`halfplane_cell_mass`] with respect to the start point.
pub fn halfplane_cell_mass_gradient<F: Scalar>(x: F, y: F, a: F, b: F) -> [F; 2] {
    let (da, db) = (a - x, b - x);
    let (ra, rb) = (da * da + y * y, db * db + y * y);
    let pi = F::PI();
    [(y / ra - y / rb) / pi, (da / ra - db / rb) / pi]
}

/// Closed-form CDF of the exit abscissa from `(x, y)`: the Cauchy law.
pub fn halfplane_exit_cdf<F: Scalar>(x: F, y: F, t: F) -> F {
    F::lit(0.5) + ((t - x) / y).atan() / F::PI()
}

/// Periodized Poisson kernel of the half cylinder over a circle of length `period` (`d = 2`).
pub fn periodic_poisson_2d<F: Scalar>(period: F, y: F, dx: F) -> F {
    let two_pi = F::lit(2.0) * F::PI();
    let a = two_pi * y / period;
    let e = (-a).exp();
    // sinh a / (cosh a − cos b) = (1 − e^{−2a}) / (1 + e^{−2a} − 2 e^{−a} cos b).
    (F::one() - e * e) / (F::one() + e * e - F::lit(2.0) * e * (two_pi * dx / period).cos()) / period
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_normalizes_in_the_plane() {
        // ∫ y/(π(t²+y²)) over [−T, T] plus the two exact Cauchy tails.
        let y = 0.7_f64;
        let t_max = 200.0;
        let n = 400_000;
        let h = 2.0 * t_max / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let t = -t_max + (i as f64 + 0.5) * h;
            sum += halfspace_kernel(2, y, &[0.0], &[t]) * h;
        }
        let tail = 1.0 - 2.0 / std::f64::consts::PI * (t_max / y).atan();
        assert!((sum + tail - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kernel_normalizes_in_space() {
        // Radial integral 2π ∫ r y/(2π(r²+y²)^{3/2}) dr, tail y/√(R²+y²).
        let y = 0.5_f64;
        let r_max = 50.0;
        let n = 200_000;
        let h = r_max / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let r = (i as f64 + 0.5) * h;
            sum += 2.0 * std::f64::consts::PI * r * halfspace_kernel(3, y, &[r, 0.0], &[0.0, 0.0]) * h;
        }
        let tail = y / (r_max * r_max + y * y).sqrt();
        assert!((sum + tail - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kernel_is_symmetric_and_scales() {
        let a = halfspace_kernel(3, 0.3_f64, &[0.1, 0.2], &[-0.4, 0.5]);
        let b = halfspace_kernel(3, 0.3_f64, &[-0.4, 0.5], &[0.1, 0.2]);
        assert_eq!(a, b);
        for dim in [2usize, 3, 4] {
            let x = vec![0.0_f64; dim - 1];
            let ratio = halfspace_kernel(dim, 0.25, &x, &x) / halfspace_kernel(dim, 0.5, &x, &x);
            assert!((ratio - 2f64.powi(dim as i32 - 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_mass_gradient_matches_differences() {
        let (x, y, a, b) = (0.3_f64, 0.4, -0.2, 0.9);
        let g = halfplane_cell_mass_gradient(x, y, a, b);
        let h = 1e-6;
        let gx = (halfplane_cell_mass(x + h, y, a, b) - halfplane_cell_mass(x - h, y, a, b)) / (2.0 * h);
        let gy = (halfplane_cell_mass(x, y + h, a, b) - halfplane_cell_mass(x, y - h, a, b)) / (2.0 * h);
        assert!((g[0] - gx).abs() < 1e-8 && (g[1] - gy).abs() < 1e-8);
    }

    #[test]
    fn periodic_kernel_integrates_to_one_and_approaches_line_kernel() {
        let (period, y) = (8.0_f64, 0.3);
        let n = 4000;
        let h = period / n as f64;
        let total: f64 = (0..n).map(|i| periodic_poisson_2d(period, y, -4.0 + i as f64 * h) * h).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let line = halfspace_kernel(2, y, &[0.0], &[0.1]);
        let wrapped = periodic_poisson_2d(period, y, 0.1);
        assert!((wrapped - line).abs() < 1e-2 * line);
    }
}
