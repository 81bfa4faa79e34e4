//! Fourier machinery on the flat torus boundary: the Poisson semigroup `e^{−y|k|}` and
//! its derivatives act diagonally on Fourier modes.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::geometry::MeshLayout;
use crate::scalar::Scalar;

/// Multi-dimensional FFT on a `per_axis^axes` periodic grid (row-major, last axis fastest).
pub struct SpectralGrid<F: Scalar> {
    axes: usize,
    per_axis: usize,
    period: F,
    /// Wave vector of each flattened mode; Nyquist components are stored as zero so that
    /// derivative symbols stay real-valued.
    wave: Vec<Vec<F>>,
    /// `|k|` of each mode including Nyquist components.
    magnitude: Vec<F>,
    forward: Arc<dyn Fft<F>>,
    inverse: Arc<dyn Fft<F>>,
}

impl<F: Scalar> SpectralGrid<F> {
    pub fn new(axes: usize, per_axis: usize, period: F) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(per_axis);
        let inverse = planner.plan_fft_inverse(per_axis);
        let total = per_axis.pow(axes as u32);
        let unit = F::lit(2.0) * F::PI() / period;
        let mut wave = Vec::with_capacity(total);
        let mut magnitude = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rest = flat;
            let mut k = vec![F::zero(); axes];
            let mut full = F::zero();
            for a in (0..axes).rev() {
                let i = rest % per_axis;
                rest /= per_axis;
                let m = if i <= per_axis / 2 { i as f64 } else { i as f64 - per_axis as f64 };
                let km = unit * F::lit(m);
                full = full + km * km;
                k[a] = if 2 * i == per_axis { F::zero() } else { km };
            }
            wave.push(k);
            magnitude.push(full.sqrt());
        }
        SpectralGrid { axes, per_axis, period, wave, magnitude, forward, inverse }
    }

    pub fn from_layout(dim: usize, layout: &MeshLayout<F>) -> Option<Self> {
        match layout {
            MeshLayout::Periodic { period, per_axis } => Some(Self::new(dim - 1, *per_axis, *period)),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.magnitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitude.is_empty()
    }

    pub fn magnitude(&self) -> &[F] {
        &self.magnitude
    }

    pub fn wave(&self) -> &[Vec<F>] {
        &self.wave
    }

    fn transform(&self, data: &mut [Complex<F>], plan: &Arc<dyn Fft<F>>) {
        let n = self.per_axis;
        let mut line = vec![Complex::new(F::zero(), F::zero()); n];
        for axis in 0..self.axes {
            let stride = n.pow((self.axes - 1 - axis) as u32);
            let block = stride * n;
            for start in 0..data.len() / block {
                for offset in 0..stride {
                    let base = start * block + offset;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process(&mut line);
                    for (j, slot) in line.iter().enumerate() {
                        data[base + j * stride] = *slot;
                    }
                }
            }
        }
    }

    pub fn forward(&self, values: &[F]) -> Vec<Complex<F>> {
        let mut data: Vec<Complex<F>> = values.iter().map(|&v| Complex::new(v, F::zero())).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform, normalized, real part.
    pub fn inverse(&self, mut spectrum: Vec<Complex<F>>) -> Vec<F> {
        self.transform(&mut spectrum, &self.inverse);
        let scale = F::one() / F::of_usize(self.len());
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies a Fourier multiplier to real data.
    pub fn multiply(&self, values: &[F], symbol: impl Fn(usize) -> Complex<F>) -> Vec<F> {
        let mut spec = self.forward(values);
        for (m, c) in spec.iter_mut().enumerate() {
            *c = *c * symbol(m);
        }
        self.inverse(spec)
    }
}

/// Which derivative of the Poisson semigroup to evaluate off the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoissonPart {
    Value,
    /// Derivative along a horizontal axis of the start point.
    Horizontal(usize),
    /// Derivative along the height of the start point.
    Vertical,
}

impl<F: Scalar> SpectralGrid<F> {
    /// Exit masses of the cells (or a derivative of them) from the start point
    /// `(x̄, y)`, for any `x̄` on the torus: the Fourier series of the periodized Poisson
    /// kernel sampled at the nodes, evaluated with one FFT.
    pub fn exit_masses(&self, xbar: &[F], y: F, part: PoissonPart) -> Vec<F> {
        let total = self.len();
        let scale = F::one() / F::of_usize(total);
        let mut coefs = Vec::with_capacity(total);
        for m in 0..total {
            let k = &self.wave[m];
            let mut phase = F::zero();
            let mut parity = 0usize;
            let mut rest = m;
            for (a, &x) in xbar.iter().enumerate().rev() {
                let i = rest % self.per_axis;
                rest /= self.per_axis;
                parity += i;
                // Nyquist modes use the full |k| phase, stored as zero in `wave`.
                let ka =
                    if 2 * i == self.per_axis { -F::PI() * F::of_usize(self.per_axis) / self.period } else { k[a] };
                phase = phase + ka * x;
            }
            let sign = if parity.is_multiple_of(2) { F::one() } else { -F::one() };
            let decay = (-y * self.magnitude[m]).exp() * scale * sign;
            let factor = match part {
                PoissonPart::Value => Complex::new(decay, F::zero()),
                PoissonPart::Horizontal(a) => Complex::new(F::zero(), k[a] * decay),
                PoissonPart::Vertical => Complex::new(-self.magnitude[m] * decay, F::zero()),
            };
            coefs.push(factor * Complex::new(phase.cos(), phase.sin()));
        }
        self.transform(&mut coefs, &self.forward);
        coefs.into_iter().map(|c| c.re).collect()
    }
}

/// Cell masses `ω^{(c, y)}(cell_i)` on a periodic mesh for a pole above the node `center`,
/// computed as the Poisson semigroup applied to a unit mass.
pub fn periodic_poisson_masses<F: Scalar>(layout: &MeshLayout<F>, nodes: &[Vec<F>], center: &[F], height: F) -> Vec<F> {
    let dim = nodes[0].len();
    let grid = SpectralGrid::from_layout(dim, layout).expect("periodic layout");
    let mut delta = vec![F::zero(); nodes.len()];
    let owner = nodes
        .iter()
        .position(|p| p[..dim - 1].iter().zip(center).all(|(a, b)| (*a - *b).abs() < F::lit(1e-9)))
        .expect("pole must sit above a node");
    delta[owner] = F::one();
    let mags = grid.magnitude().to_vec();
    grid.multiply(&delta, |m| Complex::new((-height * mags[m]).exp(), F::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::periodic_poisson_2d;

    #[test]
    fn round_trip_in_two_axes() {
        let grid = SpectralGrid::<f64>::new(2, 8, 4.0);
        let data: Vec<f64> = (0..64).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        let back = grid.inverse(grid.forward(&data));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn semigroup_masses_match_closed_form() {
        let period = 8.0;
        let n = 128;
        let h = period / n as f64;
        let layout = MeshLayout::Periodic { period, per_axis: n };
        let nodes: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 - 64.0) * h, 0.0]).collect();
        let masses = periodic_poisson_masses(&layout, &nodes, &[0.0], 1.0);
        for (p, m) in nodes.iter().zip(&masses) {
            let exact = periodic_poisson_2d(period, 1.0, p[0]) * h;
            assert!((m - exact).abs() < 1e-14, "{m} vs {exact}");
        }
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let grid = SpectralGrid::from_layout(2, &layout).unwrap();
        let direct = grid.exit_masses(&[0.0], 1.0, PoissonPart::Value);
        for (a, b) in masses.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn off_grid_masses_and_derivatives_match_closed_form() {
        let (period, n) = (6.0_f64, 96);
        let h = period / n as f64;
        let grid = SpectralGrid::new(1, n, period);
        let (x, y) = (0.123, 0.4);
        let masses = grid.exit_masses(&[x], y, PoissonPart::Value);
        let dx = grid.exit_masses(&[x], y, PoissonPart::Horizontal(0));
        let dy = grid.exit_masses(&[x], y, PoissonPart::Vertical);
        let eps = 1e-5;
        for j in [0usize, 30, 48, 60] {
            let xi = (j as f64 - 48.0) * h;
            let exact = periodic_poisson_2d(period, y, x - xi) * h;
            // Off the grid only the resolved modes are summed; aliasing is O(e^{−π N y / L}).
            assert!((masses[j] - exact).abs() < 1e-10, "{j}: {} vs {exact}", masses[j]);
            let fx = (periodic_poisson_2d(period, y, x + eps - xi) - periodic_poisson_2d(period, y, x - eps - xi)) * h
                / (2.0 * eps);
            let fy = (periodic_poisson_2d(period, y + eps, x - xi) - periodic_poisson_2d(period, y - eps, x - xi)) * h
                / (2.0 * eps);
            assert!((dx[j] - fx).abs() < 1e-8, "{} {}", dx[j], fx);
            assert!((dy[j] - fy).abs() < 1e-8, "{} {}", dy[j], fy);
        }
    }
}
