//! Walk-on-spheres sampling of the exit distribution and harmonic-measure estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundaryMesh, LipschitzGraph};
use crate::scalar::Scalar;

/// Walks per random stream; fixes the walk-to-stream assignment independently of threads.
pub const WALKS_PER_STREAM: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("walk exceeded {max_steps} steps")]
    MaxStepsExceeded { max_steps: usize },
    #[error("walk start is not inside the domain")]
    StartOutsideDomain,
}

/// Shell width and step cap of a walk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WalkConfig<F: Scalar> {
    pub shell: F,
    pub max_steps: usize,
}

impl<F: Scalar> Default for WalkConfig<F> {
    fn default() -> Self {
        WalkConfig { shell: F::lit(1e-4), max_steps: 100_000 }
    }
}

/// Terminal point of one walk.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkHit<F> {
    pub point: Vec<F>,
    pub steps: usize,
}

/// Random stream for walk block `stream` under a root seed.
pub fn walk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform direction on the unit sphere of `R^dim`.
pub fn unit_direction<F: Scalar, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<F> {
    if dim == 2 {
        let angle: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        return vec![F::lit(angle.cos()), F::lit(angle.sin())];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| F::lit(x / n)).collect();
        }
    }
}

/// One walk from `start`; returns the closest boundary point once inside the shell.
pub fn wos_sample<F: Scalar, R: Rng + ?Sized>(
    graph: &LipschitzGraph<F>,
    start: &[F],
    config: &WalkConfig<F>,
    rng: &mut R,
) -> Result<WalkHit<F>, WalkError> {
    if !graph.contains(start) {
        return Err(WalkError::StartOutsideDomain);
    }
    let dim = start.len();
    let mut p = start.to_vec();
    for steps in 0..config.max_steps {
        let closest = graph.closest_unchecked(&p);
        if closest.distance < config.shell {
            return Ok(WalkHit { point: closest.point, steps });
        }
        let dir = unit_direction::<F, _>(dim, rng);
        for (x, u) in p.iter_mut().zip(dir) {
            *x = *x + closest.distance * u;
        }
    }
    Err(WalkError::MaxStepsExceeded { max_steps: config.max_steps })
}

/// Cell masses of the exit distribution with their standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MeasureEstimate<F: Scalar> {
    pub masses: Vec<F>,
    pub standard_errors: Vec<F>,
    pub tail: F,
    pub tail_standard_error: F,
    pub walks: usize,
    pub seed: u64,
    pub shell: F,
    pub mean_steps: f64,
}

/// Runs `walks` walks from `start` and calls `visit` with each hit; blocks of
/// [`WALKS_PER_STREAM`] walks share one stream so results do not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn run_walks<F, A, V, M>(
    graph: &LipschitzGraph<F>,
    start: &[F],
    walks: usize,
    seed: u64,
    config: &WalkConfig<F>,
    init: impl Fn() -> A + Sync + Send,
    visit: V,
    merge: M,
) -> Result<A, WalkError>
where
    F: Scalar,
    A: Send,
    V: Fn(&mut A, &WalkHit<F>) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    if !graph.contains(start) {
        return Err(WalkError::StartOutsideDomain);
    }
    let streams = walks.div_ceil(WALKS_PER_STREAM);
    let partials: Result<Vec<A>, WalkError> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let mut rng = walk_rng(seed, s as u64);
            let count = WALKS_PER_STREAM.min(walks - s * WALKS_PER_STREAM);
            let mut acc = init();
            for _ in 0..count {
                let hit = wos_sample(graph, start, config, &mut rng)?;
                visit(&mut acc, &hit);
            }
            Ok(acc)
        })
        .collect();
    // Merge in stream order so floating accumulators are reproducible too.
    Ok(partials?.into_iter().fold(init(), merge))
}

/// Estimates `ω^{pole}` on the mesh cells; the last bin is the tail beyond the mesh.
pub fn estimate_harmonic_measure<F: Scalar>(
    graph: &LipschitzGraph<F>,
    pole: &[F],
    mesh: &BoundaryMesh<F>,
    walks: usize,
    seed: u64,
    config: &WalkConfig<F>,
) -> Result<MeasureEstimate<F>, WalkError> {
    let n = mesh.len();
    let (counts, steps) = run_walks(
        graph,
        pole,
        walks,
        seed,
        config,
        || (vec![0u64; n + 1], 0u64),
        |acc, hit| {
            let cell = mesh.cell_of(&hit.point).unwrap_or(n);
            acc.0[cell] += 1;
            acc.1 += hit.steps as u64;
        },
        |mut a, b| {
            for (x, y) in a.0.iter_mut().zip(&b.0) {
                *x += *y;
            }
            (a.0, a.1 + b.1)
        },
    )?;
    let total = F::of_usize(walks);
    let mass = |c: u64| F::lit(c as f64) / total;
    let se = |c: u64| {
        let p = mass(c);
        (p * (F::one() - p) / total).sqrt()
    };
    Ok(MeasureEstimate {
        masses: counts[..n].iter().map(|&c| mass(c)).collect(),
        standard_errors: counts[..n].iter().map(|&c| se(c)).collect(),
        tail: mass(counts[n]),
        tail_standard_error: se(counts[n]),
        walks,
        seed,
        shell: config.shell,
        mean_steps: steps as f64 / walks.max(1) as f64,
    })
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MeshSpec;
    use crate::harmonic::halfplane_exit_cdf;

    #[test]
    fn flat_walks_terminate_on_the_line() {
        let g = LipschitzGraph::<f64>::flat(2);
        let mut rng = walk_rng(7, 0);
        for _ in 0..100 {
            let hit = wos_sample(&g, &[0.0, 1.0], &WalkConfig::default(), &mut rng).unwrap();
            assert_eq!(hit.point[1], 0.0);
        }
    }

    #[test]
    fn step_cap_is_reported() {
        let g = LipschitzGraph::<f64>::flat(2);
        let cfg = WalkConfig { shell: 1e-300, max_steps: 5 };
        let err = wos_sample(&g, &[0.0, 1.0], &cfg, &mut walk_rng(1, 0)).unwrap_err();
        assert_eq!(err, WalkError::MaxStepsExceeded { max_steps: 5 });
    }

    #[test]
    fn high_start_spreads_hits_proportionally() {
        let g = LipschitzGraph::<f64>::flat(2);
        let mut xs: Vec<f64> = Vec::new();
        let mut rng = walk_rng(3, 0);
        for _ in 0..4000 {
            xs.push(wos_sample(&g, &[0.0, 1000.0], &WalkConfig::default(), &mut rng).unwrap().point[0]);
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        let iqr = xs[3000] - xs[1000];
        // Interquartile range of the Cauchy law with scale 1000 is 2000.
        assert!((iqr / 2000.0 - 1.0).abs() < 0.15, "iqr {iqr}");
    }

    #[test]
    fn estimate_is_reproducible_and_normalized() {
        let g = LipschitzGraph::<f64>::flat(2);
        let mesh = BoundaryMesh::flat_exact(&MeshSpec::uniform(2.0, 0.5), 1.0).unwrap();
        let cfg = WalkConfig::default();
        let a = estimate_harmonic_measure(&g, &[0.0, 1.0], &mesh, 5000, 11, &cfg).unwrap();
        let b = estimate_harmonic_measure(&g, &[0.0, 1.0], &mesh, 5000, 11, &cfg).unwrap();
        assert_eq!(a, b);
        let total: f64 = a.masses.iter().sum::<f64>() + a.tail;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_of_small_flat_sample_is_plausible() {
        let g = LipschitzGraph::<f64>::flat(2);
        let mut rng = walk_rng(5, 0);
        let mut xs: Vec<f64> = (0..20_000)
            .map(|_| wos_sample(&g, &[0.0, 1.0], &WalkConfig::default(), &mut rng).unwrap().point[0])
            .collect();
        let d = ks_statistic(&mut xs, |t| halfplane_exit_cdf(0.0, 1.0, t));
        // 1% critical value of the KS law is 1.63/√n.
        assert!(d < 1.63 / (20_000f64).sqrt(), "ks {d}");
    }
}
