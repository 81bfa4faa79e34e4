//! Acceptance suite: one PASS/FAIL line per criterion. Every threshold is pinned below;
//! the process exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bourgain_core::geometry::{BoundaryMesh, LipschitzGraph, MeshSpec};
use bourgain_core::harmonic::{
    estimate_harmonic_measure, halfplane_exit_cdf, ks_statistic, run_walks, FieldForm, HarmonicField, WalkConfig,
};
use bourgain_core::kernels::{compose, CellOracleFamily, DiscreteKernel, KernelFamily, Perturbation, SpectralFamily};
use bourgain_core::omega::{ode_residual, omega_segment, phi_property_check, OmegaConfig};
use bourgain_core::partitions::{
    counterexample_partition, lambda_beta_exhaustive, make_dyadic, regularity, subpartition_bound,
    weak_regularity_ratio, Exact, Partition, Segment,
};
use bourgain_core::variation::{
    bourgain_search, gaussian_tests, kappa_exit, nu_approx, scaling_exponent, tent_bourgain_search, variation_profile,
};
use num_rational::{BigRational, Ratio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = Ratio<i128>;
type Big = BigRational;

// C1
const C1_WALKS: usize = 1_000_000;
const C1_SIGMAS: f64 = 3.0;
const C1_KS: f64 = 0.002;
const C1_RUNTIME: Duration = Duration::from_secs(120);
// C2
const C2_RESIDUAL: f64 = 1e-3;
const C2_MAX_NODES: usize = 2000;
const C2_MIN_ORDER: f64 = 1.0;
/// Slack on the measured order: the truncation residuals are first order, but the
/// finite-R correction leaves the measured order a few tenths of a percent below 1.
const C2_ORDER_SLACK: f64 = 0.02;
const C2_SPECTRAL: f64 = 1e-12;
// C3
const C3_RATIO: f64 = 0.5;
const C3_RATIO_BAND: f64 = 0.15;
const C3_FROM_DEPTH: u32 = 4;
const C3_INDEPENDENCE: f64 = 2.0;
const C3_RUNTIME: Duration = Duration::from_secs(300);
// C4
const C4_MEAN_ONE: f64 = 1e-3;
const C4_SEMIGROUP: f64 = 2.0;
const C4_L1: f64 = 1e-3;
const C4_EPSILON: f64 = 0.05;
// C5
const C5_BAND: f64 = 0.2;
// C6
const C6_RESIDUAL: f64 = 5e-3;
const C6_HALVING: (f64, f64) = (0.35, 0.65);
// C7
const C7_RANDOM: usize = 200;
const C7_MAX_PIECES: usize = 10;
const C7_RUNTIME: Duration = Duration::from_secs(30);
// C8
const C8_STABILITY: f64 = 2.0;
const C8_CENTERS: [f64; 5] = [-0.8, -0.4, 0.0, 0.4, 0.8];
const C8_RADII: [f64; 2] = [0.1, 0.2];
const C8_Y_ANCHOR: f64 = 2.0;
// C9
const C9_SLACK: f64 = 0.1;
const C9_EPSILON: f64 = 0.05;
const C9_RUNTIME: Duration = Duration::from_secs(600);

/// Cut and height cells of every variation profile.
const DELTA: f64 = 1.0 / 128.0;
const HEIGHT_CELLS: usize = 28;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn torus(n: usize, period: f64) -> SpectralFamily<f64> {
    SpectralFamily::new(BoundaryMesh::periodic(2, period, n, 1.0).unwrap()).unwrap()
}

fn nodal(family: &impl KernelFamily<f64>, f: impl Fn(f64) -> f64) -> Vec<f64> {
    family.mesh().nodes().iter().map(|p| f(p[0])).collect()
}

fn parabola(x: f64) -> f64 {
    (1.0 - (x / 0.7).powi(2)).max(0.0)
}

fn nearest_node(mesh: &BoundaryMesh<f64>, x: f64) -> usize {
    let target = [x, 0.0];
    (0..mesh.len())
        .min_by(|&a, &b| {
            mesh.boundary_distance(mesh.node(a), &target).total_cmp(&mesh.boundary_distance(mesh.node(b), &target))
        })
        .unwrap()
}

fn c1_oracle() -> Outcome {
    let start = Instant::now();
    let graph = LipschitzGraph::<f64>::flat(2);
    let mesh = BoundaryMesh::flat_exact(&MeshSpec::uniform(4.0, 0.25), 1.0).unwrap();
    let walk = WalkConfig::default();
    let pole = [0.0, 1.0];
    let est = estimate_harmonic_measure(&graph, &pole, &mesh, C1_WALKS, 11, &walk).unwrap();
    let n = C1_WALKS as f64;
    let z = |mc: f64, exact: f64| (mc - exact).abs() / (exact * (1.0 - exact) / n).sqrt();
    let mut worst = est.masses.iter().zip(mesh.weights()).map(|(&m, &w)| z(m, w)).fold(0.0, f64::max);
    worst = worst.max(z(est.tail, mesh.tail_mass()));
    let mut exits = run_walks(
        &graph,
        &pole,
        C1_WALKS,
        12,
        &walk,
        Vec::new,
        |acc: &mut Vec<f64>, hit| acc.push(hit.point[0]),
        |mut a, b| {
            a.extend(b);
            a
        },
    )
    .unwrap();
    let ks = ks_statistic(&mut exits, |t| halfplane_exit_cdf(0.0, 1.0, t));
    let elapsed = start.elapsed();
    outcome(
        worst <= C1_SIGMAS && ks < C1_KS && elapsed < C1_RUNTIME,
        format!(
            "{} cells + tail, worst |z| = {worst:.2} (<= {C1_SIGMAS}), KS = {ks:.5} (< {C1_KS}), {:.1}s",
            mesh.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_identities() -> Outcome {
    // Joint refinement: node spacing halves while the truncation radius doubles.
    let levels: [(f64, f64); 3] = [(0.1, 1000.0), (0.05, 2000.0), (0.025, 4000.0)];
    let heights = [0.125, 0.25, 0.5];
    let mut table = Vec::new();
    let mut nodes = Vec::new();
    for (h, r) in levels {
        let mesh = BoundaryMesh::flat_exact(&MeshSpec::graded(r, h, 2.0, 1.1), 1.0).unwrap();
        let n = mesh.len();
        let window: Vec<usize> = (0..n).filter(|&i| mesh.node(i)[0].abs() <= 1.0).collect();
        let family = CellOracleFamily::new(mesh.clone()).unwrap();
        let pert = Perturbation::new(&family, nodal(&family, |x| (-x * x).exp() + 0.2)).unwrap();
        let one = vec![1.0; n];
        let f = nodal(&family, |x| (-x * x).exp());
        let dev = |v: &[f64], w: &[f64]| window.iter().map(|&i| (v[i] - w[i]).abs()).fold(0.0, f64::max);
        let zero = vec![0.0; n];
        let mut res = [0.0f64; 4];
        for y in heights {
            res[0] = res[0].max(dev(&family.apply_k(y, &one), &one));
            res[1] = res[1].max(dev(&pert.apply_c(y, &one), &zero));
            res[2] = res[2].max(dev(&pert.apply_b(y, &one), &zero));
            res[3] = res[3].max(dev(&family.apply_k(y, &family.apply_k(y, &f)), &family.apply_k(2.0 * y, &f)));
        }
        table.push(res);
        nodes.push(n);
    }
    let orders: Vec<f64> = (0..4)
        .map(|k| (1..table.len()).map(|l| (table[l - 1][k] / table[l][k]).log2()).fold(f64::INFINITY, f64::min))
        .collect();
    // The torus family carries the same identities exactly.
    let family = torus(128, 8.0);
    let pert = Perturbation::new(&family, nodal(&family, |x| parabola(x) + 0.2)).unwrap();
    let one = vec![1.0; 128];
    let f = nodal(&family, |x| (-x * x).exp());
    let mut spectral = 0.0f64;
    for y in heights {
        let k1 = family.apply_k(y, &one);
        let c1 = pert.apply_c(y, &one);
        let b1 = pert.apply_b(y, &one);
        let semi: Vec<f64> = family
            .apply_k(y, &family.apply_k(y, &f))
            .iter()
            .zip(family.apply_k(2.0 * y, &f))
            .map(|(a, b)| a - b)
            .collect();
        for v in k1.iter().map(|v| v - 1.0).chain(c1).chain(b1).chain(semi) {
            spectral = spectral.max(v.abs());
        }
    }
    let default = table[0];
    let pass = default.iter().all(|&r| r < C2_RESIDUAL)
        && nodes.iter().all(|&n| n <= C2_MAX_NODES)
        && orders.iter().all(|&o| o >= C2_MIN_ORDER - C2_ORDER_SLACK)
        && spectral < C2_SPECTRAL;
    outcome(
        pass,
        format!(
            "residuals K1 {:.1e} C1 {:.1e} B1 {:.1e} semigroup {:.1e} (< {C2_RESIDUAL}) at {} nodes; orders {:.4?} (>= {C2_MIN_ORDER} - {C2_ORDER_SLACK}); torus {spectral:.1e}",
            default[0], default[1], default[2], default[3], nodes[0], orders
        ),
    )
}

struct OmegaSetup {
    family: SpectralFamily<f64>,
}

impl OmegaSetup {
    fn new() -> Self {
        OmegaSetup { family: torus(128, 8.0) }
    }

    fn pert(&self) -> Perturbation<'_, f64, SpectralFamily<f64>> {
        Perturbation::new(&self.family, nodal(&self.family, |x| parabola(x) + 0.2)).unwrap()
    }
}

fn c3_c4(setup: &OmegaSetup) -> (Outcome, Outcome) {
    let pert = setup.pert();
    let cfg = OmegaConfig { epsilon: C4_EPSILON, ..OmegaConfig::default() };
    let start = Instant::now();
    let lower = Segment::<Q>::of((1, 4), (1, 2)).unwrap();
    let (w_lower, rep) = omega_segment(&pert, &lower, &cfg, None, true).unwrap();
    let elapsed = start.elapsed();
    let tail: Vec<f64> =
        rep.ratios.iter().zip(&rep.depths[1..]).filter(|(_, &d)| d >= C3_FROM_DEPTH).map(|(r, _)| *r).collect();
    let ratios_ok = !tail.is_empty() && tail.iter().all(|r| (r - C3_RATIO).abs() <= C3_RATIO_BAND);
    let independence = rep.independence.unwrap_or(f64::INFINITY);
    let c3 = outcome(
        ratios_ok && independence <= C3_INDEPENDENCE * cfg.tolerance && elapsed < C3_RUNTIME,
        format!(
            "increment ratios from depth {C3_FROM_DEPTH}: {:.3}..{:.3} ({C3_RATIO} ± {C3_RATIO_BAND}); second sequence gap {independence:.1e} (<= {:.1e}); {:.1}s",
            tail.iter().copied().fold(f64::INFINITY, f64::min),
            tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            C3_INDEPENDENCE * cfg.tolerance,
            elapsed.as_secs_f64()
        ),
    );

    let upper = Segment::<Q>::of((1, 2), (1, 1)).unwrap();
    let whole = Segment::<Q>::of((1, 4), (1, 1)).unwrap();
    let wide = Segment::<Q>::of((1, 8), (1, 2)).unwrap();
    let (w_upper, rep_upper) = omega_segment(&pert, &upper, &cfg, None, false).unwrap();
    let (w_whole, rep_whole) = omega_segment(&pert, &whole, &cfg, None, false).unwrap();
    let (_, rep_wide) = omega_segment(&pert, &wide, &cfg, None, false).unwrap();
    let reports = [&rep, &rep_upper, &rep_whole, &rep_wide];
    let mean_one = reports.iter().map(|r| r.mean_one_residual).fold(0.0, f64::max);
    let min_entry = reports.iter().map(|r| r.min_entry).fold(f64::INFINITY, f64::min);
    // |Δ| > m(Δ) for [1/4, 1] and [1/8, 1/2].
    let l1 = rep_whole.l1_row_norm.max(rep_wide.l1_row_norm);
    let composed: DiscreteKernel<f64> = compose(&w_upper, &w_lower).unwrap();
    let semigroup = composed.max_abs_diff(&w_whole).unwrap();
    let c4 = outcome(
        mean_one < C4_MEAN_ONE
            && min_entry > 0.0
            && semigroup < C4_SEMIGROUP * cfg.tolerance
            && l1 <= 1.0 + C4_L1,
        format!(
            "mean-1 {mean_one:.1e} (< {C4_MEAN_ONE}); min entry {min_entry:.3e} (> 0) at ε = {C4_EPSILON}; semigroup {semigroup:.1e} (< {:.1e}); L¹ row norm {l1:.6} (<= {})",
            C4_SEMIGROUP * cfg.tolerance,
            1.0 + C4_L1
        ),
    );
    (c3, c4)
}

fn c5_phi(setup: &OmegaSetup) -> Outcome {
    let pert = setup.pert();
    let family = &setup.family;
    let cfg = OmegaConfig::default();
    let fields = [nodal(family, parabola), nodal(family, |x| (1.0 - (x - 0.5).abs() / 0.3).max(0.0))];
    let mut constants = Vec::new();
    let mut envelopes = true;
    for y in [0.25, 0.5] {
        for (a, b) in [(y / 8.0, y / 4.0), (y / 4.0, y / 2.0), (y / 2.0, y)] {
            let seg = Segment::<Q>::new(Q::new((a * 64.0) as i128, 64), Q::new((b * 64.0) as i128, 64)).unwrap();
            for phi in &fields {
                let psi = family.apply_k(y, phi);
                let r = phi_property_check(&pert, &psi, y, &seg, &cfg).unwrap();
                envelopes &= r.lower_envelope && r.upper_envelope;
                constants.push(r.constant);
            }
        }
    }
    let mean = constants.iter().sum::<f64>() / constants.len() as f64;
    let spread = constants.iter().map(|c| (c / mean - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        spread <= C5_BAND && envelopes,
        format!(
            "{} constants in {:.3}..{:.3}, max deviation from mean {:.1}% (<= {:.0}%); exp envelopes {}",
            constants.len(),
            constants.iter().copied().fold(f64::INFINITY, f64::min),
            constants.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            100.0 * spread,
            100.0 * C5_BAND,
            if envelopes { "hold" } else { "fail" }
        ),
    )
}

fn c6_ode() -> Outcome {
    let cfg = OmegaConfig::default();
    let mut residuals = Vec::new();
    for (n, steps) in [(128usize, 32usize), (256, 64), (512, 128)] {
        let family = torus(n, 8.0);
        let pert = Perturbation::new(&family, nodal(&family, |x| parabola(x) + 0.2)).unwrap();
        residuals.push(ode_residual(&pert, n / 2, (0.5, 0.75), steps, &cfg).unwrap().residual);
    }
    let halvings: Vec<f64> = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    outcome(
        residuals[0] < C6_RESIDUAL && halvings.iter().all(|&h| h >= C6_HALVING.0 && h <= C6_HALVING.1),
        format!(
            "residual {:.2e} (< {C6_RESIDUAL}); refinement ratios {:.3?} (in [{}, {}])",
            residuals[0], halvings, C6_HALVING.0, C6_HALVING.1
        ),
    )
}

fn random_partition(rng: &mut ChaCha8Rng, pieces: usize, start: i64) -> Partition<Big> {
    let mut points = vec![Big::integer(start)];
    for _ in 0..pieces {
        let len = Big::ratio(rng.gen_range(1..=12), rng.gen_range(1..=4));
        let last = points.last().unwrap().clone();
        points.push(last + len);
    }
    Partition::from_breakpoints(&points).unwrap()
}

fn c7_partitions() -> Outcome {
    let start = Instant::now();
    let q = |p, r| Big::ratio(p, r);
    let two = Big::integer(2);
    let tau = Partition::from_breakpoints(&[q(0, 1), q(1, 16), q(7, 16), q(1, 2), q(1, 1)]).unwrap();
    let explicit = regularity(tau.pieces(), &two) == (false, true) && !regularity(&tau.pieces()[..3], &two).1;

    let unit = Segment::<Big>::of((0, 1), (1, 1)).unwrap();
    let mut certified = 0;
    let mut cases = 0;
    for a in [2usize, 3, 5] {
        for lambda in [q(3, 2), q(2, 1), q(3, 1)] {
            cases += 1;
            if let Ok(ex) = counterexample_partition(&unit, a, &lambda) {
                if ex.tau_weakly_regular && ex.tau1_violates && ex.tau.span() == unit {
                    certified += 1;
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bound_ok = 0;
    let mut instances = 0;
    while instances < C7_RANDOM {
        let k = rng.gen_range(3..=12);
        let tau = random_partition(&mut rng, k, 0);
        // Smallest λ for which τ is weakly λ-regular, nudged up at random.
        let lambda = weak_regularity_ratio(tau.pieces()) * q(rng.gen_range(8..=12), 8);
        let removed: Vec<usize> = (0..k).filter(|_| rng.gen_bool(0.25)).collect();
        if lambda.clone() * Big::integer(removed.len() as i64) >= Big::integer(k as i64) {
            continue;
        }
        instances += 1;
        if let Ok((_, true)) = subpartition_bound(&tau, &removed, &lambda) {
            bound_ok += 1;
        }
    }

    let mut exhaustive = 0usize;
    let mut failures = 0usize;
    for k in 1..=C7_MAX_PIECES {
        let dyadic_k = make_dyadic(&Segment::<Big>::of((1, 2), (1, 1)).unwrap(), 0);
        let mus = [random_partition(&mut rng, k, 1), random_partition(&mut rng, k, 3), dyadic_k];
        for mu in mus.iter().filter(|m| m.len() == k || k == 1) {
            let r = lambda_beta_exhaustive(mu).unwrap();
            exhaustive += r.subpartitions;
            failures += r.union_bound_failures + r.regularity_failures;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        explicit && certified == cases && bound_ok == instances && failures == 0 && elapsed < C7_RUNTIME,
        format!(
            "explicit example {}; certificates {certified}/{cases}; subpartition bound {bound_ok}/{instances}; {exhaustive} subpartitions up to K = {C7_MAX_PIECES}, {failures} failures; {:.2}s",
            if explicit { "reproduced" } else { "NOT reproduced" },
            elapsed.as_secs_f64()
        ),
    )
}

fn stability(ratios: &[f64]) -> f64 {
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn c8_main_theorem() -> Outcome {
    let family = torus(512, 8.0);
    let mesh = family.mesh();
    let pert = Perturbation::new(&family, nodal(&family, |x| 0.2 + (1.0 - x.abs()).max(0.0))).unwrap();
    let profile = variation_profile(&pert, DELTA, HEIGHT_CELLS).unwrap();
    let anchor = pert.trace(C8_Y_ANCHOR);
    let mut worst = 0.0f64;
    let mut all_finite = true;
    let mut summary = Vec::new();
    for r in C8_RADII {
        let ratios: Vec<f64> = C8_CENTERS
            .iter()
            .map(|&c| {
                let z = nearest_node(mesh, c);
                bourgain_search(mesh, &profile, &anchor, &[c, 0.0], anchor[z], r, C8_Y_ANCHOR, None).unwrap().ratio
            })
            .collect();
        all_finite &= ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        worst = worst.max(stability(&ratios));
        summary.push(format!("flat r={r}: c={:.3}", ratios.iter().copied().fold(0.0, f64::max)));
    }
    let graph = LipschitzGraph::<f64>::tent(2, 0.1, 0.5, 0.01).unwrap();
    let field = HarmonicField {
        data: Vec::new(),
        bound: 1.0,
        form: FieldForm::ExteriorPole { center: vec![0.0], depth: 0.5, scale: 1.0 },
    };
    for r in C8_RADII {
        let ratios: Vec<f64> = C8_CENTERS
            .iter()
            .map(|&c| {
                tent_bourgain_search(
                    &graph,
                    &field,
                    &[c],
                    r,
                    5,
                    C8_Y_ANCHOR,
                    DELTA,
                    HEIGHT_CELLS,
                    512,
                    11,
                    &WalkConfig::default(),
                )
                .unwrap()
                .best
                .ratio
            })
            .collect();
        all_finite &= ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        worst = worst.max(stability(&ratios));
        summary.push(format!("tent r={r}: c={:.3}", ratios.iter().copied().fold(0.0, f64::max)));
    }
    outcome(
        all_finite && worst <= C8_STABILITY,
        format!(
            "{} balls per domain; {}; worst max/min across centers {worst:.2} (<= {C8_STABILITY})",
            C8_CENTERS.len() * C8_RADII.len(),
            summary.join(", ")
        ),
    )
}

fn c9_scaling() -> Outcome {
    let start = Instant::now();
    let family = torus(1024, 8.0);
    let mesh = family.mesh();
    let pert = Perturbation::new(&family, nodal(&family, |x| 0.2 + (1.0 - x.abs()).max(0.0))).unwrap();
    let cfg = OmegaConfig { epsilon: C9_EPSILON, ..OmegaConfig::default() };
    let center = nearest_node(mesh, 0.0);
    let kappa = kappa_exit(&family, center, C8_Y_ANCHOR - 1.0).unwrap();
    let tests = gaussian_tests(mesh, 10, &[0.0, 0.0], 2.0, 0.5);
    let (nu, report) = nu_approx::<_, _, Q>(&pert, &kappa, 7, &tests, 1e-2, &cfg).unwrap();
    let radii: Vec<f64> = (1..=5).map(|k| 0.5f64.powi(k)).collect();
    let fit = scaling_exponent(mesh, &nu, &[0.0, 0.0], &radii).unwrap();
    let floor = (2.0 - 1.0) / 2.0 - C9_SLACK;
    let elapsed = start.elapsed();
    outcome(
        fit.radii.len() >= 5 && fit.slope >= floor && elapsed < C9_RUNTIME,
        format!(
            "slope {:.3} ± {:.3} over {} radii (>= {floor}); ν mass {:.6}, sequences agree {}; {:.1}s",
            fit.slope,
            fit.std_error,
            fit.radii.len(),
            nu.total,
            report.sequences_agree,
            elapsed.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report("C1 oracle equivalence", c1_oracle());
    report("C2 kernel identities", c2_identities());
    let setup = OmegaSetup::new();
    let (c3, c4) = c3_c4(&setup);
    report("C3 Π convergence", c3);
    report("C4 ω_Δ properties", c4);
    report("C5 Φ-property", c5_phi(&setup));
    report("C6 differential equation", c6_ode());
    report("C7 partition suite", c7_partitions());
    report("C8 bounded-variation points", c8_main_theorem());
    report("C9 scaling exponent", c9_scaling());
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
