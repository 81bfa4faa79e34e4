//! Module stages of a run, each turning the configuration into checks, constants and series.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use bourgain_core::geometry::{BoundaryMesh, MeshSpec};
use bourgain_core::harmonic::{
    estimate_harmonic_measure, halfplane_exit_cdf, ks_statistic, run_walks, FieldForm, HarmonicField,
};
use bourgain_core::kernels::{KernelFamily, Perturbation, SpectralFamily};
use bourgain_core::omega::omega_segment;
use bourgain_core::partitions::{
    counterexample_partition, lambda_beta_exhaustive, regularity, subpartition_bound, weak_regularity_ratio, Exact,
    Partition, Segment,
};
use bourgain_core::variation::{
    bourgain_search, gaussian_tests, kappa_exit, nu_approx, scaling_exponent, tent_bourgain_search, variation_profile,
};
use bourgain_core::Rational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, DomainKind, ExperimentConfig};
use crate::report::{Check, Relation, RunReport, Series, Timing};

/// On-disk store of Monte Carlo results keyed by the hash of their inputs.
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Cache { dir }
    }

    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    pub fn get_or_compute<K: Serialize, T: Serialize + DeserializeOwned>(
        &self,
        kind: &str,
        key: &K,
        compute: impl FnOnce() -> Result<T>,
    ) -> Result<T> {
        let Some(dir) = &self.dir else { return compute() };
        let mut h = Sha256::new();
        h.update(kind.as_bytes());
        h.update(serde_json::to_vec(key)?);
        let path = dir.join(format!("{kind}-{}.json", &hex(&h.finalize())[..16]));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(value) = serde_json::from_str(&text) {
                return Ok(value);
            }
        }
        let value = compute()?;
        std::fs::create_dir_all(dir).with_context(|| format!("creating cache {}", dir.display()))?;
        std::fs::write(&path, serde_json::to_vec(&value)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(value)
    }
}

/// Runs the selected stages in dependency order. A stage error aborts the run with the
/// stage name as context; failed checks are recorded and the run continues.
pub fn run(cfg: &ExperimentConfig, cache: &Cache) -> Result<RunReport> {
    cfg.validate().context("invalid configuration")?;
    let mut report = RunReport::new(cfg);
    let sel = &cfg.checks;
    type Stage = fn(&ExperimentConfig, &Cache, &mut RunReport) -> Result<()>;
    let stages: [(&str, bool, Stage); 7] = [
        ("geometry", sel.geometry, geometry),
        ("harmonic", sel.harmonic, harmonic),
        ("kernels", sel.kernels, kernels),
        ("partitions", sel.partitions, partitions),
        ("omega", sel.omega, omega),
        ("variation", sel.variation, variation),
        ("measure", sel.measure, measure),
    ];
    for (name, enabled, stage) in stages {
        if !enabled {
            continue;
        }
        let start = Instant::now();
        stage(cfg, cache, &mut report).with_context(|| format!("stage {name}"))?;
        report.timings.push(Timing { stage: name.into(), seconds: start.elapsed().as_secs_f64() });
    }
    Ok(report)
}

fn torus(cfg: &ExperimentConfig) -> Result<SpectralFamily<f64>> {
    Ok(SpectralFamily::new(BoundaryMesh::periodic(2, cfg.mesh.period, cfg.mesh.nodes, 1.0)?)?)
}

/// Boundary data `0.2 + max(0, 1 − |x|)` of the torus stages.
fn tent_data(family: &SpectralFamily<f64>) -> Vec<f64> {
    family.mesh().nodes().iter().map(|x| 0.2 + (1.0 - x[0].abs()).max(0.0)).collect()
}

fn nearest_node(mesh: &BoundaryMesh<f64>, x: f64) -> usize {
    let target = [x, 0.0];
    (0..mesh.len())
        .min_by(|&a, &b| {
            mesh.boundary_distance(mesh.node(a), &target).total_cmp(&mesh.boundary_distance(mesh.node(b), &target))
        })
        .expect("meshes are nonempty")
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}

fn geometry(cfg: &ExperimentConfig, _: &Cache, report: &mut RunReport) -> Result<()> {
    let graph = cfg.graph()?;
    let l = graph.declared_lipschitz();
    report.checks.push(
        Check::new("geometry", "lipschitz", graph.measured_lipschitz(), Relation::AtMost, l * (1.0 + 1e-12), true)
            .detail(format!("measured facet Lipschitz constant against the declared {l}")),
    );
    // y >= dist((x, Φ(x) + y), S) >= y / sqrt(L² + 1).
    let mut worst = 0.0f64;
    let mut profile = Series::new("geometry_profile", &["x", "phi"]);
    for i in 0..=200 {
        let x = -1.0 + 0.01 * i as f64;
        let phi = graph.height(&[x]);
        profile.push(vec![x, phi]);
        for y in [0.01, 0.1, 0.5, 1.0] {
            let dist = graph.distance_to_boundary(&[x, phi + y])?;
            worst = worst.max(dist - y).max(y / (l * l + 1.0).sqrt() - dist);
        }
    }
    report.checks.push(
        Check::new("geometry", "distance bounds", worst, Relation::AtMost, 1e-12, true)
            .detail("largest violation of y >= dist >= y/sqrt(L²+1) over 804 points"),
    );
    let mesh = BoundaryMesh::flat_exact(&MeshSpec::uniform(cfg.mesh.oracle_radius, cfg.mesh.oracle_resolution), 1.0)?;
    let tail = 1.0 - 2.0 / std::f64::consts::PI * cfg.mesh.oracle_radius.atan();
    report.checks.push(
        Check::new("geometry", "oracle mesh tail", (mesh.tail_mass() - tail).abs(), Relation::Below, 1e-12, true)
            .detail(format!("{} cells, tail mass {:.6}", mesh.len(), mesh.tail_mass())),
    );
    report.constants.insert("geometry.lipschitz".into(), l);
    report.add_series(profile);
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct OracleRun {
    x: Vec<f64>,
    exact: Vec<f64>,
    estimate: Vec<f64>,
    std_error: Vec<f64>,
    worst_z: f64,
    ks: f64,
}

fn harmonic(cfg: &ExperimentConfig, cache: &Cache, report: &mut RunReport) -> Result<()> {
    let w = &cfg.walks;
    let key = (&cfg.mesh, w, cfg.seed);
    let run = cache.get_or_compute("oracle", &key, || {
        let graph = bourgain_core::geometry::LipschitzGraph::<f64>::flat(2);
        let mesh =
            BoundaryMesh::flat_exact(&MeshSpec::uniform(cfg.mesh.oracle_radius, cfg.mesh.oracle_resolution), 1.0)?;
        let walk = cfg.walk();
        let pole = [0.0, 1.0];
        let est = estimate_harmonic_measure(&graph, &pole, &mesh, w.count, cfg.seed, &walk)?;
        let n = w.count as f64;
        let z = |mc: f64, exact: f64| (mc - exact).abs() / (exact * (1.0 - exact) / n).sqrt();
        let worst_z =
            est.masses.iter().zip(mesh.weights()).map(|(&m, &e)| z(m, e)).fold(z(est.tail, mesh.tail_mass()), f64::max);
        let merge = |mut a: Vec<f64>, b: Vec<f64>| {
            a.extend(b);
            a
        };
        let visit = |acc: &mut Vec<f64>, hit: &bourgain_core::harmonic::WalkHit<f64>| acc.push(hit.point[0]);
        let mut exits = run_walks(&graph, &pole, w.count, cfg.seed.wrapping_add(1), &walk, Vec::new, visit, merge)?;
        let ks = ks_statistic(&mut exits, |t| halfplane_exit_cdf(0.0, 1.0, t));
        Ok(OracleRun {
            x: mesh.nodes().iter().map(|p| p[0]).collect(),
            exact: mesh.weights().to_vec(),
            estimate: est.masses.clone(),
            std_error: est.standard_errors.clone(),
            worst_z,
            ks,
        })
    })?;
    let detail = format!("flat half plane, pole (0, 1), {} walks, {} cells + tail", w.count, run.x.len());
    report.checks.push(
        Check::new("harmonic", "cell masses within z", run.worst_z, Relation::AtMost, w.sigmas, false)
            .detail(detail.clone()),
    );
    report
        .checks
        .push(Check::new("harmonic", "KS statistic", run.ks, Relation::Below, w.ks_limit, false).detail(detail));
    let mut series = Series::new("harmonic_oracle", &["x", "exact", "estimate", "std_error"]);
    for i in 0..run.x.len() {
        series.push(vec![run.x[i], run.exact[i], run.estimate[i], run.std_error[i]]);
    }
    report.add_series(series);
    Ok(())
}

fn kernels(cfg: &ExperimentConfig, _: &Cache, report: &mut RunReport) -> Result<()> {
    let family = torus(cfg)?;
    let n = family.len();
    let pert = Perturbation::new(&family, tent_data(&family))?;
    let one = vec![1.0; n];
    let f: Vec<f64> = family.mesh().nodes().iter().map(|x| (-x[0] * x[0]).exp()).collect();
    let m: Vec<f64> = family.mesh().nodes().iter().map(|x| 1.0 + (x[0]).cos()).collect();
    let mut series = Series::new("kernel_identities", &["y", "k1", "c1", "b1", "semigroup", "duality"]);
    let mut worst = [0.0f64; 5];
    for &y in &cfg.kernels.heights {
        let k1 = max_abs(family.apply_k(y, &one).iter().map(|v| v - 1.0));
        let c1 = max_abs(pert.apply_c(y, &one));
        let b1 = max_abs(pert.apply_b(y, &one));
        let two_step = family.apply_k(y, &family.apply_k(y, &f));
        let semigroup = max_abs(two_step.iter().zip(family.apply_k(2.0 * y, &f)).map(|(a, b)| a - b));
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let lhs = dot(&m, &family.apply_k(y, &f));
        let duality = (lhs - dot(&family.adjoint_k(y, &m), &f)).abs() / lhs.abs();
        let row = [k1, c1, b1, semigroup, duality];
        for (w, r) in worst.iter_mut().zip(row) {
            *w = w.max(r);
        }
        series.push(vec![y, k1, c1, b1, semigroup, duality]);
    }
    let names = ["K_y 1 = 1", "C_y 1 = 0", "B_y 1 = 0", "semigroup", "adjoint duality"];
    let detail = format!("torus of period {} with {n} nodes, heights {:?}", cfg.mesh.period, cfg.kernels.heights);
    for (name, value) in names.iter().zip(worst) {
        report.checks.push(
            Check::new("kernels", name, value, Relation::Below, cfg.kernels.tolerance, true).detail(detail.clone()),
        );
    }
    report.add_series(series);
    Ok(())
}

fn random_partition(rng: &mut ChaCha8Rng, pieces: usize, start: i64) -> Result<Partition<Rational>> {
    let mut points = vec![Rational::integer(start)];
    for _ in 0..pieces {
        let len = Rational::ratio(rng.gen_range(1..=12), rng.gen_range(1..=4));
        let last = points.last().expect("starts nonempty").clone();
        points.push(last + len);
    }
    Ok(Partition::from_breakpoints(&points)?)
}

fn partitions(cfg: &ExperimentConfig, _: &Cache, report: &mut RunReport) -> Result<()> {
    let q = Rational::ratio;
    let two = Rational::integer(2);
    let tau = Partition::from_breakpoints(&[q(0, 1), q(1, 16), q(7, 16), q(1, 2), q(1, 1)])?;
    let explicit = regularity(tau.pieces(), &two) == (false, true) && !regularity(&tau.pieces()[..3], &two).1;
    report.checks.push(
        Check::flag("partitions", "weakly 2-regular counterexample", explicit, true)
            .detail("[0,1/16), [1/16,7/16), [7/16,1/2), [1/2,1]: weakly but not strongly 2-regular; first three pieces not weakly 2-regular"),
    );

    let unit = Segment::<Rational>::of((0, 1), (1, 1))?;
    let (mut certified, mut cases) = (0, 0);
    for a in [2usize, 3, 5] {
        for lambda in [q(3, 2), q(2, 1), q(3, 1)] {
            cases += 1;
            let ex = counterexample_partition(&unit, a, &lambda)?;
            certified += usize::from(ex.tau_weakly_regular && ex.tau1_violates && ex.tau.span() == unit);
        }
    }
    report.checks.push(
        Check::new(
            "partitions",
            "counterexample certificates",
            certified as f64,
            Relation::AtLeast,
            cases as f64,
            true,
        )
        .detail("A in {2, 3, 5}, λ in {3/2, 2, 3}, exact arithmetic"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut instances, mut bound_ok) = (0usize, 0usize);
    while instances < cfg.partitions.random_instances {
        let k = rng.gen_range(3..=12);
        let tau = random_partition(&mut rng, k, 0)?;
        let lambda = weak_regularity_ratio(tau.pieces()) * q(rng.gen_range(8..=12), 8);
        let removed: Vec<usize> = (0..k).filter(|_| rng.gen_bool(0.25)).collect();
        if lambda.clone() * Rational::integer(removed.len() as i64) >= Rational::integer(k as i64) {
            continue;
        }
        instances += 1;
        bound_ok += usize::from(subpartition_bound(&tau, &removed, &lambda)?.1);
    }
    report.checks.push(
        Check::new("partitions", "subpartition bound", bound_ok as f64, Relation::AtLeast, instances as f64, true)
            .detail(format!("{instances} random weakly regular partitions")),
    );

    let (mut subpartitions, mut failures) = (0usize, 0usize);
    for k in 1..=cfg.partitions.max_pieces {
        for start in [1, 3] {
            let r = lambda_beta_exhaustive(&random_partition(&mut rng, k, start)?)?;
            subpartitions += r.subpartitions;
            failures += r.union_bound_failures + r.regularity_failures;
        }
    }
    report.checks.push(
        Check::new("partitions", "exhaustive λ-β check", failures as f64, Relation::AtMost, 0.0, true)
            .detail(format!("{subpartitions} subpartitions, up to {} pieces", cfg.partitions.max_pieces)),
    );
    Ok(())
}

fn omega(cfg: &ExperimentConfig, _: &Cache, report: &mut RunReport) -> Result<()> {
    let family = torus(cfg)?;
    let pert = Perturbation::new(&family, tent_data(&family))?;
    let (lo, hi) = cfg.omega_segment()?;
    let segment = Segment::new(lo, hi)?;
    let driver = &cfg.omega.driver;
    let (_, rep) = omega_segment(&pert, &segment, driver, None, true)?;
    let label = format!("[{}, {}] at ε = {}", cfg.omega.segment[0], cfg.omega.segment[1], driver.epsilon);
    let tail: Vec<f64> = rep.ratios.iter().zip(&rep.depths[1..]).filter(|(_, &d)| d >= 4).map(|(r, _)| *r).collect();
    let ratio_dev = if tail.is_empty() { f64::INFINITY } else { max_abs(tail.iter().map(|r| r - 0.5)) };
    report.checks.push(
        Check::new("omega", "increment ratio - 1/2", ratio_dev, Relation::AtMost, cfg.omega.ratio_band, false)
            .detail(format!("{label}; {} ratios from depth 4", tail.len())),
    );
    let independence = rep.independence.unwrap_or(f64::INFINITY);
    report.checks.push(
        Check::new("omega", "second sequence gap", independence, Relation::AtMost, 2.0 * driver.tolerance, false)
            .detail(format!("{label}; final depth {}", rep.final_depth)),
    );
    report.checks.push(
        Check::new("omega", "mean-1 residual", rep.mean_one_residual, Relation::Below, cfg.omega.mean_one_limit, false)
            .detail(label.clone()),
    );
    report.checks.push(Check::new("omega", "min entry", rep.min_entry, Relation::AtLeast, 0.0, false).detail(label));
    report.constants.insert("omega.rate".into(), rep.rate);
    report.constants.insert("omega.l1_row_norm".into(), rep.l1_row_norm);
    let mut series = Series::new("omega_convergence", &["depth", "mesh_size", "increment"]);
    for k in 0..rep.depths.len() {
        series.push(vec![rep.depths[k] as f64, rep.mesh_sizes[k], rep.increments[k]]);
    }
    report.add_series(series);
    Ok(())
}

fn stability(ratios: &[f64]) -> f64 {
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

#[derive(Serialize, Deserialize)]
struct SearchRow {
    radius: f64,
    center: f64,
    point: f64,
    variation: f64,
    std_error: f64,
    ratio: f64,
}

fn variation(cfg: &ExperimentConfig, cache: &Cache, report: &mut RunReport) -> Result<()> {
    let v = &cfg.variation;
    let rows: Vec<SearchRow> = match (cfg.domain.kind, &cfg.domain.graph_file) {
        (DomainKind::Flat, None) => {
            let family = torus(cfg)?;
            let mesh = family.mesh();
            let pert = Perturbation::new(&family, tent_data(&family))?;
            let profile = variation_profile(&pert, v.delta, v.cells)?;
            report.checks.push(
                Check::new("variation", "route gap", profile.route_gap, Relation::Below, 1e-8, true)
                    .detail("relative max gap between the B-route and the K-route of V"),
            );
            report.checks.push(
                Check::new(
                    "variation",
                    "vertical lower bound",
                    -profile.lower_bound_margin(),
                    Relation::AtMost,
                    profile.tolerance,
                    true,
                )
                .detail("largest excess of ∫‖∇u(x_3y)‖dy over V"),
            );
            report.checks.push(
                Check::new(
                    "variation",
                    "height grid change",
                    profile.grid_change,
                    Relation::AtMost,
                    bourgain_core::variation::GRID_CHANGE_LIMIT,
                    false,
                )
                .detail(format!("δ = {}, {} log cells", v.delta, v.cells)),
            );
            let mut series = Series::new("variation_profile", &["x", "v", "v_kernel_route", "radial", "lower_bound"]);
            for i in 0..mesh.len() {
                series.push(vec![
                    mesh.node(i)[0],
                    profile.values[i],
                    profile.via_kernel[i],
                    profile.radial[i],
                    profile.lower_bound[i],
                ]);
            }
            report.add_series(series);
            let anchor = pert.trace(v.y_anchor);
            let mut rows = Vec::new();
            for &r in &v.radii {
                for &c in &v.centers {
                    let z = nearest_node(mesh, c);
                    let p = bourgain_search(mesh, &profile, &anchor, &[c, 0.0], anchor[z], r, v.y_anchor, None)?;
                    rows.push(SearchRow {
                        radius: r,
                        center: c,
                        point: p.point[0],
                        variation: p.variation,
                        std_error: 0.0,
                        ratio: p.ratio,
                    });
                }
            }
            rows
        }
        _ => {
            let graph = cfg.graph()?;
            let field = HarmonicField {
                data: Vec::new(),
                bound: 1.0,
                form: FieldForm::ExteriorPole { center: vec![0.0], depth: 0.5, scale: 1.0 },
            };
            let key = (&cfg.domain, v, cfg.seed, &cfg.walks);
            cache.get_or_compute("tent-search", &key, || {
                let mut rows = Vec::new();
                for &r in &v.radii {
                    for &c in &v.centers {
                        let s = tent_bourgain_search(
                            &graph,
                            &field,
                            &[c],
                            r,
                            v.samples,
                            v.y_anchor,
                            v.delta,
                            v.cells,
                            v.walks_per_height,
                            cfg.seed,
                            &cfg.walk(),
                        )?;
                        let b = s.best;
                        rows.push(SearchRow {
                            radius: r,
                            center: c,
                            point: b.point[0],
                            variation: b.variation,
                            std_error: b.std_error,
                            ratio: b.ratio,
                        });
                    }
                }
                Ok(rows)
            })?
        }
    };
    let mut series = Series::new("bourgain_points", &["radius", "center", "point", "variation", "std_error", "ratio"]);
    for row in &rows {
        series.push(vec![row.radius, row.center, row.point, row.variation, row.std_error, row.ratio]);
    }
    report.add_series(series);
    if v.centers.is_empty() {
        return Ok(());
    }
    for &r in &v.radii {
        let ratios: Vec<f64> = rows.iter().filter(|row| row.radius == r).map(|row| row.ratio).collect();
        let finite = ratios.iter().all(|c| c.is_finite() && *c > 0.0);
        let spread = if finite { stability(&ratios) } else { f64::INFINITY };
        report.checks.push(
            Check::new("variation", &format!("V/u stability at r = {r}"), spread, Relation::AtMost, v.stability, false)
                .detail(format!("max/min of V(x*)/u(x*_y) over {} centers, y = {}", ratios.len(), v.y_anchor)),
        );
        report.constants.insert(format!("variation.c_max.r={r}"), ratios.iter().copied().fold(0.0, f64::max));
    }
    Ok(())
}

fn measure(cfg: &ExperimentConfig, _: &Cache, report: &mut RunReport) -> Result<()> {
    let me = &cfg.measure;
    let family = torus(cfg)?;
    let mesh = family.mesh();
    let pert = Perturbation::new(&family, tent_data(&family))?;
    let driver = cfg.omega.driver.with_epsilon(me.epsilon);
    let center = nearest_node(mesh, me.center);
    let kappa = kappa_exit(&family, center, cfg.variation.y_anchor - 1.0)?;
    let tests = gaussian_tests(mesh, me.tests, &[me.center, 0.0], 2.0, 0.5);
    let (nu, rep) = nu_approx::<_, _, Rational>(&pert, &kappa, me.levels, &tests, me.cauchy_tolerance, &driver)?;
    let detail = format!("ε = {}, down to y = 2^-{}, {} test functions", me.epsilon, me.levels, me.tests);
    report.checks.push(
        Check::new("measure", "ν mass defect", (1.0 - nu.total).abs(), Relation::AtMost, me.cauchy_tolerance, false)
            .detail(detail.clone()),
    );
    report.checks.push(
        Check::new("measure", "second sequence gap", rep.alt_gap, Relation::AtMost, 2.0 * rep.tolerance, false)
            .detail(format!("endpoint 3^-j = {:.4e}", rep.alt_y)),
    );
    let fit = scaling_exponent(mesh, &nu, &[me.center, 0.0], &me.radii)?;
    let floor = 0.5 - me.slope_slack;
    report.checks.push(Check::new("measure", "scaling slope", fit.slope, Relation::AtLeast, floor, false).detail(
        format!("{} radii, std error {:.3}, floor (d-1)/2 - {}", fit.radii.len(), fit.std_error, me.slope_slack),
    ));
    report.constants.insert("measure.slope".into(), fit.slope);
    report.constants.insert("measure.nu_total".into(), nu.total);
    let density = nu.density(mesh);
    let mut s = Series::new("nu_density", &["x", "density", "mass"]);
    for ((x, rho), m) in mesh.nodes().iter().zip(&density).zip(&nu.weights) {
        s.push(vec![x[0], *rho, *m]);
    }
    report.add_series(s);
    let mut s = Series::new("ball_masses", &["radius", "mass"]);
    for (r, m) in fit.radii.iter().zip(&fit.masses) {
        s.push(vec![*r, *m]);
    }
    report.add_series(s);
    Ok(())
}
