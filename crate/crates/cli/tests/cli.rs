use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bourgain_cli::config::CheckSelection;
use bourgain_cli::{run, Cache, Check, ExperimentConfig, Relation, RunReport, Series};

fn bourgain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bourgain")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// A quick config: small walk count, exact stages only otherwise.
const QUICK: &str = "seed = 11\n[walks]\ncount = 4000\n[partitions]\nrandom_instances = 20\nmax_pieces = 6\n";

#[test]
fn same_config_and_seed_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let checks = "--checks=geometry,harmonic,kernels,partitions";
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = bourgain(&["--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap(), "run", checks]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ja = fs::read(a.join("report.json")).unwrap();
    assert_eq!(ja, fs::read(b.join("report.json")).unwrap());
    assert_eq!(fs::read(a.join("harmonic_oracle.csv")).unwrap(), fs::read(b.join("harmonic_oracle.csv")).unwrap());
    // A different seed moves the Monte Carlo estimate.
    let c = dir.path().join("c");
    let o = bourgain(&["--config", &cfg, "--seed", "12", "--out", c.to_str().unwrap(), "run", checks]);
    assert!(o.status.success());
    assert_ne!(fs::read(c.join("harmonic_oracle.csv")).unwrap(), fs::read(a.join("harmonic_oracle.csv")).unwrap());
}

#[test]
fn cached_monte_carlo_results_reproduce_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    let args = ["--config", &cfg, "--out", out.to_str().unwrap(), "harmonic"];
    assert!(bourgain(&args).status.success());
    let first = fs::read(out.join("report.json")).unwrap();
    assert_eq!(fs::read_dir(out.join("cache")).unwrap().count(), 1);
    assert!(bourgain(&args).status.success());
    assert_eq!(first, fs::read(out.join("report.json")).unwrap());
}

#[test]
fn epsilon_out_of_range_is_rejected_before_any_stage_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[measure]\nepsilon = 1.5\n");
    let out = dir.path().join("out");
    let o = bourgain(&["--config", &cfg, "--out", out.to_str().unwrap(), "run"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("invalid configuration") && err.contains("measure.epsilon"), "{err}");
    assert!(!out.exists());

    let mut cfg = ExperimentConfig::default();
    cfg.omega.driver.epsilon = 1.5;
    assert!(run(&cfg, &Cache::disabled()).is_err());
}

#[test]
fn empty_check_set_gives_a_valid_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bourgain(&["--out", out.to_str().unwrap(), "run", "--checks", "none"]);
    assert!(o.status.success());
    let report = RunReport::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report.checks.is_empty());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["checks"].as_array().unwrap().len(), 0);
    assert!(report.to_table().contains("0 checks"));
}

#[test]
fn three_checks_give_three_rows_and_three_entries() {
    let mut report = RunReport::new(&ExperimentConfig::default());
    report.checks.push(Check::new("kernels", "K_y 1 = 1", 1e-15, Relation::Below, 1e-12, true));
    report.checks.push(Check::new("omega", "min entry", 0.03, Relation::AtLeast, 0.0, false));
    report.checks.push(Check::new("measure", "scaling slope", 0.3, Relation::AtLeast, 0.4, false));
    let table = report.to_table();
    let rows: Vec<&str> = table.lines().skip(2).take_while(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].contains("WARN"));
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["checks"].as_array().unwrap().len(), 3);
    assert_eq!(report.hard_failures(), 0);
}

#[test]
fn csv_series_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Series::new("awkward", &["a", "b", "c"]);
    s.push(vec![1.0 / 3.0, 1e-300, -0.0]);
    s.push(vec![std::f64::consts::PI, f64::MAX, 5e-324]);
    s.push(vec![0.1 + 0.2, -1234.5678e10, 2.0f64.sqrt()]);
    let path = dir.path().join("awkward.csv");
    s.write_csv(&path).unwrap();
    let back = Series::read_csv(&path).unwrap();
    assert_eq!(back.columns, s.columns);
    for (r, q) in back.rows.iter().zip(&s.rows) {
        for (x, y) in r.iter().zip(q) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn builtin_flat_identities_all_pass() {
    let cfg = ExperimentConfig {
        checks: CheckSelection { kernels: true, ..CheckSelection::none() },
        ..ExperimentConfig::default()
    };
    let report = run(&cfg, &Cache::disabled()).unwrap();
    assert_eq!(report.checks.len(), 5);
    assert!(report.checks.iter().all(|c| c.passed && c.hard), "{}", report.to_table());
}

#[test]
fn failed_hard_check_sets_the_exit_code_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[kernels]\ntolerance = 1e-300\n");
    let out = dir.path().join("out");
    let o = bourgain(&["--config", &cfg, "--out", out.to_str().unwrap(), "kernels"]);
    assert!(!o.status.success());
    let report = RunReport::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report.hard_failures() > 0);
    let again = bourgain(&["report", "--input", out.join("report.json").to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&again.stdout).contains("FAIL"));
}

#[test]
fn subcommand_overrides_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bourgain(&[
        "--out",
        out.to_str().unwrap(),
        "variation",
        "bourgain",
        "--center",
        "-0.4",
        "--radius",
        "0.2",
        "--yanchor",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = RunReport::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.config.variation.centers, vec![-0.4]);
    assert_eq!(report.config.variation.y_anchor, 3.0);
    let points = Series::read_csv(&out.join("bourgain_points.csv")).unwrap();
    assert_eq!(points.rows.len(), 1);
    assert!((points.rows[0][2] + 0.4).abs() <= 0.2 + 1e-12);
}
