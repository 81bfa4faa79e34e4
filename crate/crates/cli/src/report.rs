//! Run reports and their JSON, text-table and CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};

/// How a measured value is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }

    pub fn holds(self, measured: f64, tolerance: f64) -> bool {
        match self {
            Relation::Below => measured < tolerance,
            Relation::AtMost => measured <= tolerance,
            Relation::AtLeast => measured >= tolerance,
        }
    }
}

/// One pass/fail comparison. Hard checks are exact or deterministic identities; a failed
/// hard check makes the run exit nonzero. Soft checks are convergence or statistical
/// diagnostics and are only recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub module: String,
    pub name: String,
    pub passed: bool,
    pub hard: bool,
    pub measured: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn new(module: &str, name: &str, measured: f64, relation: Relation, tolerance: f64, hard: bool) -> Self {
        Check {
            module: module.into(),
            name: name.into(),
            passed: relation.holds(measured, tolerance),
            hard,
            measured,
            relation,
            tolerance,
            detail: String::new(),
        }
    }

    /// A yes/no condition, recorded as measured 1 or 0 against `>= 1`.
    pub fn flag(module: &str, name: &str, ok: bool, hard: bool) -> Self {
        Check::new(module, name, if ok { 1.0 } else { 0.0 }, Relation::AtLeast, 1.0, hard)
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// A numeric table written as one CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Series { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in r.deserialize() {
            let row: Vec<f64> = record.with_context(|| format!("parsing {}", path.display()))?;
            ensure!(row.len() == columns.len(), "ragged row in {}", path.display());
            rows.push(row);
        }
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        Ok(Series { name, columns, rows })
    }
}

/// Wall-clock time of one stage; kept out of the JSON so that reports are reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// The fully resolved configuration, so every tolerance in force is on record.
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub constants: BTreeMap<String, f64>,
    /// File names of the CSV series.
    pub series_files: Vec<String>,
    #[serde(skip)]
    pub series: Vec<Series>,
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

impl RunReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunReport {
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config.hash(),
            seed: config.seed,
            config: config.clone(),
            checks: Vec::new(),
            constants: BTreeMap::new(),
            series_files: Vec::new(),
            series: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn add_series(&mut self, series: Series) {
        self.series_files.push(format!("{}.csv", series.name));
        self.series.push(series);
    }

    pub fn hard_failures(&self) -> usize {
        self.checks.iter().filter(|c| c.hard && !c.passed).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("parsing report JSON")
    }

    /// SHA-256 of the JSON rendering.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_json().as_bytes()))
    }

    /// Fixed-width table: header, rule, one row per check, then a summary line.
    pub fn to_table(&self) -> String {
        let header = ["module", "check", "status", "measured", "rel", "tolerance", "detail"];
        let rows: Vec<[String; 7]> = self
            .checks
            .iter()
            .map(|c| {
                let status = match (c.passed, c.hard) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "WARN",
                };
                [
                    c.module.clone(),
                    c.name.clone(),
                    status.into(),
                    format!("{:.4e}", c.measured),
                    c.relation.symbol().into(),
                    format!("{:.4e}", c.tolerance),
                    c.detail.clone(),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut out = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if i + 1 == cells.len() {
                    out.push_str(cell);
                } else {
                    let pad = w - cell.chars().count();
                    let _ = write!(out, "{cell}{}  ", " ".repeat(pad));
                }
            }
            out.trim_end().to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", line(&header.map(String::from)));
        let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        for row in &rows {
            let _ = writeln!(out, "{}", line(row));
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        let _ = writeln!(
            out,
            "\n{} checks, {passed} passed, {} failed ({} hard); config {}; seed {}",
            self.checks.len(),
            self.checks.len() - passed,
            self.hard_failures(),
            &self.config_hash[..12],
            self.seed
        );
        out
    }

    /// Writes `report.json`, `report.txt`, one CSV per series and `timings.csv` to `dir`.
    pub fn emit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        let json = dir.join("report.json");
        fs::write(&json, self.to_json()).with_context(|| format!("writing {}", json.display()))?;
        written.push(json);
        let txt = dir.join("report.txt");
        fs::write(&txt, self.to_table()).with_context(|| format!("writing {}", txt.display()))?;
        written.push(txt);
        for s in &self.series {
            let path = dir.join(format!("{}.csv", s.name));
            s.write_csv(&path)?;
            written.push(path);
        }
        let timings = dir.join("timings.csv");
        let mut w = csv::Writer::from_path(&timings)?;
        w.write_record(["stage", "seconds"])?;
        for t in &self.timings {
            w.write_record([t.stage.clone(), format!("{:.3}", t.seconds)])?;
        }
        w.flush()?;
        written.push(timings);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_compare_as_written() {
        assert!(Relation::Below.holds(1.0, 2.0) && !Relation::Below.holds(2.0, 2.0));
        assert!(Relation::AtMost.holds(2.0, 2.0));
        assert!(Relation::AtLeast.holds(2.0, 2.0) && !Relation::AtLeast.holds(1.0, 2.0));
        assert!(!Relation::Below.holds(f64::NAN, 1.0));
    }

    #[test]
    fn json_round_trip_keeps_checks_and_drops_timings() {
        let mut r = RunReport::new(&ExperimentConfig::default());
        r.checks.push(Check::new("kernels", "K1", 1e-14, Relation::Below, 1e-12, true));
        r.timings.push(Timing { stage: "kernels".into(), seconds: 0.5 });
        let back = RunReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back.checks, r.checks);
        assert!(back.timings.is_empty());
        assert_eq!(back.hash(), r.hash());
    }
}
