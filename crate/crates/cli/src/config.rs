//! Experiment configuration: one TOML section per module.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use bourgain_core::geometry::LipschitzGraph;
use bourgain_core::harmonic::WalkConfig;
use bourgain_core::omega::OmegaConfig;
use bourgain_core::partitions::Exact;
use bourgain_core::Rational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub walks: WalksConfig,
    pub kernels: KernelsConfig,
    pub partitions: PartitionsConfig,
    pub omega: OmegaSection,
    pub variation: VariationConfig,
    pub measure: MeasureConfig,
    pub checks: CheckSelection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Flat,
    Tent,
    RandomPl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    /// JSON-serialized graph; overrides `kind` when present.
    pub graph_file: Option<PathBuf>,
    /// Tent height.
    pub apex: f64,
    /// Slope bound of a random piecewise-linear graph.
    pub lipschitz: f64,
    /// Support radius of the tent or random graph.
    pub base: f64,
    pub spacing: f64,
    pub knots: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Period and node count of the flat torus used by the kernel, Ω and ν stages.
    pub period: f64,
    pub nodes: usize,
    /// Truncation radius and cell size of the exact flat mesh of the walk oracle.
    pub oracle_radius: f64,
    pub oracle_resolution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalksConfig {
    pub count: usize,
    pub shell: f64,
    pub max_steps: usize,
    /// Largest per-cell |z| score against the exact law.
    pub sigmas: f64,
    pub ks_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsConfig {
    pub heights: Vec<f64>,
    /// Residual limit of the exact torus identities.
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionsConfig {
    pub random_instances: usize,
    pub max_pieces: usize,
}

// No `deny_unknown_fields` here: serde does not support it together with `flatten`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OmegaSection {
    /// Segment as two rationals `"p/q"`.
    pub segment: [String; 2],
    /// Band of the Cauchy increment ratio around one half.
    pub ratio_band: f64,
    pub mean_one_limit: f64,
    #[serde(flatten)]
    pub driver: OmegaConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationConfig {
    pub delta: f64,
    pub cells: usize,
    pub y_anchor: f64,
    pub centers: Vec<f64>,
    pub radii: Vec<f64>,
    /// Largest allowed max/min of `V/u` across centers at one radius.
    pub stability: f64,
    /// Tent domains: sample points per ball and walks per height.
    pub samples: usize,
    pub walks_per_height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub epsilon: f64,
    /// ν is approximated down to `y = 2^-levels`.
    pub levels: u32,
    pub tests: usize,
    pub cauchy_tolerance: f64,
    pub center: f64,
    pub radii: Vec<f64>,
    pub slope_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSelection {
    pub geometry: bool,
    pub harmonic: bool,
    pub kernels: bool,
    pub partitions: bool,
    pub omega: bool,
    pub variation: bool,
    pub measure: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            domain: DomainConfig::default(),
            mesh: MeshConfig::default(),
            walks: WalksConfig::default(),
            kernels: KernelsConfig::default(),
            partitions: PartitionsConfig::default(),
            omega: OmegaSection::default(),
            variation: VariationConfig::default(),
            measure: MeasureConfig::default(),
            checks: CheckSelection::default(),
        }
    }
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            kind: DomainKind::Flat,
            graph_file: None,
            apex: 0.1,
            lipschitz: 0.5,
            base: 0.5,
            spacing: 0.01,
            knots: 7,
        }
    }
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { period: 8.0, nodes: 256, oracle_radius: 4.0, oracle_resolution: 0.25 }
    }
}

impl Default for WalksConfig {
    fn default() -> Self {
        let walk = WalkConfig::<f64>::default();
        WalksConfig { count: 100_000, shell: walk.shell, max_steps: walk.max_steps, sigmas: 4.0, ks_limit: 0.01 }
    }
}

impl Default for KernelsConfig {
    fn default() -> Self {
        KernelsConfig { heights: vec![0.125, 0.25, 0.5], tolerance: 1e-12 }
    }
}

impl Default for PartitionsConfig {
    fn default() -> Self {
        PartitionsConfig { random_instances: 200, max_pieces: 10 }
    }
}

impl Default for OmegaSection {
    fn default() -> Self {
        OmegaSection {
            segment: ["1/4".into(), "1/2".into()],
            ratio_band: 0.15,
            mean_one_limit: 1e-3,
            driver: OmegaConfig::default(),
        }
    }
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            delta: 1.0 / 128.0,
            cells: 28,
            y_anchor: 2.0,
            centers: vec![-0.8, -0.4, 0.0, 0.4, 0.8],
            radii: vec![0.1, 0.2],
            stability: 2.0,
            samples: 5,
            walks_per_height: 256,
        }
    }
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            epsilon: 0.05,
            levels: 6,
            tests: 10,
            cauchy_tolerance: 1e-2,
            center: 0.0,
            radii: (1..=5).map(|k| 0.5f64.powi(k)).collect(),
            slope_slack: 0.1,
        }
    }
}

impl Default for CheckSelection {
    fn default() -> Self {
        CheckSelection {
            geometry: true,
            harmonic: true,
            kernels: true,
            partitions: true,
            omega: true,
            variation: true,
            measure: true,
        }
    }
}

impl CheckSelection {
    pub fn none() -> Self {
        CheckSelection {
            geometry: false,
            harmonic: false,
            kernels: false,
            partitions: false,
            omega: false,
            variation: false,
            measure: false,
        }
    }
}

/// Named builtin configurations.
pub fn builtin(name: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    match name {
        "flat" => {}
        "tent" => cfg.domain.kind = DomainKind::Tent,
        "random-pl" => cfg.domain.kind = DomainKind::RandomPl,
        other => bail!("unknown builtin config {other:?} (expected flat, tent or random-pl)"),
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// Reads a TOML file, or a builtin when the path is `builtin:<name>`.
    pub fn load(path: &Path) -> Result<Self> {
        if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("builtin:")) {
            return builtin(name);
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Rejects out-of-range parameters before any computation starts.
    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if let Some(file) = &d.graph_file {
            ensure!(file.exists(), "domain.graph_file {} does not exist", file.display());
        }
        ensure!(d.base > 0.0 && d.base < 1.0, "domain.base must lie in (0, 1), got {}", d.base);
        ensure!(d.apex >= 0.0 && d.spacing > 0.0, "domain.apex must be >= 0 and domain.spacing > 0");
        ensure!(d.lipschitz > 0.0 && d.knots > 0, "domain.lipschitz and domain.knots must be positive");

        let m = &self.mesh;
        ensure!(
            m.period > 0.0 && m.nodes >= 4 && m.nodes.is_multiple_of(2),
            "mesh needs period > 0 and an even node count >= 4"
        );
        ensure!(
            m.oracle_radius > 0.0 && m.oracle_resolution > 0.0,
            "oracle mesh radius and resolution must be positive"
        );

        let w = &self.walks;
        ensure!(w.count >= 2 && w.shell > 0.0 && w.max_steps > 0, "walks need count >= 2, shell > 0, max_steps > 0");
        ensure!(w.sigmas > 0.0 && w.ks_limit > 0.0, "walk tolerances must be positive");

        ensure!(self.kernels.heights.iter().all(|&y| y > 0.0), "kernel heights must be positive");
        ensure!(self.kernels.tolerance > 0.0, "kernels.tolerance must be positive");
        ensure!(self.partitions.max_pieces <= 20, "partitions.max_pieces must be <= 20");

        self.omega.driver.validate().context("omega section")?;
        let (lo, hi) = self.omega_segment()?;
        ensure!(lo > Rational::integer(0) && hi > lo, "omega.segment must satisfy 0 < m < M");
        ensure!(self.omega.ratio_band > 0.0 && self.omega.mean_one_limit > 0.0, "omega tolerances must be positive");

        let v = &self.variation;
        ensure!(v.delta > 0.0 && v.delta < 0.25, "variation.delta must lie in (0, 1/4), got {}", v.delta);
        ensure!(v.cells >= 2 && v.cells.is_multiple_of(2), "variation.cells must be even and >= 2");
        ensure!(v.y_anchor > 1.0, "variation.y_anchor must exceed 1, got {}", v.y_anchor);
        // No centers means a profile-only run.
        ensure!(v.centers.is_empty() || !v.radii.is_empty(), "variation centers need at least one radius");
        ensure!(v.radii.iter().all(|&r| r > 0.0), "variation radii must be positive");
        ensure!(v.stability >= 1.0 && v.samples >= 1 && v.walks_per_height >= 2, "invalid variation search settings");

        let me = &self.measure;
        ensure!((0.0..1.0).contains(&me.epsilon), "measure.epsilon must lie in [0, 1), got {}", me.epsilon);
        ensure!(me.levels >= 2 && me.tests >= 1, "measure needs levels >= 2 and tests >= 1");
        ensure!(me.cauchy_tolerance > 0.0 && me.slope_slack >= 0.0, "measure tolerances must be positive");
        ensure!(me.radii.len() >= 4 && me.radii.iter().all(|&r| r > 0.0), "measure needs at least 4 positive radii");
        Ok(())
    }

    pub fn omega_segment(&self) -> Result<(Rational, Rational)> {
        let parse =
            |s: &str| Rational::parse(s).with_context(|| format!("omega.segment entry {s:?} is not a rational"));
        Ok((parse(&self.omega.segment[0])?, parse(&self.omega.segment[1])?))
    }

    pub fn walk(&self) -> WalkConfig<f64> {
        WalkConfig { shell: self.walks.shell, max_steps: self.walks.max_steps }
    }

    /// Graph of the configured domain.
    pub fn graph(&self) -> Result<LipschitzGraph<f64>> {
        let d = &self.domain;
        if let Some(file) = &d.graph_file {
            let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            return serde_json::from_str(&text).with_context(|| format!("parsing graph {}", file.display()));
        }
        Ok(match d.kind {
            DomainKind::Flat => LipschitzGraph::flat(2),
            DomainKind::Tent => LipschitzGraph::tent(2, d.apex, d.base, d.spacing)?,
            DomainKind::RandomPl => LipschitzGraph::random_piecewise_linear(d.lipschitz, d.base, d.knots, self.seed)?,
        })
    }

    /// SHA-256 of the canonical JSON form, seed included.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&canonical))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: ExperimentConfig = toml::from_str("seed = 3\n[measure]\nepsilon = 0.1\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.measure.epsilon, 0.1);
        assert_eq!(cfg.variation, VariationConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.measure.epsilon = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.omega.driver.epsilon = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.domain.graph_file = Some("/nonexistent/graph.json".into());
        assert!(cfg.validate().is_err());
        assert!(toml::from_str::<ExperimentConfig>("typo = 1\n").is_err());
    }

    #[test]
    fn seed_changes_the_hash() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 8, ..a.clone() };
        assert_ne!(a.hash(), b.hash());
    }
}
