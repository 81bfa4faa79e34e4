use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bourgain_cli::config::CheckSelection;
use bourgain_cli::{run, Cache, ExperimentConfig, RunReport};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bourgain", version, about = "Experiments on points of bounded radial variation")]
struct Cli {
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for report.json, report.txt, CSV series and the Monte Carlo cache.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML config file, or builtin:flat, builtin:tent, builtin:random-pl.
    #[arg(long, global = true, default_value = "builtin:flat")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Graph Lipschitz constant, distance bounds and oracle mesh.
    Geometry,
    /// Walk-on-spheres harmonic measure against the exact half-plane law.
    Harmonic {
        #[arg(long)]
        walks: Option<usize>,
    },
    /// Kernel identities on the torus.
    Kernels,
    /// Exact partition checks.
    Partitions,
    /// Refinement limit on one segment.
    Omega {
        /// Segment as "m,M" with rational endpoints.
        #[arg(long)]
        segment: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// The variation functional and the search for small-variation points.
    Variation {
        #[command(subcommand)]
        action: VariationAction,
    },
    /// The limit measure ν and its ball-mass scaling.
    Measure {
        #[command(subcommand)]
        action: MeasureAction,
    },
    /// All stages enabled in the config, or the given subset.
    Run {
        /// Comma-separated stages (geometry, harmonic, kernels or identities, partitions,
        /// omega, variation, measure), or "none".
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
    },
    /// Re-renders a saved report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Subcommand)]
enum VariationAction {
    /// V on the mesh nodes only.
    Profile,
    /// Minimizer of V/u in one surface ball.
    Bourgain {
        #[arg(long, allow_hyphen_values = true)]
        center: f64,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        yanchor: Option<f64>,
    },
}

#[derive(Subcommand)]
enum MeasureAction {
    Nu {
        #[arg(long)]
        epsilon: Option<f64>,
        /// Smallest height; ν is approximated down to the first 2^-k at or below it.
        #[arg(long)]
        ymin: Option<f64>,
    },
    Exponent {
        #[arg(long, allow_hyphen_values = true)]
        center: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn only(stage: &str) -> Result<CheckSelection> {
    let mut sel = CheckSelection::none();
    match stage {
        "geometry" => sel.geometry = true,
        "harmonic" => sel.harmonic = true,
        "kernels" | "identities" => sel.kernels = true,
        "partitions" => sel.partitions = true,
        "omega" => sel.omega = true,
        "variation" => sel.variation = true,
        "measure" => sel.measure = true,
        "none" => {}
        other => bail!("unknown stage {other:?}"),
    }
    Ok(sel)
}

fn union(stages: &[String]) -> Result<CheckSelection> {
    let mut sel = CheckSelection::none();
    for s in stages {
        let o = only(s.trim())?;
        sel.geometry |= o.geometry;
        sel.harmonic |= o.harmonic;
        sel.kernels |= o.kernels;
        sel.partitions |= o.partitions;
        sel.omega |= o.omega;
        sel.variation |= o.variation;
        sel.measure |= o.measure;
    }
    Ok(sel)
}

/// Applies the subcommand's stage selection and overrides.
fn configure(cfg: &mut ExperimentConfig, command: &Command) -> Result<()> {
    match command {
        Command::Geometry => cfg.checks = only("geometry")?,
        Command::Harmonic { walks } => {
            cfg.checks = only("harmonic")?;
            if let Some(w) = walks {
                cfg.walks.count = *w;
            }
        }
        Command::Kernels => cfg.checks = only("kernels")?,
        Command::Partitions => cfg.checks = only("partitions")?,
        Command::Omega { segment, epsilon } => {
            cfg.checks = only("omega")?;
            if let Some(s) = segment {
                let (a, b) = s.split_once(',').context("--segment takes \"m,M\"")?;
                cfg.omega.segment = [a.trim().into(), b.trim().into()];
            }
            if let Some(e) = epsilon {
                cfg.omega.driver.epsilon = *e;
            }
        }
        Command::Variation { action } => {
            cfg.checks = only("variation")?;
            match action {
                VariationAction::Profile => cfg.variation.centers.clear(),
                VariationAction::Bourgain { center, radius, yanchor } => {
                    cfg.variation.centers = vec![*center];
                    cfg.variation.radii = vec![*radius];
                    if let Some(y) = yanchor {
                        cfg.variation.y_anchor = *y;
                    }
                }
            }
        }
        Command::Measure { action } => {
            cfg.checks = only("measure")?;
            match action {
                MeasureAction::Nu { epsilon, ymin } => {
                    if let Some(e) = epsilon {
                        cfg.measure.epsilon = *e;
                    }
                    if let Some(y) = ymin {
                        if !(*y > 0.0 && *y < 1.0) {
                            bail!("--ymin must lie in (0, 1), got {y}");
                        }
                        cfg.measure.levels = (1.0 / y).log2().ceil().max(2.0) as u32;
                    }
                }
                MeasureAction::Exponent { center, radii } => {
                    if let Some(c) = center {
                        cfg.measure.center = *c;
                    }
                    if let Some(r) = radii {
                        cfg.measure.radii = r.clone();
                    }
                }
            }
        }
        Command::Run { checks } => {
            if let Some(list) = checks {
                cfg.checks = union(list)?;
            }
        }
        Command::Report { .. } => {}
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    if let Command::Report { input, format } = &cli.command {
        let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
        let report = RunReport::from_json(&text)?;
        match format {
            Format::Text => print!("{}", report.to_table()),
            Format::Json => print!("{}", report.to_json()),
        }
        return Ok(report.hard_failures() == 0);
    }
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    configure(&mut cfg, &cli.command)?;
    let cache = Cache::new(cli.out.as_ref().map(|d| d.join("cache")));
    let report = run(&cfg, &cache)?;
    print!("{}", report.to_table());
    if let Some(dir) = &cli.out {
        report.emit(dir)?;
        println!("report {} written to {}", &report.hash()[..12], dir.display());
    }
    Ok(report.hard_failures() == 0)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
