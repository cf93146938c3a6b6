//! Command-line driver. Each subcommand runs one or more experiments and
//! writes a JSON record per experiment into the output directory, next to
//! its CSV tables and a pass/fail summary keyed by criterion. Wall-clock
//! timings go to `timings.json` only, so every other file is a
//! deterministic function of the configuration and seed.

pub mod config;
pub mod experiments;

pub use config::ExperimentConfig;
pub use experiments::{CsvTable, Outcome, OrbitTables};

use crate::error::{Error, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "magtomo", version, about = "Magnetic flows on surfaces: identities, orbits, ray transforms and entropy production")]
pub struct Cli {
    /// TOML configuration; missing sections take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Frame commutator identities.
    FrameCheck,
    /// Pestov identity and the volume anchors.
    PestovCheck,
    /// α-control estimates and the gap inequality.
    AlphaEstimate,
    /// Closed geodesics of the Bolza surface and their continuation.
    Orbits,
    /// Riccati solutions and hyperbolicity.
    Riccati,
    /// Ray transforms of potentials over the orbit table.
    RayTransform,
    /// Recovery of potentials by the truncated transport solve.
    TransportSolve,
    /// Entropy production and the variance comparison.
    Entropy,
    /// Every experiment above.
    FullSuite,
    /// Print the resolved configuration as TOML.
    PrintConfig,
}

/// Experiments in the order the full suite runs them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    FrameIdentities,
    PestovIdentity,
    VolumeAnchors,
    Orbits,
    Riccati,
    AlphaControl,
    RayTransform,
    TransportRecovery,
    Entropy,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::FrameIdentities,
        Experiment::PestovIdentity,
        Experiment::VolumeAnchors,
        Experiment::Orbits,
        Experiment::Riccati,
        Experiment::AlphaControl,
        Experiment::RayTransform,
        Experiment::TransportRecovery,
        Experiment::Entropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FrameIdentities => "frame_identities",
            Experiment::PestovIdentity => "pestov_identity",
            Experiment::VolumeAnchors => "volume_anchors",
            Experiment::Orbits => "orbits",
            Experiment::Riccati => "riccati",
            Experiment::AlphaControl => "alpha_control",
            Experiment::RayTransform => "ray_transform",
            Experiment::TransportRecovery => "transport_recovery",
            Experiment::Entropy => "entropy",
        }
    }
}

impl Command {
    pub fn experiments(self) -> Vec<Experiment> {
        use Experiment as E;
        match self {
            Command::FrameCheck => vec![E::FrameIdentities],
            Command::PestovCheck => vec![E::PestovIdentity, E::VolumeAnchors],
            Command::AlphaEstimate => vec![E::AlphaControl],
            Command::Orbits => vec![E::Orbits],
            Command::Riccati => vec![E::Riccati],
            Command::RayTransform => vec![E::RayTransform],
            Command::TransportSolve => vec![E::TransportRecovery],
            Command::Entropy => vec![E::Entropy],
            Command::FullSuite => E::ALL.to_vec(),
            Command::PrintConfig => Vec::new(),
        }
    }
}

#[derive(Serialize)]
struct RunRecord<'a> {
    experiment: &'static str,
    criterion: &'a str,
    seed: u64,
    version: &'static str,
    config: &'a ExperimentConfig,
    passed: bool,
    report: &'a crate::report::ExperimentReport,
    summary: &'a serde_json::Value,
}

#[derive(Serialize)]
struct SummaryEntry {
    experiment: &'static str,
    passed: bool,
    error: Option<String>,
}

/// Result of running a list of experiments.
#[derive(Debug, Default)]
pub struct SuiteResult {
    pub outcomes: Vec<(Experiment, Outcome)>,
    pub errors: Vec<(Experiment, String)>,
    pub seconds: BTreeMap<&'static str, f64>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.outcomes.iter().all(|(_, o)| o.passed())
    }

    pub fn outcome(&self, e: Experiment) -> Option<&Outcome> {
        self.outcomes.iter().find(|(x, _)| *x == e).map(|(_, o)| o)
    }
}

fn criterion_of(e: Experiment) -> &'static str {
    match e {
        Experiment::FrameIdentities => "C1",
        Experiment::PestovIdentity => "C2",
        Experiment::VolumeAnchors => "C3",
        Experiment::Orbits => "C4",
        Experiment::Riccati => "C5",
        Experiment::AlphaControl => "C6",
        Experiment::RayTransform => "C7",
        Experiment::TransportRecovery => "C8",
        Experiment::Entropy => "C9",
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Run `experiments` under `cfg`, writing results into `cfg.out` as each
/// one finishes. The ray transform reuses the orbit table when the suite
/// contains both and computes its own otherwise.
pub fn run(cfg: &ExperimentConfig, experiments: &[Experiment]) -> Result<SuiteResult> {
    cfg.validate()?;
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    let mut result = SuiteResult::default();
    let mut orbits: Option<OrbitTables> = None;
    let mut summary: BTreeMap<&'static str, SummaryEntry> = BTreeMap::new();
    for &e in experiments {
        let start = Instant::now();
        let outcome = match e {
            Experiment::FrameIdentities => experiments::frame_identities(cfg).map(|r| r.1),
            Experiment::PestovIdentity => experiments::pestov_identity(cfg).map(|r| r.1),
            Experiment::VolumeAnchors => experiments::volume_anchors(cfg).map(|r| r.1),
            Experiment::Orbits => experiments::orbit_suite(cfg).map(|(_, t, o)| {
                orbits = Some(t);
                o
            }),
            Experiment::Riccati => experiments::riccati_experiment(cfg).map(|r| r.1),
            Experiment::AlphaControl => experiments::alpha_control(cfg).map(|r| r.1),
            Experiment::RayTransform => {
                let tables = match orbits.take() {
                    Some(t) => Ok(t),
                    None => experiments::orbit_suite(cfg).map(|r| r.1),
                };
                let res = tables.as_ref().map_err(clone_err).and_then(|t| experiments::ray_experiment(cfg, t));
                orbits = tables.ok();
                res.map(|r| r.1)
            }
            Experiment::TransportRecovery => experiments::transport_recovery(cfg).map(|r| r.1),
            Experiment::Entropy => experiments::entropy_experiment(cfg).map(|r| r.1),
        };
        result.seconds.insert(e.name(), start.elapsed().as_secs_f64());
        match outcome {
            Ok(o) => {
                let record = RunRecord {
                    experiment: e.name(),
                    criterion: &o.criterion,
                    seed: cfg.seed,
                    version: env!("CARGO_PKG_VERSION"),
                    config: cfg,
                    passed: o.passed(),
                    report: &o.report,
                    summary: &o.summary,
                };
                write_json(&out.join(format!("{}.json", e.name())), &record)?;
                for t in &o.tables {
                    std::fs::write(out.join(&t.name), &t.contents)?;
                }
                summary.insert(criterion_of(e), SummaryEntry { experiment: e.name(), passed: o.passed(), error: None });
                result.outcomes.push((e, o));
            }
            Err(err) => {
                summary.insert(criterion_of(e), SummaryEntry { experiment: e.name(), passed: false, error: Some(err.to_string()) });
                result.errors.push((e, err.to_string()));
            }
        }
        write_json(&out.join("summary.json"), &summary)?;
        write_json(&out.join("timings.json"), &result.seconds)?;
    }
    Ok(result)
}

// errors are not Clone; the orbit failure is reported again as a precondition
fn clone_err(e: &Error) -> Error {
    Error::Precondition(format!("orbit table unavailable: {e}"))
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("MAGTOMO_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| Error::Config(format!("MAGTOMO_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(Error::Config("MAGTOMO_THREADS must be positive".into()));
    }
    // a pool that is already built keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Entry point of the `magtomo` binary. Returns the process exit code:
/// 0 when every check passed, 1 on a failed check or a numerical error and
/// 2 on an invalid configuration.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let cfg = match configure_threads().and_then(|_| resolve(&cli)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("magtomo: {e}");
            return 2;
        }
    };
    if cli.command == Command::PrintConfig {
        print!("{}", cfg.to_toml());
        return 0;
    }
    let result = match run(&cfg, &cli.command.experiments()) {
        Ok(r) => r,
        Err(Error::Config(m)) => {
            eprintln!("magtomo: config: {m}");
            return 2;
        }
        Err(e) => {
            eprintln!("magtomo: {e}");
            return 1;
        }
    };
    for (e, o) in &result.outcomes {
        println!("{} {:<20} {}", o.criterion, e.name(), if o.passed() { "pass" } else { "FAIL" });
        for c in o.report.checks.iter().filter(|c| !c.passed) {
            println!("    {}: {:.3e} {} {:.3e} ({})", c.id, c.value, c.comparison, c.threshold, c.description);
        }
    }
    for (e, msg) in &result.errors {
        println!("{} {:<20} error: {msg}", criterion_of(*e), e.name());
    }
    println!("results in {}", cfg.out.display());
    if result.passed() {
        0
    } else {
        1
    }
}
