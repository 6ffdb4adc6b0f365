//! Command-line front end: each subcommand loads a JSON config, drives the
//! matching library module, and writes its artifacts atomically (temp file
//! plus rename) with a run manifest alongside listing every output.
//!
//! Exit codes follow the error buckets: 0 success, 2 configuration error,
//! 3 infeasible scenario, 4 numerical failure.  Data outputs are a pure
//! function of (config bytes, flags, seed); the manifest additionally
//! carries a wall-clock timestamp for provenance.

use std::fs;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::figures::{write_figure_csv, FigureSpec};
use crate::mortality::GompertzMakeham;
use crate::oracle::{verification_report, FaultInjection, VerificationReport};
use crate::paths::{analytic_summary, bequest_distribution, simulate_paths};
use crate::pool::{
    fairness_report, footnote1_feasibility, run_replications, write_event_log, FairnessReport,
    Footnote1Report, PoolSpec, PoolState, Subset,
};
use crate::scenario::{PreferenceSpec, ScenarioConfig, ScenarioParams};
use crate::strategy::{schedule, AgeGrid, MarketParams};

#[derive(Debug, Parser)]
#[command(
    name = "tontine",
    version,
    about = "Optimal tontine-with-bequest schedules, simulations, and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the optimal controls over an age grid as CSV.
    Schedule(ScheduleArgs),
    /// Simulate wealth paths; write the summary CSV plus JSON metadata.
    Simulate(SimulateArgs),
    /// Run the mortality-pool fairness experiment.
    Pool(PoolArgs),
    /// Emit the data table behind one of the standard figures.
    Figure(FigureArgs),
    /// Run the closed-form verification suite and write its report.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Scenario config file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// First tabulated age; defaults to the scenario entry age.
    #[arg(long)]
    pub from_age: Option<f64>,
    /// Last tabulated age; defaults to the scenario end age.
    #[arg(long)]
    pub to_age: Option<f64>,
    /// Age step in years.
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario config file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path; metadata lands next to it as `<stem>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scenario path count; 0 requests analytic output only.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Overrides the scenario step size in years.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    /// Pool spec file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output JSON path; an exemplar event log lands at `<stem>.events.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Independent replications of the pool experiment.
    #[arg(long, default_value_t = 10_000)]
    pub replications: usize,
    /// Root seed for the replication streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// Figure id, 1 through 6.
    #[arg(long)]
    pub figure: u8,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the first grid age.
    #[arg(long)]
    pub from_age: Option<f64>,
    /// Overrides the last grid age.
    #[arg(long)]
    pub to_age: Option<f64>,
    /// Overrides the grid step in years.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Scenario config file (JSON); defaults to the built-in base scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Deliberately seeds a known fault so the suite must fail; used by the
    /// tool's own tests.
    #[arg(long, hide = true, value_parser = parse_fault)]
    pub inject_fault: Option<FaultInjection>,
}

fn parse_fault(raw: &str) -> std::result::Result<FaultInjection, String> {
    match raw {
        "flip-discount-sign" => Ok(FaultInjection::FlipDiscountSign),
        other => Err(format!(
            "unknown fault {other:?}; expected flip-discount-sign"
        )),
    }
}

/// Parses the command line and runs it, mapping errors to exit codes.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Schedule(args) => cmd_schedule(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Pool(args) => cmd_pool(args),
        Command::Figure(args) => cmd_figure(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

/// Provenance record written next to every artifact as
/// `<out>.manifest.json`.  The config hash is taken over the canonical
/// (key-sorted) JSON, so reordering keys in the config file does not
/// change it.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub created_unix: u64,
    pub outputs: Vec<String>,
}

fn canonical_hash(config_text: &str) -> Result<String> {
    let value: serde_json::Value = serde_json::from_str(config_text)
        .map_err(|err| Error::Config(format!("invalid config: {err}")))?;
    let canonical = value.to_string();
    Ok(format!("sha256:{:x}", Sha256::digest(canonical.as_bytes())))
}

fn write_manifest(
    command: &str,
    config_text: &str,
    seed: Option<u64>,
    anchor: &Path,
    outputs: &[&Path],
) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        config_hash: canonical_hash(config_text)?,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = sibling_path(anchor, "manifest.json");
    write_atomic(&path, (to_pretty_json(&manifest)?).as_bytes())
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| Error::Numerical(format!("cannot serialize output: {err}")))?;
    text.push('\n');
    Ok(text)
}

/// `<dir>/<stem>.<extension>`, replacing the anchor's extension.
fn sibling_path(anchor: &Path, extension: &str) -> PathBuf {
    anchor.with_extension(extension)
}

/// Writes via a temp file in the target directory plus an atomic rename,
/// so readers never observe a partial artifact.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    let mut file = tempfile::NamedTempFile::new_in(dir)?;
    file.write_all(bytes)?;
    file.persist(path).map_err(|err| Error::Io(err.error))?;
    Ok(())
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|err| Error::Config(format!("cannot read config {}: {err}", path.display())))
}

fn cmd_schedule(args: &ScheduleArgs) -> Result<()> {
    let text = read_config(&args.config)?;
    let config = ScenarioConfig::from_json(&text)?;
    config.validate()?;
    let prefs = config.preferences()?;
    let from = args.from_age.unwrap_or(config.scenario.entry_age);
    let to = args.to_age.unwrap_or(config.scenario.end_age);
    let grid = AgeGrid::new(from, to, args.step)?;
    let table = schedule(
        &config.mortality,
        &grid,
        &config.market,
        &prefs,
        &config.quadrature,
    )?;
    write_atomic(&args.out, table.csv_string().as_bytes())?;
    write_manifest("schedule", &text, None, &args.out, &[&args.out])
}

/// Metadata written next to the simulation CSV.  The distribution block
/// restates the analytic present-valued bequest statistics at the final
/// age, so headline numbers travel with the run.
#[derive(Debug, Serialize)]
struct SimulateMetadata {
    seed: u64,
    dt: f64,
    paths: usize,
    config_hash: String,
    bequest_at_end: BequestStats,
}

#[derive(Debug, Serialize)]
struct BequestStats {
    age: f64,
    mean: f64,
    median: f64,
    mode: f64,
    p95: f64,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let text = read_config(&args.config)?;
    let mut config = ScenarioConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.scenario.seed = seed;
    }
    if let Some(paths) = args.paths {
        config.scenario.paths = paths;
    }
    if let Some(dt) = args.dt {
        config.scenario.dt = dt;
    }
    config.validate()?;

    let summary = if config.scenario.paths == 0 {
        analytic_summary(&config)?
    } else {
        simulate_paths(&config)?.summary
    };
    write_atomic(&args.out, summary.csv_string().as_bytes())?;

    let end_age = config.scenario.end_age;
    let distribution = bequest_distribution(&config, end_age, &[0.95])?;
    let metadata = SimulateMetadata {
        seed: config.scenario.seed,
        dt: config.scenario.dt,
        paths: config.scenario.paths,
        config_hash: canonical_hash(&text)?,
        bequest_at_end: BequestStats {
            age: end_age,
            mean: distribution.mean,
            median: distribution.median,
            mode: distribution.mode,
            p95: distribution.quantiles[0].1,
        },
    };
    let meta_path = sibling_path(&args.out, "meta.json");
    write_atomic(&meta_path, to_pretty_json(&metadata)?.as_bytes())?;
    write_manifest(
        "simulate",
        &text,
        Some(config.scenario.seed),
        &args.out,
        &[&args.out, &meta_path],
    )
}

/// Pool command payload: the fairness statistics plus, when the insuree
/// subset is populated, its settlement-feasibility margins.
#[derive(Debug, Serialize)]
struct PoolReport {
    seed: u64,
    fairness: FairnessReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    footnote1: Option<Footnote1Report>,
}

fn cmd_pool(args: &PoolArgs) -> Result<()> {
    let text = read_config(&args.config)?;
    let spec = PoolSpec::from_json(&text)?;
    let state = PoolState::new(&spec)?;

    let footnote1 = if state.subset(Subset::S2).is_empty() {
        None
    } else {
        let report = footnote1_feasibility(&state)?;
        if !report.feasible {
            let worst = report.worst.expect("infeasible report names its pair");
            return Err(Error::PoolInfeasible {
                deceased: worst.deceased,
                payer: worst.payer,
                share: worst.share,
                bound: worst.bound,
            });
        }
        Some(report)
    };

    let outcomes = run_replications(&spec, args.replications, args.seed)?;
    let fairness = fairness_report(&spec, &outcomes)?;

    // Exemplar event log from the first replication's stream.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(1);
    let mut exemplar = PoolState::new(&spec)?;
    for _ in 0..spec.steps {
        exemplar.step(&mut rng)?;
    }
    let events_path = sibling_path(&args.out, "events.csv");
    let mut buffer = Vec::new();
    write_event_log(&exemplar.events, &mut buffer)?;
    write_atomic(&events_path, &buffer)?;

    let payload = PoolReport {
        seed: args.seed,
        fairness,
        footnote1,
    };
    write_atomic(&args.out, to_pretty_json(&payload)?.as_bytes())?;
    write_manifest(
        "pool",
        &text,
        Some(args.seed),
        &args.out,
        &[&args.out, &events_path],
    )
}

fn cmd_figure(args: &FigureArgs) -> Result<()> {
    let mut spec = FigureSpec::defaults(args.figure)?;
    if args.from_age.is_some() || args.to_age.is_some() || args.step.is_some() {
        spec.ages = AgeGrid::new(
            args.from_age.unwrap_or(spec.ages.from),
            args.to_age.unwrap_or(spec.ages.to),
            args.step.unwrap_or(spec.ages.step),
        )?;
    }
    spec.validate()?;
    let spec_text = serde_json::to_string(&spec)
        .map_err(|err| Error::Numerical(format!("cannot serialize figure spec: {err}")))?;
    let mut buffer = Vec::new();
    write_figure_csv(&spec, &mut buffer)?;
    write_atomic(&args.out, &buffer)?;
    write_manifest("figure", &spec_text, None, &args.out, &[&args.out])
}

/// Base scenario used when `verify` is invoked without a config: the
/// reference market (r = rho = 0.02, mu = 0.05, sigma = 0.2), standard
/// mortality, the level-consumption preference pair, entry at 65 with unit
/// wealth, horizon 105.
pub fn base_scenario() -> ScenarioConfig {
    let mut scenario = ScenarioParams::at_entry(65.0, 1.0);
    scenario.end_age = 105.0;
    ScenarioConfig {
        market: MarketParams {
            risk_free: 0.02,
            risky_drift: 0.05,
            volatility: 0.2,
            time_preference: 0.02,
        },
        prefs: PreferenceSpec::power(-0.08225, 10.0),
        mortality: GompertzMakeham::uk_male(),
        scenario,
        quadrature: Default::default(),
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<()> {
    let (text, config) = match &args.config {
        Some(path) => {
            let text = read_config(path)?;
            let config = ScenarioConfig::from_json(&text)?;
            (text, config)
        }
        None => {
            let config = base_scenario();
            let text = serde_json::to_string(&config)
                .map_err(|err| Error::Numerical(format!("cannot serialize config: {err}")))?;
            (text, config)
        }
    };
    let fault = args.inject_fault.unwrap_or(FaultInjection::None);
    let report = verification_report(&config, fault)?;
    write_atomic(&args.out, to_pretty_json(&report)?.as_bytes())?;
    write_manifest("verify", &text, None, &args.out, &[&args.out])?;
    print_verification(&report);
    if !report.passed {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Error::Numerical(format!(
            "verification failed: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

fn print_verification(report: &VerificationReport) {
    for check in &report.checks {
        let verdict = if check.passed { "ok" } else { "FAILED" };
        println!(
            "{verdict} {} (max error {:e}, tolerance {:e})",
            check.name, check.max_error, check.tolerance
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_hash_ignores_key_order() {
        let a = canonical_hash(r#"{"x": 1, "y": {"b": 2, "a": 3}}"#).unwrap();
        let b = canonical_hash(r#"{"y": {"a": 3, "b": 2}, "x": 1}"#).unwrap();
        assert_eq!(a, b);
        let c = canonical_hash(r#"{"x": 2, "y": {"a": 3, "b": 2}}"#).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sibling_paths_swap_the_extension() {
        assert_eq!(
            sibling_path(Path::new("out/sim.csv"), "meta.json"),
            Path::new("out/sim.meta.json")
        );
        assert_eq!(
            sibling_path(Path::new("report"), "manifest.json"),
            Path::new("report.manifest.json")
        );
    }

    #[test]
    fn base_scenario_is_valid_and_feasible() {
        base_scenario().validate().unwrap();
    }

    #[test]
    fn fault_values_parse_or_name_the_choices() {
        assert_eq!(
            parse_fault("flip-discount-sign").unwrap(),
            FaultInjection::FlipDiscountSign
        );
        let err = parse_fault("nope").unwrap_err();
        assert!(err.contains("flip-discount-sign"));
    }

    #[test]
    fn atomic_writes_replace_existing_content() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("artifact.csv");
        write_atomic(&target, b"first").unwrap();
        write_atomic(&target, b"second").unwrap();
        assert_eq!(fs::read_to_string(&target).unwrap(), "second");
    }
}
