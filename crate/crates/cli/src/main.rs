//! `leanline` command line: validate line configs, run replicated
//! simulations, render energy value-stream maps and compare scenarios.
//!
//! Exit codes: 0 success, 1 validation violations, 2 bad input,
//! 3 simulation failure, 4 consistency failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use leanline_core::evsm::{build_evsm, render_dot, render_text};
use leanline_core::line::{load_config_file, validate, ConfigError, LineConfig};
use leanline_core::metrics::FactorMode;
use leanline_core::report::{build_report, ReportError, RunReport};
use leanline_core::scenario::{compare, load_delta_file, render_table, ScenarioError};
use leanline_core::sim::{run_replications, SimError, SimTime};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SIMULATION: u8 = 3;
const EXIT_CONSISTENCY: u8 = 4;

#[derive(Parser)]
#[command(name = "leanline", version, about = "Batch production line simulator with energy accounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FactorsArg {
    Supplied,
    Derived,
}

impl From<FactorsArg> for FactorMode {
    fn from(value: FactorsArg) -> Self {
        match value {
            FactorsArg::Supplied => FactorMode::Supplied,
            FactorsArg::Derived => FactorMode::Derived,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Dot,
}

#[derive(Args)]
struct RunArgs {
    /// Number of independent replications.
    #[arg(long, default_value_t = 30)]
    reps: u64,
    /// Base seed; replication i uses stream i of this seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Where the OEEE factors come from.
    #[arg(long, value_enum, default_value_t = FactorsArg::Supplied)]
    factors: FactorsArg,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config file and list rule violations.
    Validate { config: PathBuf },
    /// Run a replicated simulation and emit a JSON report.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an energy value-stream map for a config.
    Evsm {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Reuse an existing report instead of simulating.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a scenario delta against the base config and tabulate improvements.
    Compare {
        config: PathBuf,
        delta: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Write the table as JSON here (the text table still goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_INPUT, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match &e {
            SimError::InvalidConfig(_) => EXIT_INPUT,
            _ => EXIT_SIMULATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        let code = match &e {
            ReportError::MissingSuppliedFactors => EXIT_INPUT,
            _ => EXIT_SIMULATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match &e {
            ScenarioError::Simulation { .. } => EXIT_SIMULATION,
            ScenarioError::Report { source: ReportError::MissingSuppliedFactors, .. } => EXIT_INPUT,
            ScenarioError::Report { .. } => EXIT_SIMULATION,
            _ => EXIT_INPUT,
        };
        Failure::new(code, e.to_string())
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn warn_few_reps(reps: u64) {
    if reps < 2 {
        eprintln!("warning: {reps} replication(s) gives no confidence interval; use --reps 2 or more");
    }
}

fn simulate_report(config: &LineConfig, run: &RunArgs) -> Result<RunReport, Failure> {
    warn_few_reps(run.reps);
    let horizon = SimTime::from_minutes(config.horizon());
    let results = run_replications(config, run.seed, run.reps, horizon)?;
    let mut report = build_report(config, &results, run.factors.into(), run.seed, 0.95)?;
    let problems = report.verify();
    if !problems.is_empty() {
        return Err(Failure::new(
            EXIT_CONSISTENCY,
            format!("report failed self-checks: {}", problems.join("; ")),
        ));
    }
    report.timestamp_unix =
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs());
    Ok(report)
}

fn cmd_validate(config_path: &Path) -> Result<u8, Failure> {
    let config = load_config_file(config_path)?;
    let violations = validate(&config);
    if violations.is_empty() {
        println!("ok: {} stations, {} transfers", config.stations.len(), config.transfers.len());
        Ok(0)
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        Ok(EXIT_VIOLATIONS)
    }
}

fn require_valid(config: &LineConfig) -> Result<(), Failure> {
    let violations = validate(config);
    if violations.is_empty() {
        return Ok(());
    }
    let list = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
    Err(Failure::new(EXIT_VIOLATIONS, format!("config has violations: {list}")))
}

fn cmd_simulate(config_path: &Path, run: &RunArgs, out: Option<&Path>) -> Result<u8, Failure> {
    let config = load_config_file(config_path)?;
    require_valid(&config)?;
    let report = simulate_report(&config, run)?;
    let body = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::new(EXIT_SIMULATION, e.to_string()))?;
    emit(&body, out)?;
    Ok(0)
}

fn cmd_evsm(
    config_path: &Path,
    run: &RunArgs,
    report_path: Option<&Path>,
    format: FormatArg,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let config = load_config_file(config_path)?;
    require_valid(&config)?;
    let report = match report_path {
        Some(path) => {
            let body = std::fs::read_to_string(path).map_err(|e| {
                Failure::new(EXIT_INPUT, format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str::<RunReport>(&body)
                .map_err(|e| Failure::new(EXIT_INPUT, format!("bad report: {e}")))?
        }
        None => simulate_report(&config, run)?,
    };
    let doc = build_evsm(&config, &report)
        .map_err(|e| Failure::new(EXIT_CONSISTENCY, e.to_string()))?;
    let rendered = match format {
        FormatArg::Text => render_text(&doc),
        FormatArg::Dot => render_dot(&doc),
    };
    emit(&rendered, out)?;
    Ok(0)
}

fn cmd_compare(
    config_path: &Path,
    delta_path: &Path,
    run: &RunArgs,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let config = load_config_file(config_path)?;
    require_valid(&config)?;
    let delta = load_delta_file(delta_path)?;
    warn_few_reps(run.reps);
    let (table, _, _) = compare(&config, &delta, run.reps, run.seed, run.factors.into())?;
    print!("{}", render_table(&table));
    if let Some(path) = out {
        let body = serde_json::to_string_pretty(&table)
            .map_err(|e| Failure::new(EXIT_SIMULATION, e.to_string()))?;
        emit(&body, Some(path))?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Simulate { config, run, out } => cmd_simulate(config, run, out.as_deref()),
        Command::Evsm { config, run, report, format, out } => {
            cmd_evsm(config, run, report.as_deref(), *format, out.as_deref())
        }
        Command::Compare { config, delta, run, out } => {
            cmd_compare(config, delta, run, out.as_deref())
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
