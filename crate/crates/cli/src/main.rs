//! `pathweak`: scenario runner for the weak-measurement engines.
//!
//! Each subcommand reproduces one scenario from a JSON config (the
//! committed fixture when `--config` is omitted) and writes a
//! machine-readable report embedding the resolved config, the artifact
//! version and the seed. Exit codes: 0 success, 1 physics error,
//! 2 config error.

mod config;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use scenarios::ScenarioOutput;

#[derive(Parser)]
#[command(name = "pathweak", version, about = "Weak values, pointer dynamics and semiclassical propagators on 1D grids")]
struct Cli {
    #[command(subcommand)]
    scenario: Scenario,

    /// JSON scenario config; the committed fixture when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format. Scenarios without array data always report JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Worker pool size; hardware parallelism when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// RNG seed for stochastic scenarios.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Print progress notes to stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Scenario {
    /// Split-step evolution of a Gaussian packet.
    Propagate,
    /// Weak value through the operator and/or kernel route.
    WeakValue,
    /// Full coupled system + probe pipeline with pointer readout.
    Pointer,
    /// Recover a propagator from weak values on a (Q_w, x_f) scan.
    InferPropagator,
    /// Projector weak values on a mode network.
    Interferometer,
    /// Stationary-phase propagator from classical trajectories.
    Semiclassical,
    /// Periodic-orbit reconstruction of a wavepacket autocorrelation.
    Scar,
    /// Classical conditional pointer shift over a phase-space ensemble.
    Classical,
}

impl Scenario {
    fn name(&self) -> &'static str {
        match self {
            Scenario::Propagate => "propagate",
            Scenario::WeakValue => "weak-value",
            Scenario::Pointer => "pointer",
            Scenario::InferPropagator => "infer-propagator",
            Scenario::Interferometer => "interferometer",
            Scenario::Semiclassical => "semiclassical",
            Scenario::Scar => "scar",
            Scenario::Classical => "classical",
        }
    }

    fn fixture(&self) -> &'static str {
        match self {
            Scenario::Propagate => include_str!("../fixtures/propagate.json"),
            Scenario::WeakValue => include_str!("../fixtures/weak_value.json"),
            Scenario::Pointer => include_str!("../fixtures/pointer.json"),
            Scenario::InferPropagator => include_str!("../fixtures/infer_propagator.json"),
            Scenario::Interferometer => include_str!("../fixtures/interferometer.json"),
            Scenario::Semiclassical => include_str!("../fixtures/semiclassical.json"),
            Scenario::Scar => include_str!("../fixtures/scar.json"),
            Scenario::Classical => include_str!("../fixtures/classical.json"),
        }
    }
}

enum CliError {
    Config(String),
    Physics(pathweak::Error),
    Io(std::io::Error),
}

impl From<pathweak::Error> for CliError {
    fn from(e: pathweak::Error) -> Self {
        CliError::Physics(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn parse_config<C: DeserializeOwned>(text: &str) -> Result<C, CliError> {
    let mut deserializer = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut deserializer).map_err(|e| {
        CliError::Config(format!(
            "invalid config at `{}`: {}",
            e.path(),
            e.inner()
        ))
    })
}

fn load_config<C: DeserializeOwned>(cli: &Cli) -> Result<(C, String), CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        None => cli.scenario.fixture().to_string(),
    };
    let parsed = parse_config(&text)?;
    Ok((parsed, text))
}

fn run<C>(
    cli: &Cli,
    runner: impl FnOnce(&C) -> pathweak::Result<ScenarioOutput>,
) -> Result<(), CliError>
where
    C: DeserializeOwned + Serialize,
{
    let (config, _raw) = load_config::<C>(cli)?;
    if cli.verbose {
        eprintln!("[pathweak] running `{}`", cli.scenario.name());
    }
    let output = runner(&config)?;
    emit(cli, &config, output)
}

fn emit<C: Serialize>(cli: &Cli, config: &C, output: ScenarioOutput) -> Result<(), CliError> {
    let body = match (cli.format, &output.csv) {
        (Format::Csv, Some(csv)) => {
            let mut text = format!(
                "# pathweak {} scenario={} seed={}\n# gnuplot: plot '<file>' using 1:2 with lines\n",
                pathweak::VERSION,
                cli.scenario.name(),
                cli.seed
            );
            text.push_str(csv);
            text
        }
        (Format::Csv, None) | (Format::Json, _) => {
            let report = json!({
                "version": pathweak::VERSION,
                "scenario": cli.scenario.name(),
                "seed": cli.seed,
                "config": config,
                "results": output.results,
            });
            let mut text = serde_json::to_string_pretty(&report).expect("report serialization");
            text.push('\n');
            text
        }
    };
    match &cli.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match cli.scenario {
        Scenario::Propagate => run(cli, scenarios::run_propagate),
        Scenario::WeakValue => run(cli, scenarios::run_weak_value),
        Scenario::Pointer => run(cli, scenarios::run_pointer),
        Scenario::InferPropagator => run(cli, scenarios::run_infer_propagator),
        Scenario::Interferometer => run(cli, scenarios::run_interferometer),
        Scenario::Semiclassical => run(cli, scenarios::run_semiclassical),
        Scenario::Scar => run(cli, scenarios::run_scar),
        Scenario::Classical => {
            let seed = cli.seed;
            run(cli, move |c: &config::ClassicalConfig| {
                scenarios::run_classical(c, seed)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("pathweak: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("pathweak: config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Physics(e)) => {
            eprintln!("pathweak: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Io(e)) => {
            eprintln!("pathweak: io error: {e}");
            ExitCode::from(1)
        }
    }
}
