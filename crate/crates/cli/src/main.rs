use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use geomech::scenario::{parse_scenario, Setup, SimError};
use geomech::sim::{run, run_comparison, write_outputs, OutputPaths, Overrides, RunOutput};

/// Rigid-body and quadrotor scenario runner.
#[derive(Debug, Parser)]
#[command(name = "geomech", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Directory for the CSV series and metrics JSON.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Override the time step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the final time (s).
    #[arg(long)]
    t_final: Option<f64>,
    /// Switch the rotor aerodynamic model on or off.
    #[arg(long, value_enum)]
    aero: Option<Switch>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its time series and metrics.
    Run(RunArgs),
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Run the variational integrator and RK4 side by side on a rigid-body scenario.
    Compare(RunArgs),
}

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_code(e: &SimError) -> u8 {
    match e {
        SimError::Parse { .. } | SimError::Validation(_) => EXIT_INVALID,
        SimError::Solver(_) => EXIT_SOLVER,
        SimError::Io(_) | SimError::Csv(_) => EXIT_IO,
    }
}

fn load(path: &Path, overrides: Overrides) -> Result<Setup, SimError> {
    let text = std::fs::read(path)?;
    let mut scenario = parse_scenario(&text)?;
    if scenario.name.is_none() {
        // Unnamed scenarios write outputs under the file stem when it is a usable name.
        scenario.name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .filter(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)))
            .map(str::to_owned);
    }
    overrides.apply(&mut scenario)?;
    scenario.validate()
}

fn execute(args: &RunArgs, compare: bool) -> Result<(RunOutput, OutputPaths), SimError> {
    let overrides = Overrides {
        dt: args.dt,
        t_final: args.t_final,
        aero: args.aero.map(|s| s == Switch::On),
    };
    let setup = load(&args.scenario, overrides)?;
    let (out, name) = if compare {
        (run_comparison(&setup)?, format!("{}_compare", setup.name))
    } else {
        (run(&setup)?, setup.name.clone())
    };
    let paths = OutputPaths::in_dir(&args.out_dir, &name);
    write_outputs(&out.series, &out.metrics, &paths)?;
    Ok((out, paths))
}

fn report(result: Result<(RunOutput, OutputPaths), SimError>) -> ExitCode {
    match result {
        Ok((out, paths)) => {
            println!(
                "{} steps; wrote {} and {}",
                out.metrics.steps,
                paths.series.display(),
                paths.metrics.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => report(execute(args, false)),
        Command::Compare(args) => report(execute(args, true)),
        Command::Validate { scenario } => match load(scenario, Overrides::default()) {
            Ok(setup) => {
                println!("ok: {} scenario `{}`", setup.kind.as_str(), setup.name);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        },
    }
}
