use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use icolab_core::scenario::{self, ScenarioConfig, SweepParam};
use icolab_core::Error;

/// Quantum-switch and causal-order experiments.
#[derive(Parser)]
#[command(name = "icolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and emit a JSON report.
    Run {
        /// Scenario config file, or `builtin:<name>`.
        #[arg(long)]
        config: String,
        /// Report path (overrides `output.report` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the settings optimizer (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a scenario over a parameter grid and emit CSV.
    Sweep {
        #[arg(long)]
        config: String,
        /// `eta` (coherent mode) or `q` (classical-mixture mode).
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `1.0,0.5,0`.
        #[arg(long)]
        grid: String,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in scenarios.
    List,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn load_config(arg: &str) -> Result<ScenarioConfig, Error> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        return scenario::builtin_scenario(name);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| Error::Config(format!("cannot read {arg}: {e}")))?;
    ScenarioConfig::from_json(&text)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let start = Instant::now();
            let report = scenario::run_scenario(&cfg)?;
            let json = report.to_json()?;
            let target = out.or_else(|| cfg.output.report.as_ref().map(PathBuf::from));
            if let Some(path) = target {
                write_file(&path, &format!("{json}\n"))?;
            }
            println!("{json}");
            eprintln!("{}: done in {:.2?}", cfg.scenario, start.elapsed());
        }
        Command::Sweep { config, param, grid, out } => {
            let cfg = load_config(&config)?;
            let param: SweepParam = param.parse()?;
            let grid = scenario::parse_grid(&grid)?;
            let rows = scenario::sweep(&cfg, param, &grid)?;
            let mut buf = Vec::new();
            scenario::write_sweep_csv(&rows, &mut buf)?;
            let csv = String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?;
            match out {
                Some(path) => write_file(&path, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::List => {
            for (name, description) in scenario::list_scenarios() {
                println!("{name}\t{description}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERIC })
        }
    }
}
