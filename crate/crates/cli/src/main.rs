use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qps_cli::commands::{self, FitArgs, FitKind};
use qps_cli::config::LoadedConfig;
use qps_cli::scenario;
use qps_cli::sweep::{run_csv, SweepOptions};
use qps_cli::CliError;

#[derive(Parser)]
#[command(name = "qps", version, about = "Echo phase-shift simulation and fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV.
    Sweep {
        /// Built-in scenario name or scenario JSON path.
        #[arg(long)]
        scenario: String,
        /// Bath config (nv_a, nv_b or a path); overrides the scenario's bath.
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Fit a model to a trace CSV and write a JSON report.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        model: FitKind,
        #[arg(long, default_value = "nv_a")]
        config: String,
        #[arg(long, default_value_t = 1)]
        pulses: u32,
        /// Echo interval in µs for the twait model.
        #[arg(long)]
        tau: Option<f64>,
        /// ε for the twait model; taken from the config if absent.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        eps_ci: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a bath config and flag strong couplings.
    Validate {
        #[arg(long, default_value = "nv_a")]
        config: String,
    },
    /// Built-in scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    List,
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep { scenario, config, out, seed, threads } => {
            let sc = scenario::resolve(&scenario)?;
            let cfg = LoadedConfig::load(config.as_deref().unwrap_or(&sc.bath))?;
            let csv = run_csv(&sc, &cfg, &SweepOptions { seed, threads })?;
            emit(&csv, out.as_ref())
        }
        Command::Fit { input, model, config, pulses, tau, eps, eps_ci, out } => {
            let csv = std::fs::read_to_string(&input)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", input.display())))?;
            let cfg = LoadedConfig::load(&config)?;
            let res = commands::fit(&csv, &cfg, &FitArgs { model, pulses, tau, eps, eps_ci })?;
            let json = res.to_json()?;
            emit(&format!("{json}\n"), out.as_ref())?;
            if !res.converged {
                return Err(CliError::Runtime("fit did not converge".into()));
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = LoadedConfig::load(&config)?;
            print!("{}", commands::validate(&cfg).text);
            Ok(())
        }
        Command::Scenarios { action: ScenarioAction::List } => {
            print!("{}", commands::list_scenarios());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
