use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rsl::cli::{list_catalog, run_refinement_study, run_scenario, RunResult, EXIT_CONFIG};
use rsl::config::ScenarioConfig;

#[derive(Parser)]
#[command(name = "rsl", version, about = "Ricci flow spectral laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV trajectory and verdict report.
    Run { config: PathBuf },
    /// Rerun a grid scenario under mesh refinement and fit convergence orders.
    Refine {
        config: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// List model families, initial conformal factors and checks.
    Catalog,
}

fn finish(result: &RunResult) -> ExitCode {
    print!("{}", result.report());
    if let Some(err) = &result.error {
        eprintln!("error: {err}");
    }
    for path in result.csv_paths.iter().chain(result.report_path.iter()) {
        eprintln!("wrote {}", path.display());
    }
    ExitCode::from(result.exit_code as u8)
}

fn load(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG as u8)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG as u8),
            };
        }
    };
    match cli.command {
        Command::Catalog => {
            print!("{}", list_catalog());
            ExitCode::SUCCESS
        }
        Command::Run { config } => match load(&config) {
            Ok(cfg) => finish(&run_scenario(&cfg)),
            Err(code) => code,
        },
        Command::Refine { config, levels } => match load(&config) {
            Ok(cfg) => match levels.or(cfg.refine_levels) {
                Some(levels) => finish(&run_refinement_study(&cfg, levels)),
                None => {
                    eprintln!("error: give --levels N or refine.levels in the config");
                    ExitCode::from(EXIT_CONFIG as u8)
                }
            },
            Err(code) => code,
        },
    }
}
