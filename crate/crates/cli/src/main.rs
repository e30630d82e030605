use std::path::PathBuf;
use std::process::ExitCode;

use afc_cli::{run, CliError, Figure, Format, RunOptions, Scenario, ScenarioConfig};
use clap::{Parser, Subcommand};

/// Simulation and analysis of integrated AFC quantum memories.
#[derive(Debug, Parser)]
#[command(name = "afcsim", version)]
struct Cli {
    /// TOML scenario file; defaults apply to everything it leaves out.
    #[arg(long, global = true, env = "AFCSIM_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true, env = "AFCSIM_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "AFCSIM_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(
        long,
        global = true,
        env = "AFCSIM_FORMAT",
        value_enum,
        default_value = "csv"
    )]
    format: Format,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true, env = "AFCSIM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Waveguide loss budgets.
    Budget,
    /// Classical AFC echoes from pulse propagation.
    Echoes,
    /// Rabi-frequency calibration and mode scaling.
    Nutation,
    /// Time-tagged events from the pair source.
    Source,
    /// Correlation analysis of a time-tag file.
    Analyze {
        #[arg(long, env = "AFCSIM_INPUT")]
        input: PathBuf,
    },
    /// Heralded single-photon storage versus storage time.
    Storage,
    /// Regenerates a figure or table dataset.
    Reproduce {
        #[arg(value_enum)]
        target: Figure,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = match cli.command {
        Command::Budget => Scenario::Budget,
        Command::Echoes => Scenario::Echoes,
        Command::Nutation => Scenario::Nutation,
        Command::Source => Scenario::Source,
        Command::Analyze { input } => Scenario::Analyze { input },
        Command::Storage => Scenario::Storage,
        Command::Reproduce { target } => Scenario::Reproduce(target),
    };
    let result = (|| -> Result<_, CliError> {
        let cfg = match &cli.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        run(
            &scenario,
            &cfg,
            &RunOptions {
                seed: cli.seed,
                out_dir: &cli.out,
                format: cli.format,
                threads: cli.threads,
            },
        )
    })();
    match result {
        Ok(report) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serialises")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let diag = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{diag}");
            ExitCode::from(e.exit_code())
        }
    }
}
