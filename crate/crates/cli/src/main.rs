use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use esscher_cli::{cmd_classify, cmd_evaluate, cmd_report, cmd_verify, CliError, Outcome, RunConfig};

/// Exact and saddlepoint moments of exponentially tilted densities.
#[derive(Parser, Debug)]
#[command(name = "esscher", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify the model as regularly or rapidly varying.
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact and asymptotic moments at one tilt parameter.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
    /// Hypothesis checks without quadrature.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full diagnostics report as JSON and CSV files.
    Report {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `outputs.dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Classify { config } => cmd_classify(&RunConfig::load(config)?),
        Command::Evaluate { config, t } => cmd_evaluate(&RunConfig::load(config)?, *t),
        Command::Verify { config } => cmd_verify(&RunConfig::load(config)?),
        Command::Report { config, out } => cmd_report(&RunConfig::load(config)?, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(o) => {
            // a closed pipe downstream is not a failure of the run
            let _ = std::io::stdout().lock().write_all(o.stdout.as_bytes());
            ExitCode::from(o.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit() as u8)
        }
    }
}
