//! `phzero`: boundary analysis and zero dynamics of hyperbolic port-Hamiltonian systems.

mod commands;
mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phzero_core::linalg::DEFAULT_TOL;
use phzero_core::zerodyn::ReduceOptions;

use commands::{CliError, FeedbackRoute, Format, Kind, Mode, Outcome, SimulateArgs, EXIT_INPUT, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "phzero", version, about = "Zero dynamics of boundary-controlled hyperbolic systems")]
struct Cli {
    /// Print reports as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Relative rank tolerance.
    #[arg(long, global = true, env = "PHZERO_TOL", default_value_t = DEFAULT_TOL)]
    tol: f64,

    /// Seed for random profiles and generated systems.
    #[arg(long, global = true, env = "PHZERO_SEED", default_value_t = 0)]
    seed: u64,

    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check shapes, finiteness and well-posedness.
    Validate { file: PathBuf },
    /// Convert to a single-speed system.
    Split {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Discrete quadruple, feedthrough and stability.
    Analyze { file: PathBuf },
    /// Reduce to the zero dynamics boundary system.
    Zerodyn {
        file: PathBuf,
        /// Upper end of the s0 scan.
        #[arg(long, env = "PHZERO_S0_MAX")]
        s0_max: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Largest output-nulling subspace of the discrete system.
    Vstar { file: PathBuf },
    /// Transmission zeros.
    Zeros {
        file: PathBuf,
        /// Samples on the unit circle for the zero count.
        #[arg(long, default_value_t = 64)]
        wgrid: usize,
    },
    /// Time-stepping simulation.
    Simulate {
        file: PathBuf,
        /// Initial profile, one row per channel.
        #[arg(long, conflicts_with = "random_initial")]
        initial: Option<PathBuf>,
        /// Draw the initial profile from the seed.
        #[arg(long)]
        random_initial: bool,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = Mode::Open)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = FeedbackRoute::Friend)]
        feedback: FeedbackRoute,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Random well-posed system.
    Generate {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 6)]
        max_n: usize,
        #[arg(long, default_value_t = 3)]
        max_m: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn write_artifact(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::Core(e.into()))
}

fn run(cli: Cli) -> Result<(Outcome, Option<PathBuf>), CliError> {
    if !(cli.tol > 0.0 && cli.tol < 1.0) {
        return Err(CliError::Usage(format!("--tol must lie in (0, 1), got {}", cli.tol)));
    }
    let reduce = |s0_max| ReduceOptions {
        s0_max,
        tol: cli.tol,
        ..ReduceOptions::default()
    };
    Ok(match cli.command {
        Command::Validate { file } => (commands::validate_cmd(&file)?, None),
        Command::Split { file, output } => (commands::split_cmd(&file)?, output),
        Command::Analyze { file } => (commands::analyze_cmd(&file)?, None),
        Command::Zerodyn { file, s0_max, output } => {
            if s0_max.is_some_and(|s| !(s > 0.0)) {
                return Err(CliError::Usage("--s0-max must be positive".into()));
            }
            (commands::zerodyn_cmd(&file, &reduce(s0_max))?, output)
        }
        Command::Vstar { file } => (commands::vstar_cmd(&file)?, None),
        Command::Zeros { file, wgrid } => (commands::zeros_cmd(&file, wgrid)?, None),
        Command::Simulate {
            file,
            initial,
            random_initial,
            steps,
            grid,
            mode,
            feedback,
            format,
            output,
        } => {
            if initial.is_none() && !random_initial {
                return Err(CliError::Usage("give --initial FILE or --random-initial".into()));
            }
            let args = SimulateArgs {
                initial,
                steps,
                grid,
                mode,
                format,
                feedback,
                seed: cli.seed,
            };
            (commands::simulate_cmd(&file, &args, &reduce(None))?, output)
        }
        Command::Generate {
            kind,
            max_n,
            max_m,
            output,
        } => (commands::generate_cmd(kind, max_n, max_m, cli.seed)?, output),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let json = cli.json;

    let (outcome, output) = match run(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.code());
        }
    };
    let stdout_text = match (&outcome.artifact, &output) {
        (Some(body), Some(path)) => {
            if let Err(e) = write_artifact(path, body) {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_INPUT);
            }
            render(&outcome, json)
        }
        (Some(body), None) => body.clone(),
        (None, _) => render(&outcome, json),
    };
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(stdout_text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
        return ExitCode::from(EXIT_INPUT);
    }
    ExitCode::from(outcome.code)
}

fn render(outcome: &Outcome, json: bool) -> String {
    if json {
        outcome.report.to_json()
    } else {
        outcome.report.to_text()
    }
}
