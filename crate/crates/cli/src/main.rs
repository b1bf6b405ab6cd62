//! `respicast`: trend fits, forecasts, scoring and simulation from the command line.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use respicast::series::{Pathogen, Stream};

use error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "respicast", version, about = "Epidemic trend estimation, forecasting and scoring")]
struct Cli {
    /// Configuration file; compiled-in defaults apply when absent.
    #[arg(long, global = true, env = "RESPICAST_CONFIG")]
    config: Option<PathBuf>,

    /// Cap on worker threads. Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a P-spline trend and summarise growth.
    Trend(TrendArgs),
    /// Run the particle filter to the origin date and forecast past it.
    Forecast(ForecastArgs),
    /// Score forecast samples against observed counts.
    Score(ScoreArgs),
    /// Simulate synthetic epidemics from a scenario file.
    Simulate(SimulateArgs),
    /// List counts revised between two data rounds.
    DiffRounds(DiffArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct TrendArgs {
    /// Daily counts (`date,count`) or unit records (`event_date`).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_pathogen)]
    pub pathogen: Pathogen,
    #[arg(long, value_parser = parse_stream)]
    pub stream: Stream,
    /// Fit only the trailing days of the series.
    #[arg(long)]
    pub window_days: Option<usize>,
    /// Estimate day-of-week effects inside the model.
    #[arg(long)]
    pub dow: bool,
    /// Posterior export of an earlier fit whose tau and k become normal priors.
    #[arg(long)]
    pub priors_from: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub cases: Option<PathBuf>,
    #[arg(long)]
    pub admissions: Option<PathBuf>,
    #[arg(long, value_parser = parse_pathogen)]
    pub pathogen: Pathogen,
    /// Last day of data used; defaults to the latest day covered by every input.
    #[arg(long, value_parser = parse_date)]
    pub origin_date: Option<NaiveDate>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Forecast sample CSV; repeat for several origin dates.
    #[arg(long, required = true)]
    pub forecast: Vec<PathBuf>,
    /// Observed counts as `[TARGET=]path`; without a prefix the file stem names the target.
    #[arg(long, required = true)]
    pub truth: Vec<String>,
    #[arg(long)]
    pub transform: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    /// Directory of `<Pathogen>_<stream>.csv` files.
    #[arg(long)]
    pub earlier: PathBuf,
    #[arg(long)]
    pub later: PathBuf,
    /// Revision CSV to write.
    #[arg(long)]
    pub output: PathBuf,
}

fn parse_pathogen(s: &str) -> Result<Pathogen, String> {
    s.parse().map_err(|e: respicast::Error| e.to_string())
}

fn parse_stream(s: &str) -> Result<Stream, String> {
    s.parse().map_err(|e: respicast::Error| e.to_string())
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    respicast::io::parse_date(s).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set thread count: {e}")))?;
    }
    let config = commands::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Trend(a) => commands::trend::run(&config, &a),
        Command::Forecast(a) => commands::forecast::run(&config, &a),
        Command::Score(a) => commands::score::run(&config, &a),
        Command::Simulate(a) => commands::simulate::run(&config, &a),
        Command::DiffRounds(a) => commands::diff::run(&config, &a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
