use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flexcast::pipeline::{self, AlphaSpec, PipelineConfig, PipelineError, Workspace};
use flexcast::Execution;

/// Virtual battery flexibility envelopes for a simulated heat-pump building.
#[derive(Parser)]
#[command(name = "flexcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config; defaults are used for missing keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Working directory for data, artifact and output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Risk levels, e.g. `1/N,~0.5,N/N`. Replaces the config list.
    #[arg(long = "alpha", value_delimiter = ',')]
    alphas: Vec<AlphaSpec>,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate training data and evaluation weather.
    Generate(Common),
    /// Fit the nominal model and identify the battery coefficients.
    Fit(Common),
    /// Predict envelopes for one evaluation day.
    Envelope {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        day: usize,
    },
    /// Compare predicted envelopes with re-simulated ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Overrides the number of evaluation days.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Render SVG heatmaps for the envelope CSVs in the output directory.
    Plot(Common),
    /// generate, fit, envelope, evaluate and plot in sequence.
    RunAll(Common),
}

fn workspace(c: &Common) -> Result<Workspace, PipelineError> {
    let mut ws = match &c.config {
        Some(path) => Workspace::load(path, c.out.as_deref())?,
        None => Workspace::new(PipelineConfig::default(), c.out.clone().unwrap_or_else(|| PathBuf::from("."))),
    };
    if let Some(seed) = c.seed {
        ws.config.seed = seed;
    }
    if !c.alphas.is_empty() {
        ws.config.envelope.alphas = c.alphas.clone();
    }
    ws.config.validate()?;
    if c.sequential {
        ws.exec = Execution::Sequential;
    }
    Ok(ws)
}

fn run(cli: Cli) -> Result<String, PipelineError> {
    Ok(match cli.command {
        Command::Generate(c) => pipeline::generate(&workspace(&c)?)?.to_string(),
        Command::Fit(c) => pipeline::fit(&workspace(&c)?)?.to_string(),
        Command::Envelope { common, day } => pipeline::predict(&workspace(&common)?, day)?.to_string(),
        Command::Evaluate { common, days } => {
            let mut ws = workspace(&common)?;
            if let Some(days) = days {
                ws.config.evaluation.days = days;
                ws.config.validate()?;
            }
            pipeline::evaluate(&ws)?.to_string()
        }
        Command::Plot(c) => pipeline::plot(&workspace(&c)?)?.to_string(),
        Command::RunAll(c) => pipeline::run_all(&workspace(&c)?)?.to_string(),
    })
}

#[cfg(feature = "parallel")]
fn init_threads() -> Result<(), PipelineError> {
    let Ok(value) = std::env::var("FLEXCAST_THREADS") else { return Ok(()) };
    let n: usize = value
        .parse()
        .map_err(|_| PipelineError::Config(format!("FLEXCAST_THREADS must be a thread count, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::Config(e.to_string()))
}

#[cfg(not(feature = "parallel"))]
fn init_threads() -> Result<(), PipelineError> {
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = init_threads().and_then(|_| run(cli));
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
