//! `geospot`: optimal-transport distances between geospatial domains.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geospot::ErrorClass;

use config::{RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "geospot",
    version,
    about = "Optimal-transport distances between geospatial data domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distance between two domains
    Dist {
        #[arg(long)]
        src: String,
        #[arg(long)]
        tgt: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Pairwise distance table over the manifest's domains
    Matrix {
        /// Comma-separated subset of domain ids
        #[arg(long, value_delimiter = ',')]
        domains: Option<Vec<String>>,
        /// Sweep lambda as start:stop:step, one table per value
        #[arg(long, value_name = "START:STOP:STEP")]
        lambda_grid: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Greedy source-domain selection for a target
    Select {
        #[arg(long)]
        target: String,
        #[arg(long)]
        k: usize,
        /// Comma-separated candidate sources (default: every other domain)
        #[arg(long, value_delimiter = ',')]
        sources: Option<Vec<String>>,
        /// Also draw this many training samples from the picks
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Correlate distances with transfer drops
    Correlate {
        /// Distance table (CSV or JSON)
        #[arg(long)]
        table: PathBuf,
        /// Accuracy table CSV: rows are source models, columns target domains
        #[arg(long)]
        accuracy: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Applicability map from a reference domain
    Map {
        #[arg(long)]
        table: PathBuf,
        #[arg(long = "ref")]
        reference: String,
        /// `csv` or `geojson`
        #[arg(long, default_value = "csv")]
        format: String,
        /// GeoJSON FeatureCollection keyed by a `domain_id` property
        #[arg(long)]
        boundaries: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a synthetic fixture (manifest, domains, accuracy table)
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        domains: usize,
        #[arg(long, default_value_t = 120)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Store embeddings as CSV instead of binary
        #[arg(long)]
        csv: bool,
    },
}

/// A problem with how the tool was invoked.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

fn classify(err: &anyhow::Error) -> Exit {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return Exit::Usage;
        }
        if let Some(e) = cause.downcast_ref::<geospot::Error>() {
            return match e.class() {
                ErrorClass::Usage => Exit::Usage,
                ErrorClass::Data => Exit::Data,
                ErrorClass::Numerical => Exit::Numerical,
            };
        }
    }
    Exit::Data
}

fn init_threads(run: &RunArgs) -> anyhow::Result<RunConfig> {
    let cfg = RunConfig::resolve(run)?;
    if let Some(jobs) = cfg.jobs {
        if jobs == 0 {
            return Err(UsageError("--jobs must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<Exit> {
    match cli.command {
        Command::Dist { src, tgt, run } => commands::dist(&init_threads(&run)?, &src, &tgt),
        Command::Matrix {
            domains,
            lambda_grid,
            run,
        } => commands::matrix(&init_threads(&run)?, domains.as_deref(), lambda_grid.as_deref()),
        Command::Select {
            target,
            k,
            sources,
            budget,
            run,
        } => commands::select(&init_threads(&run)?, &target, k, sources.as_deref(), budget),
        Command::Correlate { table, accuracy, run } => commands::correlate_cmd(&init_threads(&run)?, &table, &accuracy),
        Command::Map {
            table,
            reference,
            format,
            boundaries,
            run,
        } => commands::map(&init_threads(&run)?, &table, &reference, &format, boundaries.as_deref()),
        Command::Synth {
            out,
            domains,
            samples,
            seed,
            csv,
        } => commands::synth(&out, domains, samples, seed, !csv),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Usage as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e) as u8)
        }
    }
}
