use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use geospot::cost::{GroundCostConfig, LocationMode, Normalization};
use geospot::geospot::GeoSpotConfig;
use geospot::measures::DEFAULT_N_MAX;
use geospot::ot::SinkhornConfig;

use crate::UsageError;

/// Settings shared by every subcommand. Unset flags fall back to the
/// `--config` file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with settings; flags given on the command line win
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Domain manifest
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Feature embedding space
    #[arg(long, value_name = "SPACE")]
    pub feature: Option<String>,
    /// Location term: `none`, `arc`, or the name of a location embedding space
    #[arg(long, value_name = "MODE")]
    pub location: Option<String>,
    /// Weight of the feature term in [0, 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ground-cost exponent (>= 1)
    #[arg(long)]
    pub p: Option<f64>,
    /// `per_component_max`, `joint_max` or `none`
    #[arg(long)]
    pub normalization: Option<String>,
    /// Entropic regularization
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iterations: Option<usize>,
    /// L1 marginal tolerance
    #[arg(long = "tol")]
    pub tolerance: Option<f64>,
    /// Per-domain subsample cap
    #[arg(long = "n-max")]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Contents of a `--config` file. `effective_config.json` files parse as
/// this too, so any run can be replayed from its output directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    manifest: Option<PathBuf>,
    feature: Option<String>,
    location: Option<String>,
    lambda: Option<f64>,
    p: Option<f64>,
    normalization: Option<String>,
    epsilon: Option<f64>,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
    log_stabilized: Option<bool>,
    epsilon_scaling: Option<bool>,
    n_max: Option<usize>,
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
}

/// Fully resolved settings, written beside every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub feature: Option<String>,
    pub location: String,
    pub lambda: f64,
    pub p: f64,
    pub normalization: String,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub log_stabilized: bool,
    pub epsilon_scaling: bool,
    pub n_max: usize,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

fn parse_normalization(s: &str) -> Result<Normalization, UsageError> {
    match s {
        "per_component_max" => Ok(Normalization::PerComponentMax),
        "joint_max" => Ok(Normalization::JointMax),
        "none" => Ok(Normalization::None),
        other => Err(UsageError(format!(
            "unknown normalization `{other}` (expected per_component_max, joint_max or none)"
        ))),
    }
}

fn location_mode(s: &str) -> LocationMode {
    match s {
        "none" => LocationMode::None,
        "arc" => LocationMode::Arc,
        space => LocationMode::LocationEmbedding(space.to_string()),
    }
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| UsageError(format!("bad config {}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let solver = SinkhornConfig::default();
        let feature = args.feature.clone().or(file.feature);
        let location = args.location.clone().or(file.location).unwrap_or_else(|| "none".into());
        let default_lambda = match (feature.is_some(), location != "none") {
            (true, true) => 0.5,
            (false, true) => 0.0,
            _ => 1.0,
        };
        let normalization = args
            .normalization
            .clone()
            .or(file.normalization)
            .unwrap_or_else(|| "per_component_max".into());
        parse_normalization(&normalization)?;
        Ok(RunConfig {
            manifest: args.manifest.clone().or(file.manifest),
            feature,
            location,
            lambda: args.lambda.or(file.lambda).unwrap_or(default_lambda),
            p: args.p.or(file.p).unwrap_or(2.0),
            normalization,
            epsilon: args.epsilon.or(file.epsilon).unwrap_or(solver.epsilon),
            max_iterations: args
                .max_iterations
                .or(file.max_iterations)
                .unwrap_or(solver.max_iterations),
            tolerance: args.tolerance.or(file.tolerance).unwrap_or(solver.tolerance),
            log_stabilized: file.log_stabilized.unwrap_or(solver.log_stabilized),
            epsilon_scaling: file.epsilon_scaling.unwrap_or(solver.epsilon_scaling),
            n_max: args.n_max.or(file.n_max).unwrap_or(DEFAULT_N_MAX),
            seed: args.seed.or(file.seed).unwrap_or(0),
            jobs: args.jobs.or(file.jobs),
            out: args
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("geospot_out")),
        })
    }

    pub fn manifest(&self) -> Result<&Path, UsageError> {
        self.manifest
            .as_deref()
            .ok_or_else(|| UsageError("--manifest is required for this command".into()))
    }

    pub fn ground(&self) -> GroundCostConfig {
        GroundCostConfig {
            feature_space: self.feature.clone(),
            location_mode: location_mode(&self.location),
            lambda: self.lambda,
            p: self.p,
            normalization: parse_normalization(&self.normalization).expect("checked in resolve"),
        }
    }

    pub fn solver(&self) -> SinkhornConfig {
        SinkhornConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            log_stabilized: self.log_stabilized,
            epsilon_scaling: self.epsilon_scaling,
        }
    }

    pub fn geospot(&self) -> GeoSpotConfig {
        GeoSpotConfig {
            ground: self.ground(),
            solver: self.solver(),
            n_max: self.n_max,
            seed: self.seed,
        }
    }
}

/// `effective_config.json`: the resolved settings plus the command that ran.
#[derive(Serialize)]
pub struct Effective<'a, A: Serialize> {
    pub command: &'static str,
    pub arguments: A,
    #[serde(flatten)]
    pub run: &'a RunConfig,
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, UsageError> {
    let bad = || UsageError(format!("bad --lambda-grid `{spec}` (expected start:stop:step)"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}
