//! Domain-level GeoSpOT distances: one pair at a time, or a full table.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::GroundCostConfig;
use crate::error::{Error, Result};
use crate::ingest::DomainDataset;
use crate::measures::{domain_measure, EmpiricalMeasure, DEFAULT_N_MAX};
use crate::ot::{sinkhorn_divergence, DistanceResult, SinkhornConfig};

/// Everything that determines a distance besides the data: ground cost,
/// solver, and the subsampling protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoSpotConfig {
    pub ground: GroundCostConfig,
    pub solver: SinkhornConfig,
    /// Per-domain cap on points; larger domains are subsampled.
    pub n_max: usize,
    pub seed: u64,
}

impl GeoSpotConfig {
    pub fn new(ground: GroundCostConfig) -> Self {
        GeoSpotConfig {
            ground,
            solver: SinkhornConfig::default(),
            n_max: DEFAULT_N_MAX,
            seed: 0,
        }
    }

    pub fn with_solver(mut self, solver: SinkhornConfig) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.ground.validate()?;
        self.solver.validate()?;
        if self.n_max == 0 {
            return Err(Error::InvalidSolverConfig("n_max must be positive".into()));
        }
        Ok(())
    }

    /// The measure a domain contributes under this config.
    pub fn measure(&self, dataset: &Arc<DomainDataset>) -> Result<EmpiricalMeasure> {
        domain_measure(dataset, self.n_max, self.seed)
    }
}

/// GeoSpOT distance between two domains after subsampling each.
pub fn geospot_distance(
    src: &Arc<DomainDataset>,
    tgt: &Arc<DomainDataset>,
    config: &GeoSpotConfig,
) -> Result<DistanceResult> {
    config.validate()?;
    measure_distance(&config.measure(src)?, &config.measure(tgt)?, config)
}

/// Distance between two prepared measures.
pub fn measure_distance(
    src: &EmpiricalMeasure,
    tgt: &EmpiricalMeasure,
    config: &GeoSpotConfig,
) -> Result<DistanceResult> {
    sinkhorn_divergence(src, tgt, &config.ground, &config.solver)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub src: String,
    pub tgt: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TableDiagnostics {
    /// Unordered off-diagonal pairs attempted.
    pub pairs: usize,
    pub failed: usize,
    /// Pairs whose three solves did not all reach the tolerance.
    pub not_converged: usize,
    pub max_marginal_error: f64,
    pub total_iterations: usize,
}

/// Square table of domain-to-domain distances. Failed cells hold NaN and
/// are listed in `failures`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistanceTable {
    pub domain_ids: Vec<String>,
    pub values: Array2<f64>,
    /// Absent when the table was read back from CSV.
    pub config: Option<GeoSpotConfig>,
    pub failures: Vec<CellFailure>,
    pub diagnostics: TableDiagnostics,
}

/// A domain slot for [`pairwise_matrix_partial`]: loaded data or the reason
/// it could not be loaded.
pub type DomainSlot = (String, std::result::Result<Arc<DomainDataset>, String>);

/// All pairwise distances among `domains`.
pub fn pairwise_matrix(domains: &[Arc<DomainDataset>], config: &GeoSpotConfig) -> Result<PairwiseDistanceTable> {
    let slots: Vec<DomainSlot> = domains.iter().map(|d| (d.id().to_string(), Ok(d.clone()))).collect();
    pairwise_matrix_partial(&slots, config)
}

/// Like [`pairwise_matrix`], but tolerates domains that failed to load:
/// their rows and columns come out NaN. Each domain is subsampled once and
/// the subsample is shared by every pair it appears in.
pub fn pairwise_matrix_partial(slots: &[DomainSlot], config: &GeoSpotConfig) -> Result<PairwiseDistanceTable> {
    config.validate()?;
    if slots.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: slots.len(),
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    for (id, _) in slots {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateDomain(id.clone()));
        }
    }

    let measures: Vec<std::result::Result<EmpiricalMeasure, String>> = slots
        .iter()
        .map(|(_, d)| match d {
            Ok(d) => config.measure(d).map_err(|e| e.to_string()),
            Err(msg) => Err(msg.clone()),
        })
        .collect();

    let n = slots.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let results: Vec<std::result::Result<DistanceResult, String>> = pairs
        .par_iter()
        .map(|&(i, j)| match (&measures[i], &measures[j]) {
            (Ok(a), Ok(b)) => measure_distance(a, b, config).map_err(|e| e.to_string()),
            (Err(e), _) => Err(format!("domain `{}`: {e}", slots[i].0)),
            (_, Err(e)) => Err(format!("domain `{}`: {e}", slots[j].0)),
        })
        .collect();

    let mut values = Array2::from_elem((n, n), f64::NAN);
    for (i, m) in measures.iter().enumerate() {
        if m.is_ok() {
            values[[i, i]] = 0.0;
        }
    }
    let mut failures = Vec::new();
    let mut diagnostics = TableDiagnostics {
        pairs: pairs.len(),
        ..Default::default()
    };
    for (&(i, j), r) in pairs.iter().zip(results) {
        match r {
            Ok(r) => {
                values[[i, j]] = r.value;
                values[[j, i]] = r.value;
                if !r.converged() {
                    diagnostics.not_converged += 1;
                }
                for d in [r.cross, r.self_src, r.self_tgt] {
                    diagnostics.max_marginal_error = diagnostics.max_marginal_error.max(d.marginal_error);
                    diagnostics.total_iterations += d.iterations;
                }
            }
            Err(message) => {
                diagnostics.failed += 1;
                failures.push(CellFailure {
                    src: slots[i].0.clone(),
                    tgt: slots[j].0.clone(),
                    message,
                });
            }
        }
    }
    Ok(PairwiseDistanceTable {
        domain_ids: slots.iter().map(|(id, _)| id.clone()).collect(),
        values,
        config: Some(config.clone()),
        failures,
        diagnostics,
    })
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    domain_ids: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
    config: Option<GeoSpotConfig>,
    diagnostics: TableDiagnostics,
    failures: Vec<CellFailure>,
}

impl PairwiseDistanceTable {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.domain_ids.iter().position(|d| d == id)
    }

    /// Distance between two domains; `None` for unknown ids or failed cells.
    pub fn get(&self, src: &str, tgt: &str) -> Option<f64> {
        let v = self.values[[self.index_of(src)?, self.index_of(tgt)?]];
        (!v.is_nan()).then_some(v)
    }

    pub fn all_failed(&self) -> bool {
        self.diagnostics.pairs > 0 && self.diagnostics.failed == self.diagnostics.pairs
    }

    /// CSV with a header row and a leading column of domain ids. Failed
    /// cells are written as `NaN`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["domain_id".to_string()];
        header.extend(self.domain_ids.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.domain_ids.iter().zip(self.values.outer_iter()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Table(format!("{other:?}")),
            })?;
        let header = r.headers()?.clone();
        let domain_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let n = domain_ids.len();
        let mut values = Array2::from_elem((n, n), f64::NAN);
        let mut rows = 0;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if i >= n {
                return Err(Error::Table(format!("{}: more rows than columns", path.display())));
            }
            if rec.get(0) != Some(domain_ids[i].as_str()) {
                return Err(Error::Table(format!(
                    "{}: row {} is labelled `{}` but column {} is `{}`",
                    path.display(),
                    i + 1,
                    rec.get(0).unwrap_or(""),
                    i + 1,
                    domain_ids[i]
                )));
            }
            if rec.len() != n + 1 {
                return Err(Error::Table(format!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    i + 1,
                    rec.len(),
                    n + 1
                )));
            }
            for (j, field) in rec.iter().skip(1).enumerate() {
                values[[i, j]] = if field.is_empty() {
                    f64::NAN
                } else {
                    field.parse().map_err(|_| {
                        Error::Table(format!("{}: bad value `{field}` at row {}", path.display(), i + 1))
                    })?
                };
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Table(format!("{}: {rows} rows for {n} columns", path.display())));
        }
        Ok(PairwiseDistanceTable {
            domain_ids,
            values,
            config: None,
            failures: Vec::new(),
            diagnostics: TableDiagnostics::default(),
        })
    }

    /// JSON with the values (`null` for failed cells), the config snapshot,
    /// diagnostics and failures.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let doc = TableJson {
            domain_ids: self.domain_ids.clone(),
            values: self
                .values
                .outer_iter()
                .map(|r| r.iter().map(|&v| (!v.is_nan()).then_some(v)).collect())
                .collect(),
            config: self.config.clone(),
            diagnostics: self.diagnostics,
            failures: self.failures.clone(),
        };
        write_json_file(path, &doc)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: TableJson = serde_json::from_str(&text)?;
        let n = doc.domain_ids.len();
        if doc.values.len() != n || doc.values.iter().any(|r| r.len() != n) {
            return Err(Error::Table(format!("{}: values are not {n}x{n}", path.display())));
        }
        let values = Array2::from_shape_fn((n, n), |(i, j)| doc.values[i][j].unwrap_or(f64::NAN));
        Ok(PairwiseDistanceTable {
            domain_ids: doc.domain_ids,
            values,
            config: doc.config,
            failures: doc.failures,
            diagnostics: doc.diagnostics,
        })
    }

    /// Reads either format, picked by extension.
    pub fn read(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::read_json(path),
            _ => Self::read_csv(path),
        }
    }
}

pub(crate) fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
