//! Relating distances to transfer difficulty.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geospot::{write_json_file, PairwiseDistanceTable};

/// Accuracies of source-trained models on target domains. Row `s`, column
/// `t` holds the accuracy on `t` of the model trained on `s`; NaN marks a
/// missing entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub acc: Array2<f64>,
}

impl AccuracyTable {
    pub fn new(sources: Vec<String>, targets: Vec<String>, acc: Array2<f64>) -> Result<Self> {
        if acc.dim() != (sources.len(), targets.len()) {
            return Err(Error::Table(format!(
                "accuracy matrix is {:?} for {} sources and {} targets",
                acc.dim(),
                sources.len(),
                targets.len()
            )));
        }
        for ((i, j), &v) in acc.indexed_iter() {
            if !v.is_nan() && !(0.0..=1.0).contains(&v) {
                return Err(Error::AccuracyOutOfRange {
                    src: sources[i].clone(),
                    tgt: targets[j].clone(),
                    value: v,
                });
            }
        }
        Ok(AccuracyTable { sources, targets, acc })
    }

    /// Accuracy on `tgt` of the model trained on `src`.
    pub fn get(&self, src: &str, tgt: &str) -> Option<f64> {
        let i = self.sources.iter().position(|s| s == src)?;
        let j = self.targets.iter().position(|t| t == tgt)?;
        let v = self.acc[[i, j]];
        (!v.is_nan()).then_some(v)
    }

    /// CSV with a header row of target ids and a leading column of source
    /// ids; blank cells are missing.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Table(format!("{other:?}")),
            })?;
        let targets: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut sources = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != targets.len() + 1 {
                return Err(Error::Table(format!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    i + 1,
                    rec.len(),
                    targets.len() + 1
                )));
            }
            sources.push(rec[0].to_string());
            for field in rec.iter().skip(1) {
                values.push(if field.is_empty() {
                    f64::NAN
                } else {
                    field.parse().map_err(|_| {
                        Error::Table(format!("{}: bad accuracy `{field}` in row {}", path.display(), i + 1))
                    })?
                });
            }
        }
        let acc = Array2::from_shape_vec((sources.len(), targets.len()), values).expect("row lengths checked");
        Self::new(sources, targets, acc)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["source".to_string()];
        header.extend(self.targets.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.sources.iter().zip(self.acc.outer_iter()) {
            let mut rec = vec![id.clone()];
            rec.extend(
                row.iter()
                    .map(|v| if v.is_nan() { String::new() } else { v.to_string() }),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Relative accuracy change on `tgt`, in percent, from training on `src`
/// instead of on `tgt` itself.
pub fn transfer_delta(acc: &AccuracyTable, src: &str, tgt: &str) -> Result<f64> {
    let missing = |s: &str| Error::MissingAccuracy {
        src: s.to_string(),
        tgt: tgt.to_string(),
    };
    let cross = acc.get(src, tgt).ok_or_else(|| missing(src))?;
    let own = acc.get(tgt, tgt).ok_or_else(|| missing(tgt))?;
    if own == 0.0 {
        return Err(Error::DegenerateAccuracy(tgt.to_string()));
    }
    Ok((cross - own) / own * 100.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite input".into()));
    }
    Ok(())
}

/// 1-based ranks, ties sharing the average of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (cx, cy) = (centered(x), centered(y));
    let (sxx, syy) = (dot(&cx, &cx), dot(&cy, &cy));
    if sxx == 0.0 {
        return Err(Error::ConstantInput("x"));
    }
    if syy == 0.0 {
        return Err(Error::ConstantInput("y"));
    }
    Ok((dot(&cx, &cy) / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of the average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line `y = slope * x + intercept` with
/// `R^2 = 1 - SS_res / SS_tot`. With an intercept this equals the squared
/// Pearson correlation.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (cx, cy) = (centered(x), centered(y));
    let sxx = dot(&cx, &cx);
    if sxx == 0.0 {
        return Err(Error::ConstantInput("x"));
    }
    let ss_tot = dot(&cy, &cy);
    if ss_tot == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let slope = dot(&cx, &cy) / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        r_squared: 1.0 - ss_res / ss_tot,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub src: String,
    pub tgt: String,
    pub distance: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n_pairs: usize,
    pub spearman_rho: f64,
    pub r_squared: f64,
    pub slope: f64,
    pub intercept: f64,
    pub pairs: Vec<PairRecord>,
}

impl CorrelationReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json_file(path, self)
    }

    /// `src,tgt,distance,delta` rows for plotting.
    pub fn write_pairs_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for p in &self.pairs {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Every ordered pair (src != tgt) of table domains with a finite distance
/// and a computable delta.
pub fn collect_pairs(table: &PairwiseDistanceTable, acc: &AccuracyTable) -> Result<Vec<PairRecord>> {
    let mut pairs = Vec::new();
    for src in &table.domain_ids {
        for tgt in &table.domain_ids {
            if src == tgt {
                continue;
            }
            let Some(distance) = table.get(src, tgt) else { continue };
            let delta = match transfer_delta(acc, src, tgt) {
                Ok(d) => d,
                Err(Error::MissingAccuracy { .. }) => continue,
                Err(e) => return Err(e),
            };
            pairs.push(PairRecord {
                src: src.clone(),
                tgt: tgt.clone(),
                distance,
                delta,
            });
        }
    }
    Ok(pairs)
}

/// Spearman correlation and least-squares fit of delta against distance.
pub fn correlate(table: &PairwiseDistanceTable, acc: &AccuracyTable) -> Result<CorrelationReport> {
    let pairs = collect_pairs(table, acc)?;
    match pairs.len() {
        0 => return Err(Error::NoOverlappingPairs),
        1 => return Err(Error::TooFewPoints { needed: 2, got: 1 }),
        _ => {}
    }
    let d: Vec<f64> = pairs.iter().map(|p| p.distance).collect();
    let delta: Vec<f64> = pairs.iter().map(|p| p.delta).collect();
    let rho = spearman(&d, &delta)?;
    let fit = ols_fit(&d, &delta)?;
    Ok(CorrelationReport {
        n_pairs: pairs.len(),
        spearman_rho: rho,
        r_squared: fit.r_squared,
        slope: fit.slope,
        intercept: fit.intercept,
        pairs,
    })
}
