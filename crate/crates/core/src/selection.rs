//! Greedy source-domain selection and budgeted sampling from the picks.

use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geospot::{measure_distance, write_json_file, GeoSpotConfig};
use crate::ingest::DomainDataset;
use crate::measures::{domain_seed, pool, EmpiricalMeasure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub domain_id: String,
    /// Distance from the pool (previous picks plus this candidate) to the target.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub domain_id: String,
    pub score: f64,
    /// Every candidate still available at this step, in input order.
    pub candidates: Vec<CandidateScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub target_id: String,
    pub steps: Vec<SelectionStep>,
    pub config: GeoSpotConfig,
}

impl SelectionTrace {
    pub fn chosen_ids(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.domain_id.as_str()).collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json_file(path, self)
    }
}

/// Picks `k` sources one at a time, each step adding the candidate whose
/// pool with the earlier picks lies closest to the target. Ties go to the
/// candidate listed first. Every domain is subsampled once per run and the
/// cached subsamples are pooled.
pub fn greedy_select(
    sources: &[Arc<DomainDataset>],
    target: &Arc<DomainDataset>,
    k: usize,
    config: &GeoSpotConfig,
) -> Result<SelectionTrace> {
    config.validate()?;
    if k == 0 || k > sources.len() {
        return Err(Error::KOutOfRange {
            k,
            available: sources.len(),
        });
    }
    if sources.iter().any(|s| s.id() == target.id()) {
        return Err(Error::TargetInSources(target.id().to_string()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in sources {
        if !seen.insert(s.id()) {
            return Err(Error::DuplicateDomain(s.id().to_string()));
        }
    }

    let target_measure = config.measure(target)?;
    let cached = sources.iter().map(|s| config.measure(s)).collect::<Result<Vec<_>>>()?;
    let mut remaining: Vec<usize> = (0..sources.len()).collect();
    let mut picked: Vec<EmpiricalMeasure> = Vec::with_capacity(k);
    let mut steps = Vec::with_capacity(k);

    for _ in 0..k {
        let scores = remaining
            .par_iter()
            .map(|&c| {
                let mut members = picked.clone();
                members.push(cached[c].clone());
                measure_distance(&pool(&members)?, &target_measure, config).map(|r| r.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut best = 0;
        for (pos, &s) in scores.iter().enumerate() {
            if s.is_nan() {
                return Err(Error::Numerical(format!(
                    "NaN score for candidate `{}`",
                    sources[remaining[pos]].id()
                )));
            }
            if s < scores[best] {
                best = pos;
            }
        }
        let candidates = remaining
            .iter()
            .zip(&scores)
            .map(|(&c, &score)| CandidateScore {
                domain_id: sources[c].id().to_string(),
                score,
            })
            .collect();
        let chosen = remaining.remove(best);
        picked.push(cached[chosen].clone());
        steps.push(SelectionStep {
            domain_id: sources[chosen].id().to_string(),
            score: scores[best],
            candidates,
        });
    }

    Ok(SelectionTrace {
        target_id: target.id().to_string(),
        steps,
        config: config.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRef {
    pub domain_id: String,
    pub row_index: usize,
}

/// Draws `budget` rows from the chosen domains: `budget / K` each, with
/// the remainder going one apiece to the earliest picks. Rows are drawn
/// uniformly without replacement and listed in ascending order per domain.
pub fn budget_sample(
    trace: &SelectionTrace,
    sources: &[Arc<DomainDataset>],
    budget: usize,
    seed: u64,
) -> Result<Vec<SampleRef>> {
    let chosen = trace.chosen_ids();
    let k = chosen.len();
    if k == 0 {
        return Err(Error::KOutOfRange {
            k: 0,
            available: sources.len(),
        });
    }
    let (base, extra) = (budget / k, budget % k);
    let mut out = Vec::with_capacity(budget);
    for (pos, id) in chosen.iter().enumerate() {
        let dataset = sources
            .iter()
            .find(|s| s.id() == *id)
            .ok_or_else(|| Error::UnknownDomain(id.to_string()))?;
        let want = base + usize::from(pos < extra);
        if want > dataset.len() {
            return Err(Error::InsufficientData {
                domain: id.to_string(),
                requested: want,
                available: dataset.len(),
                shortfall: want - dataset.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(domain_seed(seed, id));
        let mut rows = index::sample(&mut rng, dataset.len(), want).into_vec();
        rows.sort_unstable();
        out.extend(rows.into_iter().map(|row_index| SampleRef {
            domain_id: id.to_string(),
            row_index,
        }));
    }
    Ok(out)
}

/// `domain_id,row_index` CSV.
pub fn write_samples_csv(path: &Path, samples: &[SampleRef]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
