//! Uniform empirical measures over domain samples.

use std::sync::Arc;

use ndarray::Array2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{Coord, DomainDataset};

/// Default cap on points per domain before subsampling kicks in.
pub const DEFAULT_N_MAX: usize = 1000;

/// A sample in some source dataset of a measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointRef {
    pub source: usize,
    pub row: usize,
}

/// Uniformly weighted point cloud whose points are rows of one or more
/// shared datasets.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    sources: Vec<Arc<DomainDataset>>,
    points: Vec<PointRef>,
    weights: Vec<f64>,
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

impl EmpiricalMeasure {
    fn from_parts(sources: Vec<Arc<DomainDataset>>, points: Vec<PointRef>) -> Self {
        let weights = uniform(points.len());
        EmpiricalMeasure {
            sources,
            points,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[PointRef] {
        &self.points
    }

    pub fn sources(&self) -> &[Arc<DomainDataset>] {
        &self.sources
    }

    /// Ids of the datasets contributing points, in source order.
    pub fn domain_ids(&self) -> Vec<&str> {
        self.sources.iter().map(|s| s.id()).collect()
    }

    pub fn coord(&self, k: usize) -> Coord {
        let p = self.points[k];
        self.sources[p.source].coords()[p.row]
    }

    pub fn coords(&self) -> Vec<Coord> {
        (0..self.len()).map(|k| self.coord(k)).collect()
    }

    pub fn has_space(&self, space: &str) -> bool {
        self.sources.iter().all(|s| s.embedding(space).is_some())
    }

    /// Copies the embedding rows of every point into one contiguous matrix.
    pub fn gather_embedding(&self, space: &str) -> Result<Array2<f64>> {
        let mats = self
            .sources
            .iter()
            .map(|s| s.embedding(space).ok_or_else(|| Error::MissingSpace(space.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let dim = mats.first().map(|m| m.ncols()).unwrap_or(0);
        if let Some(bad) = mats.iter().find(|m| m.ncols() != dim) {
            return Err(Error::LengthMismatch(dim, bad.ncols()));
        }
        let mut out = Array2::zeros((self.len(), dim));
        for (mut dst, p) in out.outer_iter_mut().zip(&self.points) {
            dst.assign(&mats[p.source].row(p.row));
        }
        Ok(out)
    }
}

/// One point per sample, each weighted 1/n.
pub fn to_measure(dataset: impl Into<Arc<DomainDataset>>) -> Result<EmpiricalMeasure> {
    let dataset = dataset.into();
    if dataset.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let points = (0..dataset.len()).map(|row| PointRef { source: 0, row }).collect();
    Ok(EmpiricalMeasure::from_parts(vec![dataset], points))
}

/// Seeded uniform subsample without replacement. Measures with at most
/// `n_max` points come back unchanged; kept points retain their original
/// relative order.
pub fn subsample(measure: &EmpiricalMeasure, n_max: usize, seed: u64) -> EmpiricalMeasure {
    assert!(n_max >= 1, "n_max must be positive");
    if measure.len() <= n_max {
        return measure.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, measure.len(), n_max).into_vec();
    picked.sort_unstable();
    let points = picked.into_iter().map(|k| measure.points[k]).collect();
    EmpiricalMeasure::from_parts(measure.sources.clone(), points)
}

/// Concatenates measures; the result is uniform over the union of points,
/// not over the input measures.
pub fn pool(measures: &[EmpiricalMeasure]) -> Result<EmpiricalMeasure> {
    match measures {
        [] => Err(Error::EmptyPool),
        [single] => Ok(single.clone()),
        _ => {
            let mut sources = Vec::new();
            let mut points = Vec::new();
            for m in measures {
                let offset = sources.len();
                sources.extend(m.sources.iter().cloned());
                points.extend(m.points.iter().map(|p| PointRef {
                    source: p.source + offset,
                    row: p.row,
                }));
            }
            Ok(EmpiricalMeasure::from_parts(sources, points))
        }
    }
}

/// Per-domain subsampling seed, derived from the run seed and the domain id
/// so that a domain draws the same subsample wherever it appears in a list.
pub fn domain_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a over the id, then a splitmix64 finalizer over the combination.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Builds a domain's measure and subsamples it with its derived seed.
pub fn domain_measure(dataset: &Arc<DomainDataset>, n_max: usize, seed: u64) -> Result<EmpiricalMeasure> {
    let full = to_measure(dataset.clone())?;
    Ok(subsample(&full, n_max, domain_seed(seed, dataset.id())))
}
