//! Ground costs between samples and the cost matrices built from them.
//!
//! The pointwise cost mixes a feature term and a location term:
//!
//! ```text
//! c(z, z') = lambda * d_feat(x, x')^p + (1 - lambda) * d_loc(l, l')^p
//! ```
//!
//! `d_feat` is the cosine distance between feature embeddings. `d_loc` is
//! either the central angle between coordinates (radians) or the cosine
//! distance between location embeddings.

use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_matrix_binary, Coord};
use crate::measures::EmpiricalMeasure;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationMode {
    None,
    Arc,
    LocationEmbedding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each modality's distance matrix is divided by its own max before combining.
    #[default]
    PerComponentMax,
    /// The combined matrix is divided by its max.
    JointMax,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundCostConfig {
    pub feature_space: Option<String>,
    pub location_mode: LocationMode,
    pub lambda: f64,
    pub p: f64,
    pub normalization: Normalization,
}

impl GroundCostConfig {
    /// Feature-only cost (lambda = 1).
    pub fn feature(space: impl Into<String>) -> Self {
        GroundCostConfig {
            feature_space: Some(space.into()),
            location_mode: LocationMode::None,
            lambda: 1.0,
            p: 2.0,
            normalization: Normalization::default(),
        }
    }

    /// Location-only cost (lambda = 0).
    pub fn location(mode: LocationMode) -> Self {
        GroundCostConfig {
            feature_space: None,
            location_mode: mode,
            lambda: 0.0,
            p: 2.0,
            normalization: Normalization::default(),
        }
    }

    /// Both modalities at lambda = 0.5.
    pub fn hybrid(space: impl Into<String>, mode: LocationMode) -> Self {
        GroundCostConfig {
            feature_space: Some(space.into()),
            location_mode: mode,
            lambda: 0.5,
            p: 2.0,
            normalization: Normalization::default(),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    fn has_location(&self) -> bool {
        self.location_mode != LocationMode::None
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCostConfig(msg));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.p.is_finite() && self.p >= 1.0) {
            return bad(format!("p must be a finite value >= 1, got {}", self.p));
        }
        if self.feature_space.is_none() && !self.has_location() {
            return bad("neither a feature space nor a location mode is active".into());
        }
        if self.feature_space.is_none() && self.lambda != 0.0 {
            return bad(format!(
                "lambda = {} weights a feature term but no feature space is set",
                self.lambda
            ));
        }
        if !self.has_location() && self.lambda != 1.0 {
            return bad(format!(
                "lambda = {} weights a location term but no location mode is set",
                self.lambda
            ));
        }
        Ok(())
    }

    /// Components that carry nonzero weight, with their weights.
    fn active_components(&self) -> Vec<(Component<'_>, f64)> {
        let mut out = Vec::with_capacity(2);
        if let Some(space) = &self.feature_space {
            if self.lambda > 0.0 {
                out.push((Component::Feature(space), self.lambda));
            }
        }
        if self.lambda < 1.0 {
            match &self.location_mode {
                LocationMode::None => {}
                LocationMode::Arc => out.push((Component::Arc, 1.0 - self.lambda)),
                LocationMode::LocationEmbedding(space) => {
                    out.push((Component::LocationEmbedding(space), 1.0 - self.lambda))
                }
            }
        }
        out
    }

    /// Every embedding space this config reads.
    pub fn spaces(&self) -> Vec<&str> {
        let mut v = Vec::new();
        if let Some(s) = &self.feature_space {
            v.push(s.as_str());
        }
        if let LocationMode::LocationEmbedding(s) = &self.location_mode {
            v.push(s.as_str());
        }
        v
    }
}

#[derive(Debug, Clone, Copy)]
enum Component<'a> {
    Feature(&'a str),
    LocationEmbedding(&'a str),
    Arc,
}

/// Cosine distance `1 - cos(u, v)`, in [0, 2].
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    let nu = norm(u.iter().copied());
    let nv = norm(v.iter().copied());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let sq: f64 = u
        .iter()
        .zip(v)
        .map(|(a, b)| {
            let d = a / nu - b / nv;
            d * d
        })
        .sum();
    Ok(unit_distance(sq))
}

fn norm(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|x| x * x).sum::<f64>().sqrt()
}

// For unit vectors, 1 - <a, b> = |a - b|^2 / 2; this form is exact at 0.
#[inline]
fn unit_distance(squared_gap: f64) -> f64 {
    (0.5 * squared_gap).clamp(0.0, 2.0)
}

/// Central angle in radians between two coordinates on the unit sphere.
///
/// Uses the atan2 form, which stays accurate for coincident and antipodal
/// points. Arguments are put in a canonical order so the result is exactly
/// symmetric.
pub fn arc_distance(a: Coord, b: Coord) -> f64 {
    let (a, b) = if (b.lat, b.lon) < (a.lat, a.lon) {
        (b, a)
    } else {
        (a, b)
    };
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let (s1, c1) = p1.sin_cos();
    let (s2, c2) = p2.sin_cos();
    let (sdl, cdl) = dl.sin_cos();
    let x = c2 * sdl;
    let y = c1 * s2 - s1 * c2 * cdl;
    let num = (x * x + y * y).sqrt();
    let den = s1 * s2 + c1 * c2 * cdl;
    num.atan2(den)
}

#[inline]
fn pow_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

/// `lambda * d_x^p + (1 - lambda) * d_l^p`.
pub fn combine(d_x: f64, d_l: f64, lambda: f64, p: f64) -> f64 {
    lambda * pow_p(d_x, p) + (1.0 - lambda) * pow_p(d_l, p)
}

/// Normalizers applied while building a cost matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizerRecord {
    pub feature: Option<f64>,
    pub location: Option<f64>,
    pub joint: Option<f64>,
}

/// Dense `n_src x n_tgt` matrix of ground costs (already raised to `p`).
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub values: Array2<f64>,
    pub normalizer: NormalizerRecord,
    pub config: GroundCostConfig,
}

impl CostMatrix {
    /// Wraps a precomputed matrix, e.g. for solver tests.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numerical("cost entries must be finite and nonnegative".into()));
        }
        Ok(CostMatrix {
            values,
            normalizer: NormalizerRecord::default(),
            config: GroundCostConfig::feature("<external>"),
        })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn max(&self) -> f64 {
        max_entry(&self.values)
    }

    /// Debug dump in the binary matrix format.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        write_matrix_binary(path, &self.values)
    }
}

/// The three matrices a Sinkhorn divergence needs, on one common scale.
#[derive(Debug, Clone)]
pub struct CostTriple {
    pub cross: CostMatrix,
    pub self_src: CostMatrix,
    pub self_tgt: CostMatrix,
}

/// Anything that can produce the cross and self cost matrices for a pair.
pub trait CostBuilder: Sync {
    fn build_triple(&self, src: &EmpiricalMeasure, tgt: &EmpiricalMeasure) -> Result<CostTriple>;
}

impl CostBuilder for GroundCostConfig {
    fn build_triple(&self, src: &EmpiricalMeasure, tgt: &EmpiricalMeasure) -> Result<CostTriple> {
        build_cost_triple(src, tgt, self)
    }
}

fn max_entry(m: &Array2<f64>) -> f64 {
    m.iter().copied().fold(0.0, f64::max)
}

/// Per-measure inputs for one component, gathered once and reused.
enum Prepared {
    Unit(Array2<f64>),
    Coords(Vec<Coord>),
}

fn prepare(measure: &EmpiricalMeasure, comp: Component<'_>) -> Result<Prepared> {
    match comp {
        Component::Arc => Ok(Prepared::Coords(measure.coords())),
        Component::Feature(space) | Component::LocationEmbedding(space) => {
            let mut m = measure.gather_embedding(space)?;
            for mut row in m.outer_iter_mut() {
                let n = norm(row.iter().copied());
                if n == 0.0 {
                    return Err(Error::ZeroVector);
                }
                row.mapv_inplace(|v| v / n);
            }
            Ok(Prepared::Unit(m))
        }
    }
}

fn squared_gap(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn distances(a: &Prepared, b: &Prepared) -> Result<Array2<f64>> {
    match (a, b) {
        (Prepared::Unit(a), Prepared::Unit(b)) => {
            if a.ncols() != b.ncols() {
                return Err(Error::LengthMismatch(a.ncols(), b.ncols()));
            }
            let mut out = Array2::zeros((a.nrows(), b.nrows()));
            out.axis_iter_mut(Axis(0))
                .into_par_iter()
                .zip(a.axis_iter(Axis(0)))
                .for_each(|(mut row, ai)| {
                    for (o, bj) in row.iter_mut().zip(b.outer_iter()) {
                        *o = unit_distance(squared_gap(ai, bj));
                    }
                });
            Ok(out)
        }
        (Prepared::Coords(a), Prepared::Coords(b)) => {
            let mut out = Array2::zeros((a.len(), b.len()));
            out.axis_iter_mut(Axis(0))
                .into_par_iter()
                .zip(a.par_iter())
                .for_each(|(mut row, &ai)| {
                    for (o, &bj) in row.iter_mut().zip(b) {
                        *o = arc_distance(ai, bj);
                    }
                });
            Ok(out)
        }
        _ => unreachable!("components are prepared identically on both sides"),
    }
}

fn check_spaces(m: &EmpiricalMeasure, config: &GroundCostConfig) -> Result<()> {
    for space in config.spaces() {
        if !m.has_space(space) {
            return Err(Error::MissingSpace(space.to_string()));
        }
    }
    Ok(())
}

/// Builds the cost matrices for the given (row, col) measure pairs, all
/// normalized by one shared scale taken over every matrix in the batch.
fn build_batch(pairs: &[(&EmpiricalMeasure, &EmpiricalMeasure)], config: &GroundCostConfig) -> Result<Vec<CostMatrix>> {
    config.validate()?;
    for (a, b) in pairs {
        check_spaces(a, config)?;
        check_spaces(b, config)?;
    }
    let comps = config.active_components();
    let shape = |a: &EmpiricalMeasure, b: &EmpiricalMeasure| (a.len(), b.len());
    let mut combined: Vec<Array2<f64>> = pairs.iter().map(|(a, b)| Array2::zeros(shape(a, b))).collect();
    let mut record = NormalizerRecord::default();

    for (comp, weight) in comps {
        let mut mats = pairs
            .iter()
            .map(|(a, b)| distances(&prepare(a, comp)?, &prepare(b, comp)?))
            .collect::<Result<Vec<_>>>()?;
        if config.normalization == Normalization::PerComponentMax {
            let scale = mats.iter().map(max_entry).fold(0.0, f64::max);
            if scale > 0.0 {
                for m in &mut mats {
                    m.mapv_inplace(|v| v / scale);
                }
                match comp {
                    Component::Feature(_) => record.feature = Some(scale),
                    _ => record.location = Some(scale),
                }
            }
        }
        for (acc, d) in combined.iter_mut().zip(&mats) {
            Zip::from(acc)
                .and(d)
                .for_each(|c, &d| *c += weight * pow_p(d, config.p));
        }
    }

    if config.normalization == Normalization::JointMax {
        let scale = combined.iter().map(max_entry).fold(0.0, f64::max);
        if scale > 0.0 {
            for m in &mut combined {
                m.mapv_inplace(|v| v / scale);
            }
            record.joint = Some(scale);
        }
    }

    Ok(combined
        .into_iter()
        .map(|values| CostMatrix {
            values,
            normalizer: record,
            config: config.clone(),
        })
        .collect())
}

/// Cost matrix between two measures, normalized over this pair alone.
pub fn build_cost_matrix(
    src: &EmpiricalMeasure,
    tgt: &EmpiricalMeasure,
    config: &GroundCostConfig,
) -> Result<CostMatrix> {
    Ok(build_batch(&[(src, tgt)], config)?.remove(0))
}

/// Cross and self cost matrices under a single normalizer taken over all
/// three, so that the divergence of a measure with itself stays exactly zero.
pub fn build_cost_triple(
    src: &EmpiricalMeasure,
    tgt: &EmpiricalMeasure,
    config: &GroundCostConfig,
) -> Result<CostTriple> {
    let mut v = build_batch(&[(src, tgt), (src, src), (tgt, tgt)], config)?;
    let self_tgt = v.pop().unwrap();
    let self_src = v.pop().unwrap();
    let cross = v.pop().unwrap();
    Ok(CostTriple {
        cross,
        self_src,
        self_tgt,
    })
}
