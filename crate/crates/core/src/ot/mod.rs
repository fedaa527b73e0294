//! Optimal transport solvers.
//!
//! [`exact_ot`] solves the transport linear program with a transportation
//! simplex and is meant for small instances and as a test oracle.
//! [`sinkhorn`] solves the entropically regularized problem in the log
//! domain, and [`sinkhorn_divergence`] combines three Sinkhorn solves into
//! the debiased divergence used as the domain distance.

mod divergence;
mod exact;
mod sinkhorn;

use crate::error::{Error, Result};
use ndarray::Array2;

pub use divergence::{divergence_from_costs, sinkhorn_divergence, DistanceResult, SolveDiagnostics};
pub use exact::{exact_ot, exact_ot_by_enumeration, ENUMERATION_MAX_N, EXACT_MAX_ENTRIES};
pub use sinkhorn::{sinkhorn, SinkhornConfig};

/// A coupling between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: Array2<f64>,
    /// `<plan, cost>`.
    pub cost_value: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// L1 distance between the plan's marginals and the prescribed weights.
    pub marginal_error: f64,
}

impl TransportPlan {
    pub fn marginal_violation(&self, src: &[f64], tgt: &[f64]) -> f64 {
        marginal_violation(&self.matrix, src, tgt)
    }
}

pub(crate) fn marginal_violation(plan: &Array2<f64>, src: &[f64], tgt: &[f64]) -> f64 {
    let rows: f64 = plan.outer_iter().zip(src).map(|(r, &a)| (r.sum() - a).abs()).sum();
    let cols: f64 = plan
        .columns()
        .into_iter()
        .zip(tgt)
        .map(|(c, &b)| (c.sum() - b).abs())
        .sum();
    rows + cols
}

const WEIGHT_SUM_TOL: f64 = 1e-9;

pub(crate) fn check_problem(cost: &Array2<f64>, src: &[f64], tgt: &[f64]) -> Result<()> {
    let (rows, cols) = cost.dim();
    if rows != src.len() || cols != tgt.len() {
        return Err(Error::ShapeMismatch {
            rows,
            cols,
            n_src: src.len(),
            n_tgt: tgt.len(),
        });
    }
    for w in [src, tgt] {
        if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Numerical("weights must be positive and finite".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::NotNormalized(sum));
        }
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("cost matrix has non-finite entries".into()));
    }
    Ok(())
}

pub(crate) fn inner(plan: &Array2<f64>, cost: &Array2<f64>) -> f64 {
    plan.iter().zip(cost.iter()).map(|(p, c)| p * c).sum()
}
