use serde::{Deserialize, Serialize};

use super::{sinkhorn, SinkhornConfig, TransportPlan};
use crate::cost::{CostBuilder, CostTriple, GroundCostConfig, NormalizerRecord};
use crate::error::Result;
use crate::measures::EmpiricalMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub marginal_error: f64,
}

impl From<&TransportPlan> for SolveDiagnostics {
    fn from(plan: &TransportPlan) -> Self {
        SolveDiagnostics {
            iterations: plan.iterations_used,
            converged: plan.converged,
            marginal_error: plan.marginal_error,
        }
    }
}

/// Sinkhorn divergence between two measures with the three terms it is
/// assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value: f64,
    pub cross_cost: f64,
    pub self_cost_src: f64,
    pub self_cost_tgt: f64,
    pub ground: GroundCostConfig,
    pub solver: SinkhornConfig,
    pub normalizer: NormalizerRecord,
    pub cross: SolveDiagnostics,
    pub self_src: SolveDiagnostics,
    pub self_tgt: SolveDiagnostics,
}

impl DistanceResult {
    pub fn converged(&self) -> bool {
        self.cross.converged && self.self_src.converged && self.self_tgt.converged
    }
}

/// `S(a, b) = OT(a, b) - OT(a, a) / 2 - OT(b, b) / 2` from prebuilt costs.
pub fn divergence_from_costs(
    src_weights: &[f64],
    tgt_weights: &[f64],
    costs: &CostTriple,
    config: &SinkhornConfig,
) -> Result<DistanceResult> {
    let (cross_cost, cross) = sinkhorn(&costs.cross, src_weights, tgt_weights, config)?;
    let (self_cost_src, self_src) = sinkhorn(&costs.self_src, src_weights, src_weights, config)?;
    let (self_cost_tgt, self_tgt) = sinkhorn(&costs.self_tgt, tgt_weights, tgt_weights, config)?;
    Ok(DistanceResult {
        value: cross_cost - 0.5 * (self_cost_src + self_cost_tgt),
        cross_cost,
        self_cost_src,
        self_cost_tgt,
        ground: costs.cross.config.clone(),
        solver: *config,
        normalizer: costs.cross.normalizer,
        cross: (&cross).into(),
        self_src: (&self_src).into(),
        self_tgt: (&self_tgt).into(),
    })
}

pub fn sinkhorn_divergence(
    src: &EmpiricalMeasure,
    tgt: &EmpiricalMeasure,
    costs: &impl CostBuilder,
    config: &SinkhornConfig,
) -> Result<DistanceResult> {
    config.validate()?;
    let triple = costs.build_triple(src, tgt)?;
    divergence_from_costs(src.weights(), tgt.weights(), &triple, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{build_cost_triple, CostMatrix, LocationMode};
    use crate::ingest::{Coord, DomainDataset};
    use crate::measures::to_measure;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn random_measure(rng: &mut ChaCha8Rng, id: &str, n: usize) -> EmpiricalMeasure {
        let coords = (0..n)
            .map(|_| Coord::new(rng.random_range(-60.0..60.0), rng.random_range(-180.0..180.0)))
            .collect();
        let f = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.1..1.0));
        to_measure(DomainDataset::new(id, coords, BTreeMap::from([("f".to_string(), f)])).unwrap()).unwrap()
    }

    #[test]
    fn self_divergence_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = random_measure(&mut rng, "A", 12);
        let cfg = GroundCostConfig::hybrid("f", LocationMode::Arc);
        let r = sinkhorn_divergence(&m, &m, &cfg, &SinkhornConfig::default()).unwrap();
        assert!(r.value.abs() <= 1e-9, "{}", r.value);
        assert!(r.converged());
    }

    #[test]
    fn singletons_give_the_cross_cost() {
        let cross = CostMatrix::from_values(array![[0.37]]).unwrap();
        let zero = CostMatrix::from_values(array![[0.0]]).unwrap();
        let triple = CostTriple {
            cross,
            self_src: zero.clone(),
            self_tgt: zero,
        };
        let r = divergence_from_costs(&[1.0], &[1.0], &triple, &SinkhornConfig::default()).unwrap();
        assert_abs_diff_eq!(r.value, 0.37, epsilon = 1e-15);
    }

    #[test]
    fn value_is_assembled_from_independent_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_measure(&mut rng, "A", 4);
        let b = random_measure(&mut rng, "B", 4);
        let cfg = GroundCostConfig::feature("f");
        let scfg = SinkhornConfig::default();
        let r = sinkhorn_divergence(&a, &b, &cfg, &scfg).unwrap();

        let t = build_cost_triple(&a, &b, &cfg).unwrap();
        let w = [0.25; 4];
        let xy = sinkhorn(&t.cross, &w, &w, &scfg).unwrap().0;
        let xx = sinkhorn(&t.self_src, &w, &w, &scfg).unwrap().0;
        let yy = sinkhorn(&t.self_tgt, &w, &w, &scfg).unwrap().0;
        assert_abs_diff_eq!(r.value, xy - 0.5 * xx - 0.5 * yy, epsilon = 1e-12);
        assert_eq!(r.value, r.cross_cost - 0.5 * (r.self_cost_src + r.self_cost_tgt));
    }

    #[test]
    fn divergence_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let a = random_measure(&mut rng, "A", 7);
            let b = random_measure(&mut rng, "B", 5);
            let cfg = GroundCostConfig::hybrid("f", LocationMode::Arc);
            let ab = sinkhorn_divergence(&a, &b, &cfg, &SinkhornConfig::default()).unwrap();
            let ba = sinkhorn_divergence(&b, &a, &cfg, &SinkhornConfig::default()).unwrap();
            assert_eq!(ab.value, ba.value);
        }
    }
}
