#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use geospot::ingest::{Coord, DomainDataset};
use geospot::measures::{to_measure, EmpiricalMeasure};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random domain with a 3-d feature space `f` and a 2-d location space `g`.
pub fn random_domain(rng: &mut ChaCha8Rng, id: &str, n: usize) -> Arc<DomainDataset> {
    let coords = (0..n)
        .map(|_| Coord::new(rng.random_range(-70.0..70.0), rng.random_range(-180.0..180.0)))
        .collect();
    let f = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.05..1.0));
    let g = Array2::from_shape_fn((n, 2), |_| rng.random_range(0.05..1.0));
    Arc::new(DomainDataset::new(id, coords, BTreeMap::from([("f".to_string(), f), ("g".to_string(), g)])).unwrap())
}

pub fn random_measure(rng: &mut ChaCha8Rng, id: &str, n: usize) -> EmpiricalMeasure {
    to_measure(random_domain(rng, id, n)).unwrap()
}

/// Random cost matrix scaled so its largest entry is 1.
pub fn max_normalized_cost(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
    let c = Array2::from_shape_fn((n, m), |_| rng.random::<f64>());
    let max = c.iter().copied().fold(0.0, f64::max);
    c / max
}
