mod common;

use std::sync::Arc;

use geospot::cost::{GroundCostConfig, LocationMode};
use geospot::geospot::{measure_distance, GeoSpotConfig};
use geospot::ingest::DomainDataset;
use geospot::measures::{domain_measure, pool};
use geospot::selection::{budget_sample, greedy_select};
use rand::Rng;

fn instance(seed: u64, n_sources: usize) -> (Vec<Arc<DomainDataset>>, Arc<DomainDataset>) {
    let mut rng = common::rng(seed);
    let sources = (0..n_sources)
        .map(|i| {
            let n = rng.random_range(8..20);
            common::random_domain(&mut rng, &format!("S{i}"), n)
        })
        .collect();
    let target = common::random_domain(&mut rng, "T", 15);
    (sources, target)
}

/// Scores every remaining candidate from scratch and returns the first argmin.
fn exhaustive_pick(
    sources: &[Arc<DomainDataset>],
    target: &Arc<DomainDataset>,
    picked: &[String],
    cfg: &GeoSpotConfig,
) -> (String, f64) {
    let t = domain_measure(target, cfg.n_max, cfg.seed).unwrap();
    let mut best: Option<(String, f64)> = None;
    for s in sources.iter().filter(|s| !picked.iter().any(|p| p == s.id())) {
        let mut members: Vec<_> = picked
            .iter()
            .map(|id| {
                let d = sources.iter().find(|d| d.id() == id).unwrap();
                domain_measure(d, cfg.n_max, cfg.seed).unwrap()
            })
            .collect();
        members.push(domain_measure(s, cfg.n_max, cfg.seed).unwrap());
        let v = measure_distance(&pool(&members).unwrap(), &t, cfg).unwrap().value;
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((s.id().to_string(), v));
        }
    }
    best.unwrap()
}

#[test]
fn every_step_matches_exhaustive_scoring() {
    let cfg = GeoSpotConfig::new(GroundCostConfig::hybrid("f", LocationMode::Arc))
        .with_n_max(10)
        .with_seed(3);
    for seed in 0..6 {
        let (sources, target) = instance(seed, 4);
        let trace = greedy_select(&sources, &target, 3, &cfg).unwrap();
        let mut picked = Vec::new();
        for step in &trace.steps {
            let (id, score) = exhaustive_pick(&sources, &target, &picked, &cfg);
            assert_eq!(step.domain_id, id, "seed {seed}");
            assert_eq!(step.score, score);
            picked.push(id);
        }
    }
}

#[test]
fn steps_are_optimal_against_recorded_scores_and_shrink_by_one() {
    let cfg = GeoSpotConfig::new(GroundCostConfig::feature("f")).with_n_max(12);
    let (sources, target) = instance(40, 5);
    let trace = greedy_select(&sources, &target, 5, &cfg).unwrap();
    for (t, step) in trace.steps.iter().enumerate() {
        assert_eq!(step.candidates.len(), 5 - t);
        assert!(step.candidates.iter().all(|c| step.score <= c.score));
        assert!(step
            .candidates
            .iter()
            .any(|c| c.domain_id == step.domain_id && c.score == step.score));
    }
    let mut ids = trace.chosen_ids();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 5);
}

#[test]
fn shorter_runs_are_prefixes() {
    let cfg = GeoSpotConfig::new(GroundCostConfig::location(LocationMode::LocationEmbedding("g".into()))).with_n_max(9);
    let (sources, target) = instance(77, 5);
    let full = greedy_select(&sources, &target, 4, &cfg).unwrap();
    for k in 1..4 {
        let part = greedy_select(&sources, &target, k, &cfg).unwrap();
        assert_eq!(part.steps[..], full.steps[..k]);
    }
}

#[test]
fn budget_sizes_are_exact_and_balanced() {
    let cfg = GeoSpotConfig::new(GroundCostConfig::feature("f")).with_n_max(8);
    let (sources, target) = instance(5, 4);
    let trace = greedy_select(&sources, &target, 3, &cfg).unwrap();
    for budget in [0, 1, 7, 17, 24] {
        let s = budget_sample(&trace, &sources, budget, 11).unwrap();
        assert_eq!(s.len(), budget);
        let counts: Vec<usize> = trace
            .chosen_ids()
            .iter()
            .map(|id| s.iter().filter(|r| r.domain_id == *id).count())
            .collect();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
        assert_eq!(s, budget_sample(&trace, &sources, budget, 11).unwrap());
    }
}
