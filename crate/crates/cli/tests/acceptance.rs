//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use geospot::analytics::{correlate, ols_fit, spearman, transfer_delta, AccuracyTable};
use geospot::cost::{build_cost_triple, CostMatrix, GroundCostConfig, LocationMode};
use geospot::geospot::{
    geospot_distance, measure_distance, pairwise_matrix, GeoSpotConfig, PairwiseDistanceTable, TableDiagnostics,
};
use geospot::ingest::{load_domain, load_manifest, Coord, DomainDataset};
use geospot::maps::{build_map, write_map_geojson};
use geospot::measures::{domain_measure, pool, to_measure, EmpiricalMeasure};
use geospot::ot::{exact_ot, exact_ot_by_enumeration, sinkhorn, sinkhorn_divergence, SinkhornConfig, TransportPlan};
use geospot::selection::greedy_select;
use geospot::synthetic::transfer_harness;
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy5")
}

fn max_normalized(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
    let c = Array2::from_shape_fn((n, m), |_| rng.random::<f64>());
    let max = c.iter().copied().fold(0.0, f64::max);
    c / max
}

fn random_domain(rng: &mut ChaCha8Rng, id: &str, n: usize) -> Arc<DomainDataset> {
    let coords = (0..n)
        .map(|_| Coord::new(rng.random_range(-70.0..70.0), rng.random_range(-180.0..180.0)))
        .collect();
    let f = Array2::from_shape_fn((n, 4), |_| rng.random_range(0.05..1.0));
    Arc::new(DomainDataset::new(id, coords, BTreeMap::from([("f".to_string(), f)])).unwrap())
}

fn random_measure(rng: &mut ChaCha8Rng, id: &str, n: usize) -> EmpiricalMeasure {
    to_measure(random_domain(rng, id, n)).unwrap()
}

fn criterion_1(plans: &mut Vec<(TransportPlan, Vec<f64>, Vec<f64>)>) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = vec![1.0 / 6.0; 6];
    let cfg = SinkhornConfig::default().with_epsilon(1e-4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let c = CostMatrix::from_values(max_normalized(&mut rng, 6, 6)).unwrap();
        let (exact, _) = exact_ot(&c, &u, &u).unwrap();
        let (approx, plan) = sinkhorn(&c, &u, &u, &cfg).unwrap();
        worst = worst.max((approx - exact).abs() / exact);
        plans.push((plan, u.clone(), u.clone()));
    }
    let mut worst_enum: f64 = 0.0;
    for n in 1..=8 {
        for _ in 0..3 {
            let c = CostMatrix::from_values(max_normalized(&mut rng, n, n)).unwrap();
            let w = vec![1.0 / n as f64; n];
            let (simplex, _) = exact_ot(&c, &w, &w).unwrap();
            let (brute, _) = exact_ot_by_enumeration(&c).unwrap();
            worst_enum = worst_enum.max((simplex - brute).abs());
        }
    }
    let t = start.elapsed();
    check(
        worst <= 1e-3 && worst_enum <= 1e-10 && t < Duration::from_secs(10),
        format!("max rel err {worst:.2e} (<= 1e-3), simplex vs enumeration {worst_enum:.1e} (<= 1e-10), {t:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = GroundCostConfig::hybrid("f", LocationMode::Arc);
    let s = SinkhornConfig::default();
    let mut self_max: f64 = 0.0;
    for k in 0..20 {
        let n = rng.random_range(2..12);
        let a = random_measure(&mut rng, &format!("A{k}"), n);
        self_max = self_max.max(sinkhorn_divergence(&a, &a, &g, &s).unwrap().value.abs());
    }
    let (mut asym, mut lowest): (f64, f64) = (0.0, f64::INFINITY);
    for k in 0..100 {
        let (n, m) = (rng.random_range(2..10), rng.random_range(2..10));
        let a = random_measure(&mut rng, &format!("A{k}"), n);
        let b = random_measure(&mut rng, &format!("B{k}"), m);
        let ab = sinkhorn_divergence(&a, &b, &g, &s).unwrap().value;
        let ba = sinkhorn_divergence(&b, &a, &g, &s).unwrap().value;
        asym = asym.max((ab - ba).abs());
        lowest = lowest.min(ab.min(ba));
    }
    let t = start.elapsed();
    check(
        self_max <= 1e-9 && asym <= 1e-9 && lowest >= -1e-9 && t < Duration::from_secs(10),
        format!("max |S(a,a)| {self_max:.1e}, max asymmetry {asym:.1e}, min S {lowest:.3e}, {t:.2?}"),
    )
}

fn criterion_3(mut plans: Vec<(TransportPlan, Vec<f64>, Vec<f64>)>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let (n, m) = (rng.random_range(2..9), rng.random_range(2..9));
        let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let mut b: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        a.iter_mut().for_each(|x| *x /= sa);
        b.iter_mut().for_each(|x| *x /= sb);
        let c = CostMatrix::from_values(max_normalized(&mut rng, n, m)).unwrap();
        let (_, plan) = sinkhorn(&c, &a, &b, &SinkhornConfig::default().with_epsilon(1e-3)).unwrap();
        plans.push((plan, a, b));
    }
    let manifest = load_manifest(fixture().join("manifest.json")).unwrap();
    let g = GroundCostConfig::hybrid("resnet50", LocationMode::Arc);
    let ms: Vec<EmpiricalMeasure> = ["US", "BR", "DE"]
        .iter()
        .map(|id| domain_measure(&Arc::new(load_domain(&manifest, id).unwrap()), 60, 0).unwrap())
        .collect();
    for (x, y) in [(0, 1), (1, 2), (0, 2)] {
        let t = build_cost_triple(&ms[x], &ms[y], &g).unwrap();
        let (wx, wy) = (ms[x].weights().to_vec(), ms[y].weights().to_vec());
        for (c, a, b) in [(&t.cross, &wx, &wy), (&t.self_src, &wx, &wx), (&t.self_tgt, &wy, &wy)] {
            let (_, plan) = sinkhorn(c, a, b, &SinkhornConfig::default()).unwrap();
            plans.push((plan, a.clone(), b.clone()));
        }
    }
    let converged: Vec<f64> = plans
        .iter()
        .filter(|p| p.0.converged)
        .map(|(p, a, b)| p.marginal_violation(a, b))
        .collect();
    let worst = converged.iter().copied().fold(0.0, f64::max);
    check(
        worst <= 1e-9 && !converged.is_empty(),
        format!(
            "{} of {} plans converged, max L1 marginal violation {worst:.1e} (<= 1e-9)",
            converged.len(),
            plans.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let manifest = load_manifest(fixture().join("manifest.json")).unwrap();
    let d: Vec<_> = ["US", "KE", "IN"]
        .iter()
        .map(|id| Arc::new(load_domain(&manifest, id).unwrap()))
        .collect();
    let run = |g: GroundCostConfig| GeoSpotConfig::new(g).with_n_max(50).with_seed(4);
    let mut worst: f64 = 0.0;
    for loc in [LocationMode::Arc, LocationMode::LocationEmbedding("geoclip".into())] {
        for (x, y) in [(0, 1), (1, 2), (0, 2)] {
            let hybrid1 = geospot_distance(
                &d[x],
                &d[y],
                &run(GroundCostConfig::hybrid("resnet50", loc.clone()).with_lambda(1.0)),
            )
            .unwrap();
            let feature = geospot_distance(&d[x], &d[y], &run(GroundCostConfig::feature("resnet50"))).unwrap();
            let hybrid0 = geospot_distance(
                &d[x],
                &d[y],
                &run(GroundCostConfig::hybrid("resnet50", loc.clone()).with_lambda(0.0)),
            )
            .unwrap();
            let location = geospot_distance(&d[x], &d[y], &run(GroundCostConfig::location(loc.clone()))).unwrap();
            worst = worst
                .max((hybrid1.value - feature.value).abs())
                .max((hybrid0.value - location.value).abs());
        }
    }
    check(
        worst <= 1e-12,
        format!("max |lambda-endpoint - single-modality| {worst:.1e} over 12 comparisons (<= 1e-12)"),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut steps, mut mismatches, mut prefix_fail) = (0, 0, 0);
    let mut greedy_time = Duration::ZERO;
    for inst in 0..30 {
        let n_sources = rng.random_range(2..=6);
        let k = rng.random_range(1..=3.min(n_sources));
        let sources: Vec<_> = (0..n_sources)
            .map(|i| {
                let n = rng.random_range(20..80);
                random_domain(&mut rng, &format!("S{i}"), n)
            })
            .collect();
        let target = random_domain(&mut rng, "T", 60);
        let loc = if inst % 2 == 0 {
            LocationMode::Arc
        } else {
            LocationMode::None
        };
        let ground = if inst % 2 == 0 {
            GroundCostConfig::hybrid("f", loc)
        } else {
            GroundCostConfig::feature("f")
        };
        let cfg = GeoSpotConfig::new(ground).with_n_max(50).with_seed(inst as u64);
        let timer = Instant::now();
        let trace = greedy_select(&sources, &target, k, &cfg).unwrap();
        greedy_time += timer.elapsed();

        let cached: Vec<_> = sources
            .iter()
            .map(|s| domain_measure(s, 50, cfg.seed).unwrap())
            .collect();
        let t = domain_measure(&target, 50, cfg.seed).unwrap();
        let mut picked: Vec<usize> = Vec::new();
        for step in &trace.steps {
            let mut best: Option<(usize, f64)> = None;
            for c in (0..n_sources).filter(|c| !picked.contains(c)) {
                let mut members: Vec<_> = picked.iter().map(|&p| cached[p].clone()).collect();
                members.push(cached[c].clone());
                let v = measure_distance(&pool(&members).unwrap(), &t, &cfg).unwrap().value;
                if best.is_none_or(|b| v < b.1) {
                    best = Some((c, v));
                }
            }
            let (c, v) = best.unwrap();
            steps += 1;
            if sources[c].id() != step.domain_id || v != step.score {
                mismatches += 1;
            }
            picked.push(c);
        }
        for kk in 1..k {
            if greedy_select(&sources, &target, kk, &cfg).unwrap().steps[..] != trace.steps[..kk] {
                prefix_fail += 1;
            }
        }
    }
    let t = start.elapsed();
    check(
        mismatches == 0 && prefix_fail == 0 && greedy_time < Duration::from_secs(60),
        format!(
            "{steps} greedy steps, {mismatches} disagree with exhaustive scoring, {prefix_fail} prefix failures, \
             30 greedy runs {greedy_time:.2?} (< 60 s), with oracle and prefix reruns {t:.2?}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let h = transfer_harness(8, 80, 6);
    let cfg = GeoSpotConfig::new(GroundCostConfig::feature("x"));
    let table = pairwise_matrix(&h.domains, &cfg).unwrap();
    let report = correlate(&table, &h.accuracy).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = h.domains.len();
    let mut noise = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.random();
            noise[[i, j]] = v;
            noise[[j, i]] = v;
        }
    }
    let random = PairwiseDistanceTable {
        values: noise,
        ..table.clone()
    };
    let baseline = correlate(&random, &h.accuracy).unwrap();
    let t = start.elapsed();
    check(
        report.n_pairs == 56
            && report.spearman_rho.abs() >= 0.9
            && baseline.spearman_rho.abs() <= 0.3
            && t < Duration::from_secs(60),
        format!(
            "{} pairs: feature-only rho {:.3} (|rho| >= 0.9), random distance rho {:.3} (|rho| <= 0.3), {t:.2?}",
            report.n_pairs, report.spearman_rho, baseline.spearman_rho
        ),
    )
}

fn criterion_7() -> Outcome {
    let r1 = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
    let r2 = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    let r2_oracle = 1.0 - 6.0 * 2.0 / (4.0 * 15.0);
    let x = [0.0, 1.5, 2.0, 7.0, -3.0];
    let mut r_sq_err: f64 = 0.0;
    for (a, b) in [(2.0, 1.0), (-0.5, 4.0), (13.0, -2.25)] {
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        r_sq_err = r_sq_err.max((ols_fit(&x, &y).unwrap().r_squared - 1.0).abs());
    }
    let ids = vec!["S".to_string(), "T".to_string()];
    let acc = AccuracyTable::new(ids.clone(), ids, array![[0.9, 0.30], [0.5, 0.60]]).unwrap();
    let delta = transfer_delta(&acc, "S", "T").unwrap();
    check(
        r1 == -1.0 && (r2 - r2_oracle).abs() <= 1e-15 && r_sq_err <= 1e-12 && delta == -50.0,
        format!("spearman {r1}, {r2} (oracle {r2_oracle}), max |R^2 - 1| {r_sq_err:.1e}, delta {delta}"),
    )
}

fn criterion_8() -> Outcome {
    let ids: Vec<String> = ["R", "A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let values = array![
        [0.0, 2.0, 4.0, 6.0],
        [2.0, 0.0, 1.0, 1.0],
        [4.0, 1.0, 0.0, 1.0],
        [6.0, 1.0, 1.0, 0.0]
    ];
    let table = PairwiseDistanceTable {
        domain_ids: ids,
        values,
        config: None,
        failures: vec![],
        diagnostics: TableDiagnostics::default(),
    };
    let m = build_map(&table, "R").unwrap();
    let normalized: Vec<f64> = m.entries.iter().map(|e| e.normalized).collect();
    let dir = tempfile::tempdir().unwrap();
    let centroids = BTreeMap::from([
        ("A".to_string(), Coord::new(10.0, 20.0)),
        ("B".to_string(), Coord::new(-30.0, 140.0)),
        ("C".to_string(), Coord::new(50.0, -5.0)),
    ]);
    let (p1, p2) = (dir.path().join("a.geojson"), dir.path().join("b.geojson"));
    write_map_geojson(&m, &p1, &centroids, None).unwrap();
    write_map_geojson(&m, &p2, &centroids, None).unwrap();
    let (b1, b2) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    let valid = match String::from_utf8_lossy(&b1).parse::<geojson::GeoJson>() {
        Ok(geojson::GeoJson::FeatureCollection(fc)) => {
            fc.features.len() == 3 && fc.features.iter().all(|f| f.geometry.is_some())
        }
        _ => false,
    };
    check(
        normalized == [0.0, 0.5, 1.0] && valid && b1 == b2,
        format!(
            "normalized {normalized:?}, FeatureCollection valid: {valid}, byte-identical: {}",
            b1 == b2
        ),
    )
}

fn geospot_cli(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_geospot"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
    }
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture().join("manifest.json");
    let mut tables = Vec::new();
    for (run, jobs) in [("a", "4"), ("b", "4"), ("c", "1")] {
        let out = dir.path().join(run);
        geospot_cli(&[
            "matrix",
            "--manifest",
            manifest.to_str().unwrap(),
            "--domains",
            "US,BR,DE,KE",
            "--feature",
            "resnet50",
            "--location",
            "arc",
            "--n-max",
            "60",
            "--seed",
            "9",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ])?;
        tables.push(std::fs::read(out.join("distances.csv")).map_err(|e| e.to_string())?);
    }
    let (runs, jobs) = (tables[0] == tables[1], tables[0] == tables[2]);
    check(
        runs && jobs,
        format!("4-domain CSV identical across runs: {runs}, --jobs 1 vs 4: {jobs}"),
    )
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let manifest = fixture().join("manifest.json");
    let manifest = manifest.to_str().unwrap();
    let accuracy = fixture().join("accuracy.csv");
    let table = dir.path().join("distances.csv");
    geospot_cli(&["matrix", "--manifest", manifest, "--feature", "resnet50", "--out", out])?;
    geospot_cli(&[
        "select",
        "--manifest",
        manifest,
        "--feature",
        "resnet50",
        "--target",
        "BR",
        "--k",
        "2",
        "--budget",
        "200",
        "--out",
        out,
    ])?;
    geospot_cli(&[
        "correlate",
        "--table",
        table.to_str().unwrap(),
        "--accuracy",
        accuracy.to_str().unwrap(),
        "--out",
        out,
    ])?;
    geospot_cli(&[
        "map",
        "--table",
        table.to_str().unwrap(),
        "--ref",
        "US",
        "--format",
        "geojson",
        "--manifest",
        manifest,
        "--out",
        out,
    ])?;
    let t = start.elapsed();
    let files = [
        "distances.csv",
        "selection.json",
        "samples.csv",
        "correlation.json",
        "map_US.geojson",
        "effective_config.json",
    ];
    let missing: Vec<&str> = files.iter().copied().filter(|f| !dir.path().join(f).exists()).collect();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("correlation.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    check(
        missing.is_empty() && t < Duration::from_secs(120),
        format!(
            "matrix -> select -> correlate -> map in {t:.2?}, missing outputs {missing:?}, rho {}",
            report["spearman_rho"]
        ),
    )
}

fn run(n: usize, f: impl FnOnce() -> Outcome + std::panic::UnwindSafe) -> bool {
    let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
        Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {n}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {n}: {detail}");
            false
        }
    }
}

fn main() {
    let mut plans = Vec::new();
    let mut ok = run(1, std::panic::AssertUnwindSafe(|| criterion_1(&mut plans)));
    ok &= run(2, criterion_2);
    ok &= run(3, std::panic::AssertUnwindSafe(move || criterion_3(plans)));
    ok &= run(4, criterion_4);
    ok &= run(5, criterion_5);
    ok &= run(6, criterion_6);
    ok &= run(7, criterion_7);
    ok &= run(8, criterion_8);
    ok &= run(9, criterion_9);
    ok &= run(10, criterion_10);
    if !ok {
        std::process::exit(1);
    }
}
