use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use serde::Serialize;

use geospot::analytics::{correlate, AccuracyTable};
use geospot::geospot::{geospot_distance, pairwise_matrix_partial, DomainSlot, PairwiseDistanceTable};
use geospot::ingest::{load_domain, load_manifest, read_coords, DomainDataset, DomainManifest, MatrixFormat};
use geospot::maps::{build_map, read_boundaries, spherical_centroid, write_map_csv, write_map_geojson, MapFormat};
use geospot::ot::DistanceResult;
use geospot::selection::{budget_sample, greedy_select, write_samples_csv};
use geospot::synthetic;
use geospot::Error;

use crate::config::{parse_grid, Effective, RunConfig};
use crate::{Exit, UsageError};

fn prepare_out<A: Serialize>(run: &RunConfig, command: &'static str, arguments: A) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(&run.out).with_context(|| format!("creating {}", run.out.display()))?;
    let effective = Effective {
        command,
        arguments,
        run,
    };
    let path = run.out.join("effective_config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&effective)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(run.out.clone())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn load(manifest: &DomainManifest, id: &str) -> Result<Arc<DomainDataset>, Error> {
    load_domain(manifest, id).map(Arc::new)
}

#[derive(Serialize)]
struct DistArgs<'a> {
    src: &'a str,
    tgt: &'a str,
}

#[derive(Serialize)]
struct DistOutput<'a> {
    src: &'a str,
    tgt: &'a str,
    #[serde(flatten)]
    result: &'a DistanceResult,
}

pub fn dist(run: &RunConfig, src: &str, tgt: &str) -> anyhow::Result<Exit> {
    let manifest = load_manifest(run.manifest()?)?;
    let cfg = run.geospot();
    cfg.validate()?;
    let out = prepare_out(run, "dist", DistArgs { src, tgt })?;
    let a = load(&manifest, src)?;
    let b = load(&manifest, tgt)?;
    let r = geospot_distance(&a, &b, &cfg)?;
    write_json(&out.join("distance.json"), &DistOutput { src, tgt, result: &r })?;
    println!("{src} -> {tgt}: {}", r.value);
    if !r.converged() {
        eprintln!(
            "warning: Sinkhorn did not reach tolerance {} within {} iterations",
            cfg.solver.tolerance, cfg.solver.max_iterations
        );
    }
    Ok(Exit::Success)
}

#[derive(Serialize)]
struct MatrixArgs<'a> {
    domains: Option<&'a [String]>,
    lambda_grid: Option<&'a str>,
}

fn domain_slots(manifest: &DomainManifest, ids: &[String]) -> (Vec<DomainSlot>, usize) {
    let mut warnings = 0;
    let slots = ids
        .iter()
        .map(|id| {
            let loaded = load(manifest, id).map_err(|e| {
                eprintln!("warning: skipping domain `{id}`: {e}");
                warnings += 1;
                e.to_string()
            });
            (id.clone(), loaded)
        })
        .collect();
    (slots, warnings)
}

fn selected_ids(manifest: &DomainManifest, wanted: Option<&[String]>) -> Result<Vec<String>, Error> {
    match wanted {
        None => Ok(manifest.domain_ids()),
        Some(ids) => {
            for id in ids {
                if manifest.entry(id).is_none() {
                    return Err(Error::UnknownDomain(id.clone()));
                }
            }
            Ok(ids.to_vec())
        }
    }
}

pub fn matrix(run: &RunConfig, domains: Option<&[String]>, lambda_grid: Option<&str>) -> anyhow::Result<Exit> {
    let manifest = load_manifest(run.manifest()?)?;
    let grid = lambda_grid.map(parse_grid).transpose()?;
    let base = run.geospot();
    match &grid {
        Some(lambdas) => {
            for &l in lambdas {
                let mut cfg = base.clone();
                cfg.ground.lambda = l;
                cfg.validate()?;
            }
        }
        None => base.validate()?,
    }
    let ids = selected_ids(&manifest, domains)?;
    let out = prepare_out(run, "matrix", MatrixArgs { domains, lambda_grid })?;
    let (slots, load_warnings) = domain_slots(&manifest, &ids);

    let runs: Vec<(String, f64)> = match grid {
        Some(lambdas) => lambdas
            .into_iter()
            .map(|l| (format!("distances_lambda_{l}"), l))
            .collect(),
        None => vec![("distances".to_string(), base.ground.lambda)],
    };
    let mut any_ok = false;
    for (stem, lambda) in runs {
        let mut cfg = base.clone();
        cfg.ground.lambda = lambda;
        let table = pairwise_matrix_partial(&slots, &cfg)?;
        table.write_csv(&out.join(format!("{stem}.csv")))?;
        table.write_json(&out.join(format!("{stem}.json")))?;
        let d = table.diagnostics;
        for f in &table.failures {
            eprintln!("warning: ({}, {}) failed: {}", f.src, f.tgt, f.message);
        }
        if d.not_converged > 0 {
            eprintln!(
                "warning: {} pair(s) did not reach the solver tolerance",
                d.not_converged
            );
        }
        eprintln!(
            "{stem}: {} pairs, {} failed, {} not converged, warnings: {}",
            d.pairs,
            d.failed,
            d.not_converged,
            load_warnings + d.failed + d.not_converged
        );
        println!("{}", out.join(format!("{stem}.csv")).display());
        any_ok |= !table.all_failed();
    }
    Ok(if any_ok { Exit::Success } else { Exit::Numerical })
}

#[derive(Serialize)]
struct SelectArgs<'a> {
    target: &'a str,
    k: usize,
    sources: Option<&'a [String]>,
    budget: Option<usize>,
}

pub fn select(
    run: &RunConfig,
    target: &str,
    k: usize,
    sources: Option<&[String]>,
    budget: Option<usize>,
) -> anyhow::Result<Exit> {
    let manifest = load_manifest(run.manifest()?)?;
    let cfg = run.geospot();
    cfg.validate()?;
    let target_data = load(&manifest, target)?;
    let source_ids: Vec<String> = match sources {
        Some(ids) => selected_ids(&manifest, Some(ids))?,
        None => manifest.domain_ids().into_iter().filter(|id| id != target).collect(),
    };
    let available = source_ids.len();
    if k == 0 || k > available {
        return Err(Error::KOutOfRange { k, available }.into());
    }
    let out = prepare_out(
        run,
        "select",
        SelectArgs {
            target,
            k,
            sources,
            budget,
        },
    )?;
    let source_data = source_ids
        .iter()
        .map(|id| load(&manifest, id))
        .collect::<Result<Vec<_>, _>>()?;
    let trace = greedy_select(&source_data, &target_data, k, &cfg)?;
    trace.write_json(&out.join("selection.json"))?;
    for (t, step) in trace.steps.iter().enumerate() {
        println!("{}\t{}\t{}", t + 1, step.domain_id, step.score);
    }
    if let Some(n) = budget {
        let samples = budget_sample(&trace, &source_data, n, cfg.seed)?;
        write_samples_csv(&out.join("samples.csv"), &samples)?;
    }
    Ok(Exit::Success)
}

#[derive(Serialize)]
struct CorrelateArgs<'a> {
    table: &'a Path,
    accuracy: &'a Path,
}

pub fn correlate_cmd(run: &RunConfig, table: &Path, accuracy: &Path) -> anyhow::Result<Exit> {
    let t = PairwiseDistanceTable::read(table)?;
    let acc = AccuracyTable::read_csv(accuracy)?;
    let report = correlate(&t, &acc)?;
    let out = prepare_out(run, "correlate", CorrelateArgs { table, accuracy })?;
    report.write_json(&out.join("correlation.json"))?;
    report.write_pairs_csv(&out.join("pairs.csv"))?;
    println!("n_pairs\t{}", report.n_pairs);
    println!("spearman_rho\t{}", report.spearman_rho);
    println!("r_squared\t{}", report.r_squared);
    Ok(Exit::Success)
}

#[derive(Serialize)]
struct MapArgs<'a> {
    table: &'a Path,
    reference: &'a str,
    format: &'a str,
    boundaries: Option<&'a Path>,
}

fn centroids(manifest: &DomainManifest) -> BTreeMap<String, geospot::ingest::Coord> {
    let mut out = BTreeMap::new();
    for entry in &manifest.domains {
        match read_coords(&manifest.resolve(&entry.sample_file)) {
            Ok(coords) => {
                if let Some(c) = spherical_centroid(&coords) {
                    out.insert(entry.id.clone(), c);
                }
            }
            Err(e) => eprintln!("warning: no centroid for `{}`: {e}", entry.id),
        }
    }
    out
}

pub fn map(
    run: &RunConfig,
    table: &Path,
    reference: &str,
    format: &str,
    boundaries: Option<&Path>,
) -> anyhow::Result<Exit> {
    let fmt: MapFormat = format.parse()?;
    let t = PairwiseDistanceTable::read(table)?;
    let m = build_map(&t, reference)?;
    let out = prepare_out(
        run,
        "map",
        MapArgs {
            table,
            reference,
            format,
            boundaries,
        },
    )?;
    let path = out.join(format!("map_{reference}.{}", fmt.extension()));
    match fmt {
        MapFormat::Csv => write_map_csv(&m, &path)?,
        MapFormat::GeoJson => {
            let cents = match &run.manifest {
                Some(p) => centroids(&load_manifest(p)?),
                None => BTreeMap::new(),
            };
            let bounds = boundaries.map(read_boundaries).transpose()?;
            for w in write_map_geojson(&m, &path, &cents, bounds.as_ref())? {
                eprintln!("warning: {w}");
            }
        }
    }
    println!("{}", path.display());
    Ok(Exit::Success)
}

pub fn synth(out: &Path, domains: usize, samples: usize, seed: u64, binary: bool) -> anyhow::Result<Exit> {
    let sites = synthetic::default_sites();
    if domains == 0 || domains > sites.len() {
        return Err(UsageError(format!("--domains must be between 1 and {}", sites.len())).into());
    }
    let sites = &sites[..domains];
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let data = synthetic::toy_domains(sites, samples, seed);
    let format = if binary {
        MatrixFormat::Binary
    } else {
        MatrixFormat::Csv
    };
    let manifest = synthetic::write_fixture(out, &data, synthetic::embedding_spaces(), format)?;
    let ids: Vec<String> = sites.iter().map(|s| s.id.clone()).collect();
    let acc = synthetic::planted_accuracy(&ids, &synthetic::site_gaps(sites), 60.0, 1.5, 0.8, seed);
    acc.write_csv(&out.join("accuracy.csv"))?;
    println!("{}", manifest.display());
    Ok(Exit::Success)
}
