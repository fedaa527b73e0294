//! Seeded synthetic domains for fixtures, demos and end-to-end checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analytics::AccuracyTable;
use crate::cost::arc_distance;
use crate::error::Result;
use crate::ingest::{
    write_domain, write_manifest, Coord, DomainDataset, DomainManifest, EmbeddingSpace, MatrixFormat, SpaceKind,
};
use crate::measures::domain_seed;

pub const FEATURE_SPACE: &str = "resnet50";
pub const LOCATION_SPACE: &str = "geoclip";
const FEATURE_DIM: usize = 16;
const LOCATION_DIM: usize = 8;

/// A synthetic domain: an id and the centre its samples scatter around.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

impl Site {
    pub fn new(id: &str, lat: f64, lon: f64) -> Self {
        Site {
            id: id.to_string(),
            lat,
            lon,
        }
    }
}

/// Six country-like sites on different continents.
pub fn default_sites() -> Vec<Site> {
    vec![
        Site::new("US", 39.0, -98.0),
        Site::new("BR", -10.0, -52.0),
        Site::new("DE", 51.0, 10.0),
        Site::new("KE", 0.5, 37.9),
        Site::new("IN", 22.0, 79.0),
        Site::new("AU", -25.0, 134.0),
    ]
}

pub fn embedding_spaces() -> Vec<EmbeddingSpace> {
    vec![
        EmbeddingSpace {
            name: FEATURE_SPACE.into(),
            dimension: FEATURE_DIM,
            kind: SpaceKind::Feature,
        },
        EmbeddingSpace {
            name: LOCATION_SPACE.into(),
            dimension: LOCATION_DIM,
            kind: SpaceKind::Location,
        },
    ]
}

fn unit_vector(c: Coord) -> [f64; 3] {
    let (lat, lon) = (c.lat.to_radians(), c.lon.to_radians());
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

fn gaussian(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    Normal::new(0.0, sd).expect("finite sd").sample(rng)
}

/// Domains whose features vary smoothly with geography. Samples scatter
/// a few degrees around their site; the feature embedding is a fixed random
/// projection of the sample's position plus a per-domain style offset and
/// noise; the location embedding is a set of random Fourier features of the
/// position.
pub fn toy_domains(sites: &[Site], samples: usize, seed: u64) -> Vec<DomainDataset> {
    let mut shared = ChaCha8Rng::seed_from_u64(seed);
    let proj = Array2::from_shape_fn((FEATURE_DIM, 3), |_| gaussian(&mut shared, 1.0));
    let freq = Array2::from_shape_fn((LOCATION_DIM / 2, 3), |_| gaussian(&mut shared, 1.0));

    sites
        .iter()
        .map(|site| {
            let mut rng = ChaCha8Rng::seed_from_u64(domain_seed(seed, &site.id));
            let style = Array1::from_shape_fn(FEATURE_DIM, |_| gaussian(&mut rng, 0.3));
            let coords: Vec<Coord> = (0..samples)
                .map(|_| {
                    let lat = (site.lat + gaussian(&mut rng, 4.0)).clamp(-89.0, 89.0);
                    let lon = site.lon + gaussian(&mut rng, 6.0);
                    Coord::new(lat, (lon + 540.0) % 360.0 - 180.0)
                })
                .collect();
            let mut features = Array2::zeros((samples, FEATURE_DIM));
            let mut location = Array2::zeros((samples, LOCATION_DIM));
            for (k, c) in coords.iter().enumerate() {
                let u = unit_vector(*c);
                for d in 0..FEATURE_DIM {
                    let lin: f64 = (0..3).map(|a| proj[[d, a]] * u[a]).sum();
                    features[[k, d]] = 1.0 + lin.tanh() + style[d] + gaussian(&mut rng, 0.2);
                }
                for f in 0..LOCATION_DIM / 2 {
                    let phase: f64 = (0..3).map(|a| freq[[f, a]] * u[a]).sum();
                    location[[k, 2 * f]] = phase.cos();
                    location[[k, 2 * f + 1]] = phase.sin();
                }
            }
            DomainDataset::new(
                site.id.clone(),
                coords,
                BTreeMap::from([
                    (FEATURE_SPACE.to_string(), features),
                    (LOCATION_SPACE.to_string(), location),
                ]),
            )
            .expect("generated data is valid")
        })
        .collect()
}

/// Accuracy table with a planted relative drop
/// `delta(s, t) = -slope * gap[s, t] + noise` (in percent) and a common
/// in-domain accuracy `base`.
pub fn planted_accuracy(
    ids: &[String],
    gap: &Array2<f64>,
    slope: f64,
    noise_sd: f64,
    base: f64,
    seed: u64,
) -> AccuracyTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ids.len();
    let mut acc = Array2::zeros((n, n));
    for s in 0..n {
        for t in 0..n {
            acc[[s, t]] = if s == t {
                base
            } else {
                let delta = -slope * gap[[s, t]] + gaussian(&mut rng, noise_sd);
                (base * (1.0 + delta / 100.0)).clamp(0.0, 1.0)
            };
        }
    }
    AccuracyTable::new(ids.to_vec(), ids.to_vec(), acc).expect("accuracies clamped to [0, 1]")
}

/// Great-circle distance between site centres as a fraction of half the
/// circumference.
pub fn site_gaps(sites: &[Site]) -> Array2<f64> {
    let n = sites.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let (a, b) = (&sites[i], &sites[j]);
        arc_distance(Coord::new(a.lat, a.lon), Coord::new(b.lat, b.lon)) / std::f64::consts::PI
    })
}

/// Domains that drift along a hidden 1-D latent, with transfer drops
/// planted as a noisy linear function of the latent gap.
pub struct TransferHarness {
    pub domains: Vec<Arc<DomainDataset>>,
    pub latents: Vec<f64>,
    pub accuracy: AccuracyTable,
    /// Drop per unit of latent gap, in percent.
    pub slope: f64,
}

/// `n_domains` domains at latents evenly spaced in [0, 1]. A sample's
/// feature direction is rotated by an angle proportional to its domain's
/// latent (plus jitter), so feature distributions move monotonically along
/// the latent. The planted drop has noise sd equal to 5% of its range.
pub fn transfer_harness(n_domains: usize, samples: usize, seed: u64) -> TransferHarness {
    let slope = 40.0;
    let latents: Vec<f64> = (0..n_domains)
        .map(|d| d as f64 / (n_domains.max(2) - 1) as f64)
        .collect();
    let ids: Vec<String> = (0..n_domains).map(|d| format!("D{d}")).collect();
    let domains = ids
        .iter()
        .zip(&latents)
        .map(|(id, &z)| {
            let mut rng = ChaCha8Rng::seed_from_u64(domain_seed(seed, id));
            let coords = (0..samples)
                .map(|_| Coord::new(rng.random_range(-60.0..60.0), rng.random_range(-180.0..180.0)))
                .collect();
            let mut f = Array2::zeros((samples, 3));
            for mut row in f.outer_iter_mut() {
                let angle = z * std::f64::consts::FRAC_PI_2 + gaussian(&mut rng, 0.15);
                row[0] = angle.cos();
                row[1] = angle.sin();
                row[2] = 0.5 + gaussian(&mut rng, 0.05);
            }
            Arc::new(DomainDataset::new(id.clone(), coords, BTreeMap::from([("x".to_string(), f)])).expect("valid"))
        })
        .collect();
    let gap = Array2::from_shape_fn((n_domains, n_domains), |(i, j)| (latents[i] - latents[j]).abs());
    let accuracy = planted_accuracy(&ids, &gap, slope, 0.05 * slope, 0.8, seed ^ 0x5eed);
    TransferHarness {
        domains,
        latents,
        accuracy,
        slope,
    }
}

/// Writes datasets plus `manifest.json` under `dir`; returns the manifest path.
pub fn write_fixture(
    dir: &Path,
    domains: &[DomainDataset],
    spaces: Vec<EmbeddingSpace>,
    format: MatrixFormat,
) -> Result<PathBuf> {
    let entries = domains
        .iter()
        .map(|d| write_domain(d, dir, format))
        .collect::<Result<Vec<_>>>()?;
    let manifest = DomainManifest {
        manifest_version: 1,
        embedding_spaces: spaces,
        domains: entries,
        base_dir: PathBuf::new(),
    };
    let path = dir.join("manifest.json");
    write_manifest(&path, &manifest)?;
    Ok(path)
}
