//! Applicability maps: distances from one reference domain to every other,
//! normalized within the map and exported for plotting.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use geojson::{Feature, FeatureCollection, Geometry, JsonObject};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geospot::{GeoSpotConfig, PairwiseDistanceTable};
use crate::ingest::Coord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub domain_id: String,
    pub raw_distance: f64,
    /// Min-max scaled into [0, 1] over the map; 0 when all raw values coincide.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicabilityMap {
    pub reference_id: String,
    pub entries: Vec<MapEntry>,
    pub config: Option<GeoSpotConfig>,
}

/// Reads the reference row of `table`, drops the reference itself and any
/// failed cells, and min-max normalizes what is left.
pub fn build_map(table: &PairwiseDistanceTable, reference_id: &str) -> Result<ApplicabilityMap> {
    let r = table
        .index_of(reference_id)
        .ok_or_else(|| Error::UnknownReference(reference_id.to_string()))?;
    let raw: Vec<(String, f64)> = table
        .domain_ids
        .iter()
        .zip(table.values.row(r))
        .enumerate()
        .filter(|&(j, (_, v))| j != r && !v.is_nan())
        .map(|(_, (id, &v))| (id.clone(), v))
        .collect();
    if raw.is_empty() {
        return Err(Error::EmptyMap(reference_id.to_string()));
    }
    let lo = raw.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let hi = raw.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let entries = raw
        .into_iter()
        .map(|(domain_id, v)| MapEntry {
            domain_id,
            raw_distance: v,
            normalized: if hi > lo { (v - lo) / (hi - lo) } else { 0.0 },
        })
        .collect();
    Ok(ApplicabilityMap {
        reference_id: reference_id.to_string(),
        entries,
        config: table.config.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Csv,
    GeoJson,
}

impl MapFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MapFormat::Csv => "csv",
            MapFormat::GeoJson => "geojson",
        }
    }
}

impl FromStr for MapFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MapFormat::Csv),
            "geojson" => Ok(MapFormat::GeoJson),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

/// `domain_id,raw_distance,normalized`, one row per entry.
pub fn write_map_csv(map: &ApplicabilityMap, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in &map.entries {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Centroid on the sphere: the normalized mean of the points' unit vectors.
/// `None` for an empty set or points that cancel out.
pub fn spherical_centroid(coords: &[Coord]) -> Option<Coord> {
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for c in coords {
        let (lat, lon) = (c.lat.to_radians(), c.lon.to_radians());
        x += lat.cos() * lon.cos();
        y += lat.cos() * lon.sin();
        z += lat.sin();
    }
    let norm = (x * x + y * y + z * z).sqrt();
    if coords.is_empty() || norm < 1e-12 * coords.len() as f64 {
        return None;
    }
    let lat = (z / norm).clamp(-1.0, 1.0).asin().to_degrees();
    let lon = y.atan2(x).to_degrees();
    Some(Coord::new(lat, lon))
}

/// Geometries keyed by the `domain_id` property of a GeoJSON
/// FeatureCollection.
pub fn read_boundaries(path: &Path) -> Result<BTreeMap<String, Geometry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fc = FeatureCollection::from_str(&text)
        .map_err(|e| Error::Table(format!("{}: not a GeoJSON FeatureCollection: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for f in fc.features {
        if let (Some(id), Some(geom)) = (f.property("domain_id").and_then(|v| v.as_str()), f.geometry.clone()) {
            out.insert(id.to_string(), geom);
        }
    }
    Ok(out)
}

/// Builds the FeatureCollection for a map. Each entry takes its geometry
/// from `boundaries` when present, else a point at its centroid. Entries
/// with neither get a null geometry. Returns the collection and warnings.
pub fn map_features(
    map: &ApplicabilityMap,
    centroids: &BTreeMap<String, Coord>,
    boundaries: Option<&BTreeMap<String, Geometry>>,
) -> (FeatureCollection, Vec<String>) {
    let mut warnings = Vec::new();
    let mut features = Vec::with_capacity(map.entries.len());
    for e in &map.entries {
        let boundary = boundaries.and_then(|b| b.get(&e.domain_id)).cloned();
        if boundaries.is_some() && boundary.is_none() {
            warnings.push(format!(
                "boundary file has no feature for `{}`; using centroid",
                e.domain_id
            ));
        }
        let geometry = boundary.or_else(|| match centroids.get(&e.domain_id) {
            Some(c) => Some(Geometry::new_point([c.lon, c.lat])),
            None => {
                warnings.push(format!("no geometry for `{}`", e.domain_id));
                None
            }
        });
        let mut properties = JsonObject::new();
        properties.insert("domain_id".into(), e.domain_id.clone().into());
        properties.insert("raw_distance".into(), e.raw_distance.into());
        properties.insert("normalized".into(), e.normalized.into());
        features.push(Feature {
            geometry,
            properties: Some(properties),
            ..Default::default()
        });
    }
    let mut members = JsonObject::new();
    members.insert("reference_id".into(), map.reference_id.clone().into());
    members.insert(
        "normalization".into(),
        "min-max within map; all 0 when raw distances coincide".into(),
    );
    let fc = FeatureCollection {
        bbox: None,
        features,
        foreign_members: Some(members),
    };
    (fc, warnings)
}

/// Writes the map as GeoJSON and returns any geometry warnings.
pub fn write_map_geojson(
    map: &ApplicabilityMap,
    path: &Path,
    centroids: &BTreeMap<String, Coord>,
    boundaries: Option<&BTreeMap<String, Geometry>>,
) -> Result<Vec<String>> {
    let (fc, warnings) = map_features(map, centroids, boundaries);
    let mut text = serde_json::to_string_pretty(&fc)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(warnings)
}
