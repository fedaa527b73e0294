use std::collections::BTreeMap;
use std::str::FromStr;

use geojson::{FeatureCollection, GeoJson, Geometry};
use geospot::geospot::{PairwiseDistanceTable, TableDiagnostics};
use geospot::ingest::Coord;
use geospot::maps::{build_map, write_map_csv, write_map_geojson, MapFormat};
use ndarray::Array2;
use proptest::prelude::*;

fn reference_table(row: &[f64]) -> PairwiseDistanceTable {
    let n = row.len() + 1;
    let mut values = Array2::zeros((n, n));
    for (j, &v) in row.iter().enumerate() {
        values[[0, j + 1]] = v;
        values[[j + 1, 0]] = v;
    }
    PairwiseDistanceTable {
        domain_ids: std::iter::once("R".to_string())
            .chain((0..row.len()).map(|j| format!("D{j}")))
            .collect(),
        values,
        config: None,
        failures: vec![],
        diagnostics: TableDiagnostics::default(),
    }
}

fn centroids() -> BTreeMap<String, Coord> {
    BTreeMap::from([
        ("D0".to_string(), Coord::new(10.0, 20.0)),
        ("D1".to_string(), Coord::new(-5.0, 100.0)),
        ("D2".to_string(), Coord::new(45.0, -70.0)),
    ])
}

proptest! {
    #[test]
    fn normalization_preserves_order(row in proptest::collection::vec(0.0f64..5.0, 2..12)) {
        let m = build_map(&reference_table(&row), "R").unwrap();
        for a in &m.entries {
            prop_assert!((0.0..=1.0).contains(&a.normalized));
            for b in &m.entries {
                if a.raw_distance < b.raw_distance {
                    prop_assert!(a.normalized <= b.normalized);
                }
                if a.raw_distance == b.raw_distance {
                    prop_assert_eq!(a.normalized, b.normalized);
                }
            }
        }
    }
}

#[test]
fn csv_has_a_header_and_one_row_per_entry() {
    let dir = tempfile::tempdir().unwrap();
    let m = build_map(&reference_table(&[2.0, 4.0, 6.0]), "R").unwrap();
    let path = dir.path().join("m.csv");
    write_map_csv(&m, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "domain_id,raw_distance,normalized");
    assert_eq!(lines[2], "D1,4.0,0.5");
}

#[test]
fn geojson_without_boundaries_has_centroid_points_and_reexports_identically() {
    let dir = tempfile::tempdir().unwrap();
    let m = build_map(&reference_table(&[2.0, 4.0, 6.0]), "R").unwrap();
    let (p1, p2) = (dir.path().join("a.geojson"), dir.path().join("b.geojson"));
    assert!(write_map_geojson(&m, &p1, &centroids(), None).unwrap().is_empty());
    write_map_geojson(&m, &p2, &centroids(), None).unwrap();
    let text = std::fs::read_to_string(&p1).unwrap();
    assert_eq!(text, std::fs::read_to_string(&p2).unwrap());

    let GeoJson::FeatureCollection(fc) = GeoJson::from_str(&text).unwrap() else {
        panic!("not a FeatureCollection")
    };
    assert_eq!(fc.features.len(), 3);
    let g = serde_json::to_value(fc.features[1].geometry.as_ref().unwrap()).unwrap();
    assert_eq!(g, serde_json::json!({"type": "Point", "coordinates": [100.0, -5.0]}));
    assert_eq!(
        fc.features[2].property("normalized").and_then(|v| v.as_f64()),
        Some(1.0)
    );
    assert_eq!(
        fc.features[0].property("domain_id").and_then(|v| v.as_str()),
        Some("D0")
    );
}

#[test]
fn partial_boundaries_fall_back_to_centroids_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let m = build_map(&reference_table(&[2.0, 4.0, 6.0]), "R").unwrap();
    let square =
        |x: f64| Geometry::new_polygon(vec![vec![[x, 0.0], [x + 1.0, 0.0], [x + 1.0, 1.0], [x, 1.0], [x, 0.0]]]);
    let bounds = BTreeMap::from([("D0".to_string(), square(0.0)), ("D2".to_string(), square(5.0))]);
    let path = dir.path().join("m.geojson");
    let warnings = write_map_geojson(&m, &path, &centroids(), Some(&bounds)).unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].contains("D1"));
    let fc = FeatureCollection::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let kinds: Vec<&str> = fc
        .features
        .iter()
        .map(|f| f.geometry.as_ref().unwrap().value.type_name())
        .collect();
    assert_eq!(kinds, vec!["Polygon", "Point", "Polygon"]);
}

#[test]
fn unknown_format_is_rejected() {
    assert_eq!(MapFormat::from_str("geojson").unwrap(), MapFormat::GeoJson);
    assert!(MapFormat::from_str("shp").unwrap_err().to_string().contains("shp"));
}
