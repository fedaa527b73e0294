//! Optimal-transport distances between geospatial data domains.
//!
//! Each domain is a cloud of samples carrying a coordinate and one or more
//! embedding vectors. Domains become uniform empirical measures, pairs of
//! measures are compared with a debiased Sinkhorn divergence under a ground
//! cost that mixes feature dissimilarity with geographic dissimilarity, and
//! the resulting distances drive transfer-difficulty analysis, greedy source
//! selection and applicability maps.
//!
//! Module map:
//!
//! | module | role |
//! |--------|------|
//! | [`ingest`] | manifests, coordinate CSVs and embedding matrices |
//! | [`measures`] | uniform empirical measures, subsampling, pooling |
//! | [`cost`] | pointwise distances and normalized cost matrices |
//! | [`ot`] | exact OT, log-domain Sinkhorn, Sinkhorn divergence |
//! | [`geospot`] | per-pair distances and pairwise tables |
//! | [`selection`] | greedy source selection and budgeted sampling |
//! | [`analytics`] | transfer delta, Spearman, least squares |
//! | [`maps`] | applicability maps as CSV or GeoJSON |

pub mod analytics;
pub mod cost;
pub mod error;
pub mod geospot;
pub mod ingest;
pub mod maps;
pub mod measures;
pub mod ot;
pub mod selection;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
