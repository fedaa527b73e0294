//! Loading domain datasets from a JSON manifest.
//!
//! A manifest lists embedding spaces (name, dimension, kind) and domains. Each
//! domain points at a coordinate CSV with header `lat,lon` and one matrix file
//! per embedding space. Matrix files ending in `.csv` are headerless CSV;
//! anything else is read as the binary `GSPT` format:
//!
//! ```text
//! b"GSPT" | rows: u64 LE | cols: u64 LE | rows*cols f64 LE, row-major
//! ```
//!
//! Binary files may carry a `<file>.json` sidecar `{"rows": .., "cols": ..}`;
//! when present it must agree with the header.
//!
//! Relative paths in a manifest resolve against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"GSPT";
const HEADER_LEN: usize = 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Feature,
    Location,
}

impl SpaceKind {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "feature" => Ok(SpaceKind::Feature),
            "location" => Ok(SpaceKind::Location),
            other => Err(Error::UnknownSpaceKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSpace {
    pub name: String,
    pub dimension: usize,
    pub kind: SpaceKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub id: String,
    pub sample_file: PathBuf,
    pub sample_count: usize,
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainManifest {
    pub manifest_version: u32,
    pub embedding_spaces: Vec<EmbeddingSpace>,
    pub domains: Vec<DomainEntry>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

// Kinds are parsed by hand so an unknown kind gets its own error.
#[derive(Deserialize)]
struct RawSpace {
    name: String,
    dimension: usize,
    kind: String,
}

#[derive(Deserialize)]
struct RawManifest {
    manifest_version: u32,
    embedding_spaces: Vec<RawSpace>,
    domains: Vec<DomainEntry>,
}

impl DomainManifest {
    pub fn space(&self, name: &str) -> Option<&EmbeddingSpace> {
        self.embedding_spaces.iter().find(|s| s.name == name)
    }

    pub fn entry(&self, id: &str) -> Option<&DomainEntry> {
        self.domains.iter().find(|d| d.id == id)
    }

    pub fn domain_ids(&self) -> Vec<String> {
        self.domains.iter().map(|d| d.id.clone()).collect()
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Structural checks that need no file access.
    pub fn validate_structure(&self) -> Result<()> {
        let mut names = HashSet::new();
        for space in &self.embedding_spaces {
            if space.name.is_empty() {
                return Err(Error::Manifest("empty embedding-space name".into()));
            }
            if space.dimension == 0 {
                return Err(Error::Manifest(format!(
                    "embedding space `{}` has dimension 0",
                    space.name
                )));
            }
            if !names.insert(space.name.as_str()) {
                return Err(Error::Manifest(format!(
                    "embedding space `{}` declared twice",
                    space.name
                )));
            }
        }
        let mut ids = HashSet::new();
        for entry in &self.domains {
            if entry.id.is_empty() {
                return Err(Error::Manifest("empty domain id".into()));
            }
            if !ids.insert(entry.id.as_str()) {
                return Err(Error::DuplicateDomain(entry.id.clone()));
            }
            for space in entry.embeddings.keys() {
                if !names.contains(space.as_str()) {
                    return Err(Error::UndeclaredSpace(space.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Reads and validates a manifest, checking that every referenced file exists
/// and every embedding file has the declared width.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DomainManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: RawManifest = serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    let embedding_spaces = raw
        .embedding_spaces
        .into_iter()
        .map(|s| {
            Ok(EmbeddingSpace {
                kind: SpaceKind::parse(&s.kind)?,
                name: s.name,
                dimension: s.dimension,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DomainManifest {
        manifest_version: raw.manifest_version,
        embedding_spaces,
        domains: raw.domains,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    manifest.validate_structure()?;

    for entry in &manifest.domains {
        let sample_file = manifest.resolve(&entry.sample_file);
        if !sample_file.is_file() {
            return Err(Error::MissingFile(sample_file));
        }
        for (space, file) in &entry.embeddings {
            let file = manifest.resolve(file);
            if !file.is_file() {
                return Err(Error::MissingFile(file));
            }
            let declared = manifest.space(space).map(|s| s.dimension).unwrap_or(0);
            let (_, cols) = read_matrix_shape(&file)?;
            if cols != declared {
                return Err(Error::DimensionMismatch {
                    space: space.clone(),
                    path: file,
                    declared,
                    found: cols,
                });
            }
        }
    }
    Ok(manifest)
}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coord {
    pub lat: f64,
    pub lon: f64,
}

impl Coord {
    pub fn new(lat: f64, lon: f64) -> Self {
        Coord { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// One loaded domain: coordinates plus row-aligned embedding matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    id: String,
    coords: Vec<Coord>,
    embeddings: BTreeMap<String, Array2<f64>>,
}

impl DomainDataset {
    /// Builds a dataset, enforcing row alignment, coordinate ranges and
    /// finite, nonzero embedding rows.
    pub fn new(id: impl Into<String>, coords: Vec<Coord>, embeddings: BTreeMap<String, Array2<f64>>) -> Result<Self> {
        let id = id.into();
        for (row, c) in coords.iter().enumerate() {
            if !c.is_valid() {
                return Err(Error::CoordinateOutOfRange {
                    path: PathBuf::from(format!("<{id}>")),
                    row,
                    lat: c.lat,
                    lon: c.lon,
                });
            }
        }
        for (space, m) in &embeddings {
            if m.nrows() != coords.len() {
                return Err(Error::RowCountMismatch {
                    domain: id.clone(),
                    what: format!("embedding `{space}`"),
                    expected: coords.len(),
                    found: m.nrows(),
                });
            }
            for (row, r) in m.outer_iter().enumerate() {
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::MalformedRow {
                        path: PathBuf::from(format!("<{id}:{space}>")),
                        row,
                        reason: "non-finite embedding value".into(),
                    });
                }
                if r.iter().all(|&v| v == 0.0) {
                    return Err(Error::ZeroEmbedding {
                        domain: id.clone(),
                        space: space.clone(),
                        row,
                    });
                }
            }
        }
        Ok(DomainDataset { id, coords, embeddings })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn embedding(&self, space: &str) -> Option<&Array2<f64>> {
        self.embeddings.get(space)
    }

    pub fn embeddings(&self) -> &BTreeMap<String, Array2<f64>> {
        &self.embeddings
    }
}

pub fn load_domain(manifest: &DomainManifest, id: &str) -> Result<DomainDataset> {
    let entry = manifest.entry(id).ok_or_else(|| Error::UnknownDomain(id.to_string()))?;
    let coord_path = manifest.resolve(&entry.sample_file);
    let coords = read_coords(&coord_path)?;
    if coords.len() != entry.sample_count {
        return Err(Error::RowCountMismatch {
            domain: id.to_string(),
            what: "sample_file".into(),
            expected: entry.sample_count,
            found: coords.len(),
        });
    }

    let mut embeddings = BTreeMap::new();
    for (space, file) in &entry.embeddings {
        let path = manifest.resolve(file);
        let m = read_matrix(&path)?;
        if m.nrows() != coords.len() {
            return Err(Error::RowCountMismatch {
                domain: id.to_string(),
                what: format!("embedding `{space}`"),
                expected: coords.len(),
                found: m.nrows(),
            });
        }
        let declared = manifest
            .space(space)
            .ok_or_else(|| Error::UndeclaredSpace(space.clone()))?
            .dimension;
        if m.ncols() != declared {
            return Err(Error::DimensionMismatch {
                space: space.clone(),
                path,
                declared,
                found: m.ncols(),
            });
        }
        if let Some(row) = m.outer_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::MalformedRow {
                path,
                row,
                reason: "non-finite embedding value".into(),
            });
        }
        embeddings.insert(space.clone(), m);
    }
    DomainDataset::new(id, coords, embeddings)
}

/// Reads a `lat,lon` coordinate CSV.
pub fn read_coords(path: &Path) -> Result<Vec<Coord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "lat" || &header[1] != "lon" {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            row: 0,
            reason: format!(
                "expected header `lat,lon`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut coords = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let malformed = |reason: String| Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            reason,
        };
        if rec.len() != 2 {
            return Err(malformed(format!("wrong column count: {}", rec.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| malformed(format!("not a number: `{s}`")));
        let (lat, lon) = (parse(&rec[0])?, parse(&rec[1])?);
        if lat.is_nan() || lon.is_nan() {
            return Err(malformed("NaN coordinate".into()));
        }
        let c = Coord::new(lat, lon);
        if !c.is_valid() {
            return Err(Error::CoordinateOutOfRange {
                path: path.to_path_buf(),
                row,
                lat,
                lon,
            });
        }
        coords.push(c);
    }
    Ok(coords)
}

pub fn write_coords(path: &Path, coords: &[Coord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = String::from("lat,lon\n");
    for c in coords {
        body.push_str(&format!("{},{}\n", c.lat, c.lon));
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// On-disk encoding of an embedding matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Binary => "gspt",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    rows: u64,
    cols: u64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    match MatrixFormat::for_path(path) {
        MatrixFormat::Csv => read_matrix_csv(path),
        MatrixFormat::Binary => read_matrix_binary(path),
    }
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    match MatrixFormat::for_path(path) {
        MatrixFormat::Csv => write_matrix_csv(path, m),
        MatrixFormat::Binary => write_matrix_binary(path, m),
    }
}

/// (rows, cols) of a matrix file. Binary files only have their header read;
/// CSV files are scanned for the row count.
pub fn read_matrix_shape(path: &Path) -> Result<(usize, usize)> {
    match MatrixFormat::for_path(path) {
        MatrixFormat::Csv => {
            let m = read_matrix_csv(path)?;
            Ok(m.dim())
        }
        MatrixFormat::Binary => {
            let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
            let mut header = [0u8; HEADER_LEN];
            file.read_exact(&mut header).map_err(|_| Error::BadMatrixFile {
                path: path.to_path_buf(),
                reason: "truncated header".into(),
            })?;
            parse_header(path, &header)
        }
    }
}

fn parse_header(path: &Path, header: &[u8]) -> Result<(usize, usize)> {
    if &header[..4] != MATRIX_MAGIC {
        return Err(Error::BadMatrixFile {
            path: path.to_path_buf(),
            reason: "bad magic bytes".into(),
        });
    }
    let rows = u64::from_le_bytes(header[4..12].try_into().unwrap());
    let cols = u64::from_le_bytes(header[12..20].try_into().unwrap());
    Ok((rows as usize, cols as usize))
}

pub fn read_matrix_binary(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::BadMatrixFile {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header".into()));
    }
    let (rows, cols) = parse_header(path, &bytes[..HEADER_LEN])?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| bad("shape overflows".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(bad(format!(
            "expected {expected} payload bytes for {rows}x{cols}, found {}",
            body.len()
        )));
    }
    let sidecar = sidecar_path(path);
    if sidecar.is_file() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: Sidecar = serde_json::from_str(&text)?;
        if meta.rows as usize != rows || meta.cols as usize != cols {
            return Err(bad(format!(
                "sidecar says {}x{}, header says {rows}x{cols}",
                meta.rows, meta.cols
            )));
        }
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| bad(e.to_string()))
}

/// Writes the binary format plus its JSON sidecar.
pub fn write_matrix_binary(path: &Path, m: &Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    let mut buf = Vec::with_capacity(HEADER_LEN + rows * cols * 8);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in m.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, &buf).map_err(|e| Error::io(path, e))?;
    let sidecar = sidecar_path(path);
    let meta = serde_json::to_string(&Sidecar {
        rows: rows as u64,
        cols: cols as u64,
    })?;
    fs::write(&sidecar, meta).map_err(|e| Error::io(&sidecar, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::MalformedRow {
                    path: path.to_path_buf(),
                    row,
                    reason: format!("wrong column count: {} (expected {c})", rec.len()),
                })
            }
            _ => {}
        }
        for field in rec.iter() {
            let v = field.parse::<f64>().map_err(|_| Error::MalformedRow {
                path: path.to_path_buf(),
                row,
                reason: format!("not a number: `{field}`"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), data).map_err(|e| Error::BadMatrixFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut body = String::new();
    for row in m.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        body.push_str(&line.join(","));
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes a dataset under `dir` (coordinates plus one matrix file per space)
/// and returns the manifest entry describing it. Paths in the entry are
/// relative to `dir`.
pub fn write_domain(dataset: &DomainDataset, dir: &Path, format: MatrixFormat) -> Result<DomainEntry> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let sample_file = PathBuf::from(format!("{}_coords.csv", dataset.id()));
    write_coords(&dir.join(&sample_file), dataset.coords())?;
    let mut embeddings = BTreeMap::new();
    for (space, m) in dataset.embeddings() {
        let file = PathBuf::from(format!("{}_{}.{}", dataset.id(), space, format.extension()));
        write_matrix(&dir.join(&file), m)?;
        embeddings.insert(space.clone(), file);
    }
    Ok(DomainEntry {
        id: dataset.id().to_string(),
        sample_file,
        sample_count: dataset.len(),
        embeddings,
    })
}

pub fn write_manifest(path: &Path, manifest: &DomainManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
