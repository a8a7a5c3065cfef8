//! Drive-test and cell-site records, and the CSV files they live in.
//!
//! Drive-test CSV header: `timestamp_ms,lat_deg,lon_deg,rsrp_dbm,cell_id`
//! (the `rsrp_dbm` field may be empty — a point where no RSRP was recorded).
//! Cell-site CSV header: `cell_id,lat_deg,lon_deg`. Both readers skip `#`
//! comment lines, so files written by the CLI (which carry a provenance
//! comment) load back unchanged.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

/// Opaque serving-cell identifier. Not parsed into PLMN/eNB/sector parts;
/// only identity matters here.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub String);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CellId {
    fn from(s: &str) -> Self {
        CellId(s.to_string())
    }
}

/// Stable measurement identifier: the index of the record in its dataset
/// after time sorting.
pub type MeasurementId = u64;

/// One drive-test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub id: MeasurementId,
    pub timestamp_ms: i64,
    pub pos: GeoPoint,
    /// Received power in dBm; `None` for points where RSRP was not recorded.
    pub rsrp_dbm: Option<f64>,
    pub serving_cell: CellId,
}

/// A known base-station sector: identifier and position.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSite {
    pub cell_id: CellId,
    pub pos: GeoPoint,
}

/// A time-ordered drive test. `measurements` is sorted ascending by
/// `timestamp_ms` and ids equal vector indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveTestDataset {
    pub measurements: Vec<Measurement>,
    pub source_path: String,
}

impl DriveTestDataset {
    /// Builds a dataset from raw records: sorts by timestamp (stable, so
    /// equal timestamps keep input order) and assigns sequential ids.
    pub fn from_records(
        mut records: Vec<(i64, GeoPoint, Option<f64>, CellId)>,
        source_path: impl Into<String>,
    ) -> Self {
        records.sort_by_key(|r| r.0);
        let measurements = records
            .into_iter()
            .enumerate()
            .map(
                |(i, (timestamp_ms, pos, rsrp_dbm, serving_cell))| Measurement {
                    id: i as MeasurementId,
                    timestamp_ms,
                    pos,
                    rsrp_dbm,
                    serving_cell,
                },
            )
            .collect();
        Self {
            measurements,
            source_path: source_path.into(),
        }
    }

    /// Number of samples that carry an RSRP value.
    pub fn measured_count(&self) -> usize {
        self.measurements
            .iter()
            .filter(|m| m.rsrp_dbm.is_some())
            .count()
    }
}

/// Cell-site lookup table keyed by cell id.
#[derive(Debug, Clone)]
pub struct SiteDb {
    sites: Vec<CellSite>,
    index: std::collections::HashMap<CellId, usize>,
}

impl SiteDb {
    pub fn new(sites: Vec<CellSite>) -> Result<Self, DataError> {
        let mut index = std::collections::HashMap::with_capacity(sites.len());
        for (i, s) in sites.iter().enumerate() {
            if index.insert(s.cell_id.clone(), i).is_some() {
                return Err(DataError::DuplicateCellId(s.cell_id.clone()));
            }
        }
        Ok(Self { sites, index })
    }

    pub fn get(&self, id: &CellId) -> Option<&CellSite> {
        self.index.get(id).map(|&i| &self.sites[i])
    }

    pub fn sites(&self) -> &[CellSite] {
        &self.sites
    }
}

/// Sanity range for RSRP values in dBm. Wider than the 3GPP reporting range
/// so raw-chipset logs pass, tight enough to catch mW-vs-dBm unit errors.
pub const RSRP_RANGE_DBM: (f64, f64) = (-150.0, 0.0);

const DRIVE_TEST_HEADER: [&str; 5] = ["timestamp_ms", "lat_deg", "lon_deg", "rsrp_dbm", "cell_id"];
const CELL_SITE_HEADER: [&str; 3] = ["cell_id", "lat_deg", "lon_deg"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema mismatch: expected header `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("value out of range at line {line}: {field} = {value}")]
    OutOfRange {
        line: u64,
        field: &'static str,
        value: f64,
    },
    #[error("duplicate cell id `{0}`")]
    DuplicateCellId(CellId),
}

fn open(path: &Path) -> Result<std::fs::File, DataError> {
    std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(rdr)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), DataError> {
    let found = rdr.headers().map_err(|e| DataError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if found.iter().collect::<Vec<_>>() != expected {
        return Err(DataError::SchemaMismatch {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, csv::Position::line)
}

fn parse_f64(record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, DataError> {
    let raw = record.get(idx).unwrap_or("");
    raw.trim()
        .parse::<f64>()
        .map_err(|_| DataError::MalformedRow {
            line: record_line(record),
            reason: format!("cannot parse {name} from `{raw}`"),
        })
}

fn parse_geo(
    record: &csv::StringRecord,
    lat_idx: usize,
    lon_idx: usize,
) -> Result<GeoPoint, DataError> {
    let lat = parse_f64(record, lat_idx, "lat_deg")?;
    let lon = parse_f64(record, lon_idx, "lon_deg")?;
    let line = record_line(record);
    if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
        return Err(DataError::OutOfRange {
            line,
            field: "lat_deg",
            value: lat,
        });
    }
    if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
        return Err(DataError::OutOfRange {
            line,
            field: "lon_deg",
            value: lon,
        });
    }
    Ok(GeoPoint {
        lat_deg: lat,
        lon_deg: lon,
    })
}

/// Loads a drive-test CSV. Rows with an empty `rsrp_dbm` field become
/// measurements without an RSRP value; they stay in the dataset but never
/// enter a neighborhood. The result is sorted by timestamp and row count is
/// preserved: a row either loads or the whole call errors.
pub fn load_drive_test(path: impl AsRef<Path>) -> Result<DriveTestDataset, DataError> {
    let path = path.as_ref();
    let dataset = read_drive_test(open(path)?, &path.display().to_string())?;
    Ok(dataset)
}

/// Same as [`load_drive_test`] but from any reader.
pub fn read_drive_test<R: Read>(rdr: R, source: &str) -> Result<DriveTestDataset, DataError> {
    let mut rdr = csv_reader(rdr);
    check_header(&mut rdr, &DRIVE_TEST_HEADER)?;

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| DataError::MalformedRow {
            line: e.position().map_or(0, csv::Position::line),
            reason: e.to_string(),
        })?;
        let line = record_line(&row);

        let ts = row
            .get(0)
            .unwrap_or("")
            .trim()
            .parse::<i64>()
            .map_err(|_| DataError::MalformedRow {
                line,
                reason: format!(
                    "cannot parse timestamp_ms from `{}`",
                    row.get(0).unwrap_or("")
                ),
            })?;
        if ts < 0 {
            return Err(DataError::OutOfRange {
                line,
                field: "timestamp_ms",
                value: ts as f64,
            });
        }

        let pos = parse_geo(&row, 1, 2)?;

        let rsrp_raw = row.get(3).unwrap_or("").trim();
        let rsrp = if rsrp_raw.is_empty() {
            None
        } else {
            let v = parse_f64(&row, 3, "rsrp_dbm")?;
            if !(RSRP_RANGE_DBM.0..=RSRP_RANGE_DBM.1).contains(&v) {
                return Err(DataError::OutOfRange {
                    line,
                    field: "rsrp_dbm",
                    value: v,
                });
            }
            Some(v)
        };

        let cell = row.get(4).unwrap_or("").trim();
        if cell.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "empty cell_id".into(),
            });
        }

        records.push((ts, pos, rsrp, CellId::from(cell)));
    }

    Ok(DriveTestDataset::from_records(records, source))
}

/// Loads a cell-site CSV, rejecting duplicate cell ids.
pub fn load_cell_sites(path: impl AsRef<Path>) -> Result<Vec<CellSite>, DataError> {
    let path = path.as_ref();
    read_cell_sites(open(path)?)
}

/// Same as [`load_cell_sites`] but from any reader.
pub fn read_cell_sites<R: Read>(rdr: R) -> Result<Vec<CellSite>, DataError> {
    let mut rdr = csv_reader(rdr);
    check_header(&mut rdr, &CELL_SITE_HEADER)?;

    let mut sites: Vec<CellSite> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| DataError::MalformedRow {
            line: e.position().map_or(0, csv::Position::line),
            reason: e.to_string(),
        })?;
        let line = record_line(&row);
        let id = row.get(0).unwrap_or("").trim();
        if id.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "empty cell_id".into(),
            });
        }
        let cell_id = CellId::from(id);
        if !seen.insert(cell_id.clone()) {
            return Err(DataError::DuplicateCellId(cell_id));
        }
        let pos = parse_geo(&row, 1, 2)?;
        sites.push(CellSite { cell_id, pos });
    }
    Ok(sites)
}

/// Writes a drive-test CSV in the schema [`load_drive_test`] reads. Floats
/// use shortest round-trip formatting, so write-then-load is lossless.
/// `header_comment`, when given, is emitted as a leading `# ...` line.
pub fn write_drive_test<W: Write>(
    mut w: W,
    dataset: &DriveTestDataset,
    header_comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(c) = header_comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{}", DRIVE_TEST_HEADER.join(","))?;
    for m in &dataset.measurements {
        let rsrp = m.rsrp_dbm.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{}",
            m.timestamp_ms, m.pos.lat_deg, m.pos.lon_deg, rsrp, m.serving_cell
        )?;
    }
    Ok(())
}

/// Writes a cell-site CSV in the schema [`load_cell_sites`] reads.
pub fn write_cell_sites<W: Write>(
    mut w: W,
    sites: &[CellSite],
    header_comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(c) = header_comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{}", CELL_SITE_HEADER.join(","))?;
    for s in sites {
        writeln!(w, "{},{},{}", s.cell_id, s.pos.lat_deg, s.pos.lon_deg)?;
    }
    Ok(())
}
