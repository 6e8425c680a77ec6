//! CSV ingestion and canonical serialization of circular datasets.
//!
//! Input files carry one row per observation with named columns
//! `site_id`, `x`, `y`, optional `time`, `direction`, and optional
//! `speed`. Directions may arrive in degrees or radians; the unit must
//! be stated explicitly whenever any value exceeds the radian range,
//! and all angles land in `[0, 2π)` after ingestion. Serialization
//! emits radians with shortest-round-trip formatting so that
//! ingest → serialize → ingest reproduces every angle bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circ::Angle;
use crate::error::{Error, Result};
use crate::kernel::SiteCoord;

/// Unit of the `direction` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Degrees,
    Radians,
}

/// Ingestion switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Unit of the direction column. May be omitted only when every
    /// value already fits the radian range.
    pub angle_unit: Option<AngleUnit>,
    /// Rotate every direction by π (meteorological "blowing from" to
    /// mathematical "blowing towards", or vice versa).
    pub rotate_half_turn: bool,
    /// Accept coordinate columns that look geodetic (lon/lat). Without
    /// this flag such files are refused, since all distances here are
    /// planar Euclidean.
    pub assert_planar: bool,
}

/// An ingested dataset: one site, one angle per row.
#[derive(Debug, Clone)]
pub struct CircularDataset {
    pub ids: Vec<String>,
    pub sites: Vec<SiteCoord>,
    pub angles: Vec<Angle>,
    /// Whether the source file carried a `time` column.
    pub has_time: bool,
    /// Optional auxiliary speed column, preserved for round-trips.
    pub speed: Option<Vec<f64>>,
}

impl CircularDataset {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Angles as raw radians.
    pub fn angle_values(&self) -> Vec<f64> {
        self.angles.iter().map(|a| a.rad()).collect()
    }
}

/// Coordinates (and optional time) of prediction targets: the dataset
/// format without the direction column.
#[derive(Debug, Clone)]
pub struct TargetSet {
    pub ids: Vec<String>,
    pub sites: Vec<SiteCoord>,
    pub has_time: bool,
}

const RADIAN_SLACK: f64 = 1.001;

fn looks_geodetic(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    n == "lon" || n == "lat" || n.starts_with("longitude") || n.starts_with("latitude")
}

struct Columns {
    site_id: Option<usize>,
    x: usize,
    y: usize,
    time: Option<usize>,
    direction: Option<usize>,
    speed: Option<usize>,
}

fn resolve_columns(
    headers: &csv::StringRecord,
    need_direction: bool,
    assert_planar: bool,
) -> Result<Columns> {
    let idx = |name: &str| -> Option<usize> {
        headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
    };
    if !assert_planar {
        if let Some(bad) = headers.iter().find(|h| looks_geodetic(h.trim())) {
            return Err(Error::Data(format!(
                "column '{bad}' looks geodetic; distances here are planar Euclidean — \
                 project the coordinates first, or assert planar units to proceed"
            )));
        }
    }
    let x = idx("x");
    let y = idx("y");
    let direction = idx("direction");
    let mut missing = Vec::new();
    if x.is_none() {
        missing.push("x");
    }
    if y.is_none() {
        missing.push("y");
    }
    if need_direction && direction.is_none() {
        missing.push("direction");
    }
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "missing required column(s): {}",
            missing.join(", ")
        )));
    }
    Ok(Columns {
        site_id: idx("site_id"),
        x: x.unwrap(),
        y: y.unwrap(),
        time: idx("time"),
        direction,
        speed: idx("speed"),
    })
}

fn parse_field(record: &csv::StringRecord, col: usize, what: &str) -> std::result::Result<f64, String> {
    let raw = record.get(col).unwrap_or("").trim();
    if raw.is_empty() {
        return Err(format!("missing {what}"));
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("non-finite {what} '{raw}'")),
        Err(_) => Err(format!("malformed {what} '{raw}'")),
    }
}

/// Read a dataset file, convert and validate directions, and report
/// every bad row (with its line number) in one pass.
pub fn ingest(path: &Path, options: &IngestOptions) -> Result<CircularDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let cols = resolve_columns(reader.headers()?, true, options.assert_planar)?;
    let dir_col = cols.direction.unwrap();

    let mut ids = Vec::new();
    let mut sites = Vec::new();
    let mut raw_dirs = Vec::new();
    let mut speeds = Vec::new();
    let mut problems: Vec<String> = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2; // one-line header precedes the data rows
        let mut row_issues = Vec::new();
        let x = parse_field(&record, cols.x, "x").unwrap_or_else(|e| {
            row_issues.push(e);
            f64::NAN
        });
        let y = parse_field(&record, cols.y, "y").unwrap_or_else(|e| {
            row_issues.push(e);
            f64::NAN
        });
        let t = match cols.time {
            Some(c) => parse_field(&record, c, "time").unwrap_or_else(|e| {
                row_issues.push(e);
                f64::NAN
            }),
            None => 0.0,
        };
        let dir = parse_field(&record, dir_col, "direction").unwrap_or_else(|e| {
            row_issues.push(e);
            f64::NAN
        });
        if let Some(c) = cols.speed {
            speeds.push(parse_field(&record, c, "speed").unwrap_or_else(|e| {
                row_issues.push(e);
                f64::NAN
            }));
        }
        if row_issues.is_empty() {
            ids.push(match cols.site_id {
                Some(c) => record.get(c).unwrap_or("").trim().to_string(),
                None => format!("{}", i + 1),
            });
            sites.push(SiteCoord { x, y, t });
            raw_dirs.push(dir);
        } else {
            problems.push(format!("line {line}: {}", row_issues.join(", ")));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Data(format!(
            "{} bad row(s): {}",
            problems.len(),
            problems.join("; ")
        )));
    }
    if sites.is_empty() {
        return Err(Error::Data("dataset holds no usable rows".into()));
    }

    let tau = std::f64::consts::TAU;
    let max_abs = raw_dirs.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let unit = match options.angle_unit {
        Some(u) => u,
        None if max_abs <= tau * RADIAN_SLACK => AngleUnit::Radians,
        None => {
            return Err(Error::Data(format!(
                "directions reach {max_abs:.3}, beyond the radian range; \
                 state the angle unit explicitly"
            )));
        }
    };
    let limit = match unit {
        AngleUnit::Radians => tau * RADIAN_SLACK,
        AngleUnit::Degrees => 360.0 * RADIAN_SLACK,
    };
    let out_of_range: Vec<String> = raw_dirs
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < -limit * 1e-3 || v > limit)
        .map(|(i, &v)| format!("line {}: direction {v}", i + 2))
        .collect();
    if !out_of_range.is_empty() {
        return Err(Error::Data(format!(
            "{} direction(s) outside the {} range: {}",
            out_of_range.len(),
            match unit {
                AngleUnit::Radians => "radian [0, 2π]",
                AngleUnit::Degrees => "degree [0, 360]",
            },
            out_of_range.join("; ")
        )));
    }

    let rotation = if options.rotate_half_turn { std::f64::consts::PI } else { 0.0 };
    let angles = raw_dirs
        .iter()
        .map(|&v| {
            let rad = match unit {
                AngleUnit::Radians => v,
                AngleUnit::Degrees => v.to_radians(),
            };
            Angle::from_radians(rad + rotation)
        })
        .collect::<Result<Vec<Angle>>>()?;

    Ok(CircularDataset {
        ids,
        sites,
        angles,
        has_time: cols.time.is_some(),
        speed: if cols.speed.is_some() { Some(speeds) } else { None },
    })
}

/// Read a prediction-target file: same format as a dataset, but the
/// direction column is optional and ignored.
pub fn ingest_targets(path: &Path, assert_planar: bool) -> Result<TargetSet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let cols = resolve_columns(reader.headers()?, false, assert_planar)?;

    let mut ids = Vec::new();
    let mut sites = Vec::new();
    let mut problems = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let x = parse_field(&record, cols.x, "x");
        let y = parse_field(&record, cols.y, "y");
        let t = match cols.time {
            Some(c) => parse_field(&record, c, "time"),
            None => Ok(0.0),
        };
        match (x, y, t) {
            (Ok(x), Ok(y), Ok(t)) => {
                ids.push(match cols.site_id {
                    Some(c) => record.get(c).unwrap_or("").trim().to_string(),
                    None => format!("{}", i + 1),
                });
                sites.push(SiteCoord { x, y, t });
            }
            (x, y, t) => {
                let issues: Vec<String> =
                    [x.err(), y.err(), t.err()].into_iter().flatten().collect();
                problems.push(format!("line {line}: {}", issues.join(", ")));
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::Data(format!(
            "{} bad row(s): {}",
            problems.len(),
            problems.join("; ")
        )));
    }
    if sites.is_empty() {
        return Err(Error::Data("target file holds no usable rows".into()));
    }
    Ok(TargetSet { ids, sites, has_time: cols.time.is_some() })
}

/// Canonical serialized form: radians, shortest-round-trip floats, and
/// a fixed column order, so re-ingesting reproduces the angles exactly.
pub fn serialize(dataset: &CircularDataset) -> String {
    let mut out = String::from("site_id,x,y");
    if dataset.has_time {
        out.push_str(",time");
    }
    out.push_str(",direction");
    if dataset.speed.is_some() {
        out.push_str(",speed");
    }
    out.push('\n');
    for i in 0..dataset.len() {
        let s = &dataset.sites[i];
        let _ = write!(out, "{},{},{}", dataset.ids[i], s.x, s.y);
        if dataset.has_time {
            let _ = write!(out, ",{}", s.t);
        }
        let _ = write!(out, ",{}", dataset.angles[i].rad());
        if let Some(sp) = &dataset.speed {
            let _ = write!(out, ",{}", sp[i]);
        }
        out.push('\n');
    }
    out
}

/// Write a dataset in canonical form.
pub fn write_dataset(dataset: &CircularDataset, path: &Path) -> Result<()> {
    std::fs::write(path, serialize(dataset))?;
    Ok(())
}

/// SHA-256 of a file's raw bytes, as lowercase hex. Used to pin the
/// fitted dataset inside run manifests.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
