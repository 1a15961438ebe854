//! Measured RSRP records and their per-grid aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{argument, LscmError, Result};
use crate::units::{to_db, to_linear};

const HEADER: [&str; 4] = ["grid_id", "cell_id", "beam_id", "rsrp_db"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub grid_id: String,
    pub cell_id: String,
    pub beam_id: String,
    pub rsrp_db: f64,
    pub timestamp: Option<String>,
}

/// Linear-domain mean of one beam in one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamStat {
    pub mean_linear: f64,
    pub count: usize,
}

/// Averaged measurements of one `(grid, cell)` pair, keyed by beam id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasurement {
    pub grid_id: String,
    pub cell_id: String,
    pub beams: BTreeMap<String, BeamStat>,
}

impl GridMeasurement {
    /// Aligns to a codebook. Returns the row indices of the beams that were
    /// measured and their mean linear RSRP; other beams are masked out.
    /// Beam ids not in `labels` are an error.
    pub fn aligned(&self, labels: &[String]) -> Result<(Vec<usize>, Array1<f64>)> {
        if let Some(unknown) = self.beams.keys().find(|b| !labels.contains(b)) {
            return Err(argument(format!(
                "grid {} cell {}: beam `{unknown}` is not in the codebook",
                self.grid_id, self.cell_id
            )));
        }
        let rows: Vec<usize> = (0..labels.len()).filter(|&m| self.beams.contains_key(&labels[m])).collect();
        let y = rows.iter().map(|&m| self.beams[&labels[m]].mean_linear).collect();
        Ok((rows, y))
    }

    /// Per-beam mask over `labels`, true where the beam was measured.
    pub fn mask(&self, labels: &[String]) -> Vec<bool> {
        labels.iter().map(|l| self.beams.contains_key(l)).collect()
    }
}

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> LscmError {
    LscmError::Parse { path: path.to_owned(), line, msg: msg.into() }
}

/// Reads `grid_id,cell_id,beam_id,rsrp_db[,timestamp]` rows.
pub fn read_measurements(path: &Path) -> Result<Vec<MeasurementRecord>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(parse_error(path, 1, "empty file"));
    }
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_ts = match names.as_slice() {
        [a, b, c, d] if [*a, *b, *c, *d] == HEADER => false,
        [a, b, c, d, "timestamp"] if [*a, *b, *c, *d] == HEADER => true,
        _ => {
            return Err(parse_error(
                path,
                1,
                format!("expected header `grid_id,cell_id,beam_id,rsrp_db[,timestamp]`, found `{}`", names.join(",")),
            ))
        }
    };
    let width = if has_ts { 5 } else { 4 };

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != width {
            return Err(parse_error(path, line, format!("expected {width} fields, found {}", row.len())));
        }
        let id = |k: usize, name: &str| -> Result<String> {
            let v = row[k].trim();
            if v.is_empty() {
                Err(parse_error(path, line, format!("empty {name}")))
            } else {
                Ok(v.to_string())
            }
        };
        let rsrp_db: f64 = row[3]
            .trim()
            .parse()
            .map_err(|e| parse_error(path, line, format!("rsrp_db `{}`: {e}", &row[3])))?;
        if !rsrp_db.is_finite() {
            return Err(parse_error(path, line, "rsrp_db must be finite"));
        }
        records.push(MeasurementRecord {
            grid_id: id(0, "grid_id")?,
            cell_id: id(1, "cell_id")?,
            beam_id: id(2, "beam_id")?,
            rsrp_db,
            timestamp: if has_ts { Some(row[4].trim().to_string()).filter(|s| !s.is_empty()) } else { None },
        });
    }
    if records.is_empty() {
        return Err(parse_error(path, 1, "no measurement rows"));
    }
    Ok(records)
}

/// Groups records by `(grid, cell, beam)` and averages in linear units.
///
/// Samples are summed in sorted order, so the result does not depend on the
/// row order of the input. Output is sorted by `(grid_id, cell_id)`.
pub fn aggregate(records: &[MeasurementRecord]) -> Vec<GridMeasurement> {
    let mut groups: BTreeMap<(&str, &str), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in records {
        groups
            .entry((&r.grid_id, &r.cell_id))
            .or_default()
            .entry(&r.beam_id)
            .or_default()
            .push(to_linear(r.rsrp_db));
    }
    groups
        .into_iter()
        .map(|((grid, cell), beams)| GridMeasurement {
            grid_id: grid.to_string(),
            cell_id: cell.to_string(),
            beams: beams
                .into_iter()
                .map(|(b, mut v)| {
                    v.sort_by(f64::total_cmp);
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    (b.to_string(), BeamStat { mean_linear: mean, count: v.len() })
                })
                .collect(),
        })
        .collect()
}

pub fn ingest_measurements(path: &Path) -> Result<Vec<GridMeasurement>> {
    Ok(aggregate(&read_measurements(path)?))
}

/// Writes records in the ingestion format, with or without timestamps.
pub fn write_measurements(path: &Path, records: &[MeasurementRecord]) -> Result<()> {
    let with_ts = records.iter().any(|r| r.timestamp.is_some());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = HEADER.to_vec();
    if with_ts {
        header.push("timestamp");
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.grid_id.clone(), r.cell_id.clone(), r.beam_id.clone(), r.rsrp_db.to_string()];
        if with_ts {
            row.push(r.timestamp.clone().unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean in dB of a linear mean, for reporting.
pub fn mean_db(stat: &BeamStat) -> f64 {
    to_db(stat.mean_linear)
}
