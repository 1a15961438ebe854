//! The coefficient matrix `A` linking expected per-beam RSRP to the expected
//! channel gain in every angular cell: `y = A x`.
//!
//! Entry `(m, n)` for cell `n = (i, j)` is
//!
//! ```text
//! P g²_{i,j} ( NxNy (1 − e^{−σ²}) + e^{−σ²} Σ_{x,y} Σ_{x',y'} cos(ψ_{x,y} − ψ_{x',y'}) )
//! ```
//!
//! and the double sum is evaluated as `|Σ e^{jψ}|²` in `O(NxNy)`.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{geometric_phase, AngularGrid, ArrayConfig, BeamCodebook, GainPattern};
use crate::error::{argument, check_index, LscmError, Result};

/// `(Σ cos ψ)² + (Σ sin ψ)²` over the array for beam phases `phases` toward
/// `(tilt°, azimuth°)`. Summation order is fixed (x outer, y inner).
pub fn coherent_power(cfg: &ArrayConfig, tilt_deg: f64, azimuth_deg: f64, phases: &Array2<f64>) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for x in 0..cfg.n_x {
        for y in 0..cfg.n_y {
            let psi = geometric_phase(cfg, tilt_deg, azimuth_deg, x, y) - phases[[x, y]];
            re += psi.cos();
            im += psi.sin();
        }
    }
    re * re + im * im
}

fn entry(cfg: &ArrayConfig, gain: f64, coherent: f64) -> f64 {
    let decay = (-cfg.sigma * cfg.sigma).exp();
    let incoherent = cfg.n_elements() as f64 * (1.0 - decay);
    cfg.power * gain * gain * (incoherent + decay * coherent)
}

/// Coefficient `A^{(m)}_{i,j}`.
pub fn compute_coefficient(
    cfg: &ArrayConfig,
    grid: &AngularGrid,
    pattern: &GainPattern,
    codebook: &BeamCodebook,
    m: usize,
    i: usize,
    j: usize,
) -> Result<f64> {
    let n = grid.flat_index(i, j)?;
    let (tilt, az) = grid.angles(n)?;
    let phases = codebook.phases(m)?;
    let gain = crate::array_model::element_gain(pattern, i, j)?;
    Ok(entry(cfg, gain, coherent_power(cfg, tilt, az, phases)))
}

/// `M × N` coefficient matrix together with its column norms and the
/// column-normalized copy.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    a: Array2<f64>,
    col_norms: Array1<f64>,
    a_hat: Array2<f64>,
    zero_columns: Vec<usize>,
    grid: AngularGrid,
    /// Flattened grid index of each column.
    columns: Vec<usize>,
    beam_labels: Vec<String>,
}

impl CoefficientMatrix {
    /// Wraps a dense matrix whose column `k` belongs to grid cell `columns[k]`.
    pub fn from_dense(
        a: Array2<f64>,
        grid: AngularGrid,
        columns: Vec<usize>,
        beam_labels: Vec<String>,
    ) -> Result<Self> {
        if a.ncols() != columns.len() {
            return Err(LscmError::Dimension(format!("{} columns, {} column indices", a.ncols(), columns.len())));
        }
        if a.nrows() != beam_labels.len() {
            return Err(LscmError::Dimension(format!("{} rows, {} beam labels", a.nrows(), beam_labels.len())));
        }
        for &c in &columns {
            check_index("grid cell", c, grid.len())?;
        }
        if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(argument("coefficients must be finite and non-negative"));
        }
        let col_norms: Array1<f64> = a.axis_iter(Axis(1)).map(|c| c.dot(&c).sqrt()).collect();
        let mut a_hat = a.clone();
        let mut zero_columns = Vec::new();
        for (k, mut col) in a_hat.axis_iter_mut(Axis(1)).enumerate() {
            if col_norms[k] > 0.0 {
                col /= col_norms[k];
            } else {
                zero_columns.push(k);
            }
        }
        Ok(Self { a, col_norms, a_hat, zero_columns, grid, columns, beam_labels })
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn a_hat(&self) -> &Array2<f64> {
        &self.a_hat
    }

    pub fn col_norms(&self) -> &Array1<f64> {
        &self.col_norms
    }

    /// Columns with zero norm. They are left unnormalized and are never
    /// selected by the solvers.
    pub fn zero_columns(&self) -> &[usize] {
        &self.zero_columns
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn beam_labels(&self) -> &[String] {
        &self.beam_labels
    }

    pub fn n_beams(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.a.ncols()
    }

    pub fn column_label(&self, k: usize) -> Result<String> {
        check_index("column", k, self.n_columns())?;
        self.grid.label(self.columns[k])
    }

    /// `A x` for a vector indexed by this matrix's columns.
    pub fn apply(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.n_columns() {
            return Err(LscmError::Dimension(format!("x has {} entries, A has {} columns", x.len(), self.n_columns())));
        }
        Ok(self.a.dot(&x))
    }

    /// Restriction to the given rows (beams), with norms recomputed.
    pub fn select_beams(&self, beams: &[usize]) -> Result<Self> {
        for &m in beams {
            check_index("beam", m, self.n_beams())?;
        }
        Self::from_dense(
            self.a.select(Axis(0), beams),
            self.grid.clone(),
            self.columns.clone(),
            beams.iter().map(|&m| self.beam_labels[m].clone()).collect(),
        )
    }

    /// Restriction to the given columns (local indices), in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        for &k in cols {
            check_index("column", k, self.n_columns())?;
        }
        Self::from_dense(
            self.a.select(Axis(1), cols),
            self.grid.clone(),
            cols.iter().map(|&k| self.columns[k]).collect(),
            self.beam_labels.clone(),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let header = (0..self.n_columns()).map(|k| self.column_label(k)).collect::<Result<Vec<_>>>()?;
        w.write_record(&header)?;
        for row in self.a.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dense CSV export. The grid is rebuilt from the distinct
    /// angles found in the header; beam labels default to `beam-<m>`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.clone();
        let mut angles = Vec::with_capacity(header.len());
        for label in header.iter() {
            angles.push(parse_label(label).ok_or_else(|| LscmError::Parse {
                path: path.to_owned(),
                line: 1,
                msg: format!("bad column label `{label}`"),
            })?);
        }
        let mut values = Vec::new();
        let mut rows = 0;
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            for v in rec.iter() {
                values.push(v.trim().parse::<f64>().map_err(|e| LscmError::Parse {
                    path: path.to_owned(),
                    line,
                    msg: e.to_string(),
                })?);
            }
            rows += 1;
        }
        let a = Array2::from_shape_vec((rows, angles.len()), values)
            .map_err(|e| LscmError::Dimension(e.to_string()))?;
        let (grid, columns) = grid_from_angles(&angles)?;
        Self::from_dense(a, grid, columns, (0..rows).map(|m| format!("beam-{m}")).collect())
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson {
            beams: self.beam_labels.clone(),
            tilt_deg: self.grid.tilt_deg().to_vec(),
            azimuth_deg: self.grid.azimuth_deg().to_vec(),
            columns: self.columns.clone(),
            a: self.a.rows().into_iter().map(|r| r.to_vec()).collect(),
            col_norms: self.col_norms.to_vec(),
        }
    }

    pub fn from_json(json: MatrixJson) -> Result<Self> {
        let rows = json.a.len();
        let cols = json.columns.len();
        if json.a.iter().any(|r| r.len() != cols) {
            return Err(LscmError::Dimension("ragged matrix rows".into()));
        }
        let a = Array2::from_shape_vec((rows, cols), json.a.into_iter().flatten().collect())
            .map_err(|e| LscmError::Dimension(e.to_string()))?;
        let grid = AngularGrid::new(json.tilt_deg, json.azimuth_deg)?;
        Self::from_dense(a, grid, json.columns, json.beams)
    }

    /// `index,tilt_deg,azimuth_deg,norm`, one row per column.
    pub fn write_norms_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["index", "tilt_deg", "azimuth_deg", "norm"])?;
        for (k, &n) in self.columns.iter().enumerate() {
            let (t, a) = self.grid.angles(n)?;
            w.write_record([n.to_string(), t.to_string(), a.to_string(), self.col_norms[k].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// JSON form of a coefficient matrix, meant for small cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub beams: Vec<String>,
    pub tilt_deg: Vec<f64>,
    pub azimuth_deg: Vec<f64>,
    pub columns: Vec<usize>,
    pub a: Vec<Vec<f64>>,
    pub col_norms: Vec<f64>,
}

fn parse_label(label: &str) -> Option<(f64, f64)> {
    let rest = label.trim().strip_prefix('t')?;
    let (t, a) = rest.split_once("_a")?;
    Some((t.parse().ok()?, a.parse().ok()?))
}

fn grid_from_angles(angles: &[(f64, f64)]) -> Result<(AngularGrid, Vec<usize>)> {
    let axis = |f: fn(&(f64, f64)) -> f64| {
        let mut v: Vec<f64> = angles.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let grid = AngularGrid::new(axis(|p| p.0), axis(|p| p.1))?;
    let columns = angles
        .iter()
        .map(|&(t, a)| {
            let i = grid.tilt_deg().iter().position(|&v| v == t).unwrap();
            let j = grid.azimuth_deg().iter().position(|&v| v == a).unwrap();
            grid.flat_index(i, j)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, columns))
}

/// Builds the full `M × N` matrix over every cell of `grid`.
pub fn build_matrix(
    cfg: &ArrayConfig,
    grid: &AngularGrid,
    pattern: &GainPattern,
    codebook: &BeamCodebook,
) -> Result<CoefficientMatrix> {
    cfg.validate()?;
    codebook.check_array(cfg)?;
    pattern.check_grid(grid)?;
    let n = grid.len();
    let rows: Vec<Vec<f64>> = (0..codebook.len())
        .into_par_iter()
        .map(|m| {
            let phases = codebook.phases(m).expect("beam index in range");
            (0..n)
                .map(|k| {
                    let (i, j) = (k / grid.n_azimuth(), k % grid.n_azimuth());
                    let gain = pattern.gains()[[i, j]];
                    entry(cfg, gain, coherent_power(cfg, grid.tilt_deg()[i], grid.azimuth_deg()[j], phases))
                })
                .collect()
        })
        .collect();
    let a = Array2::from_shape_vec((codebook.len(), n), rows.into_iter().flatten().collect())
        .map_err(|e| LscmError::Dimension(e.to_string()))?;
    CoefficientMatrix::from_dense(a, grid.clone(), (0..n).collect(), codebook.labels().to_vec())
}

/// Keeps the `n` columns with the largest norms, ordered by decreasing norm
/// (ties to the lower index). Returns the restricted matrix and, for each of
/// its columns, the position of that column in `cm`.
pub fn top_n_columns(cm: &CoefficientMatrix, n: usize) -> Result<(CoefficientMatrix, Vec<usize>)> {
    if n == 0 {
        return Err(argument("column count must be positive"));
    }
    if n > cm.n_columns() {
        return Err(argument(format!("requested {n} columns, matrix has {}", cm.n_columns())));
    }
    let norms = cm.col_norms();
    let mut order: Vec<usize> = (0..cm.n_columns()).collect();
    order.sort_by(|&p, &q| norms[q].total_cmp(&norms[p]).then(p.cmp(&q)));
    order.truncate(n);
    Ok((cm.select_columns(&order)?, order))
}
