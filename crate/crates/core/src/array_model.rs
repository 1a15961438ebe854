//! Transmit array, angular grid, element gain and beam codebook.
//!
//! Angles are kept in degrees and converted once, at the trigonometric call
//! site. Tilt θ is measured from the horizon and azimuth φ from broadside;
//! the x axis of the array is horizontal and the y axis vertical.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{argument, check_index, LscmError, Result};

/// Uniform rectangular array geometry plus hardware phase noise and power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_x: usize,
    pub n_y: usize,
    /// Element spacing along x, meters.
    pub d_x: f64,
    /// Element spacing along y, meters.
    pub d_y: f64,
    pub wavelength: f64,
    /// Standard deviation of the per-antenna phase error, radians.
    pub sigma: f64,
    /// Transmit power, linear.
    pub power: f64,
}

impl ArrayConfig {
    pub fn new(
        n_x: usize,
        n_y: usize,
        d_x: f64,
        d_y: f64,
        wavelength: f64,
        sigma: f64,
        power: f64,
    ) -> Result<Self> {
        let cfg = Self { n_x, n_y, d_x, d_y, wavelength, sigma, power };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Half-wavelength spaced array with unit wavelength and power.
    pub fn half_wavelength(n_x: usize, n_y: usize, sigma: f64) -> Result<Self> {
        Self::new(n_x, n_y, 0.5, 0.5, 1.0, sigma, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_y == 0 {
            return Err(argument("array must have at least one element per axis"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.wavelength) || !positive(self.d_x) || !positive(self.d_y) {
            return Err(argument("wavelength and element spacings must be positive"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(argument("phase-error std must be non-negative"));
        }
        if !positive(self.power) {
            return Err(argument("transmit power must be positive"));
        }
        Ok(())
    }

    pub fn n_elements(&self) -> usize {
        self.n_x * self.n_y
    }
}

/// Discretized departure angles. Cell `(i, j)` flattens to `i * n_azimuth + j`,
/// so azimuth varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    tilt_deg: Vec<f64>,
    azimuth_deg: Vec<f64>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|a| a.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

impl AngularGrid {
    pub fn new(tilt_deg: Vec<f64>, azimuth_deg: Vec<f64>) -> Result<Self> {
        if tilt_deg.is_empty() || azimuth_deg.is_empty() {
            return Err(argument("angular grid axes must be non-empty"));
        }
        if !strictly_increasing(&tilt_deg) || !strictly_increasing(&azimuth_deg) {
            return Err(argument("angular grid axes must be strictly increasing"));
        }
        Ok(Self { tilt_deg, azimuth_deg })
    }

    /// Evenly spaced axes, both ends inclusive.
    pub fn uniform(
        tilt: (f64, f64),
        tilt_step: f64,
        azimuth: (f64, f64),
        azimuth_step: f64,
    ) -> Result<Self> {
        Self::new(linspace_step(tilt, tilt_step)?, linspace_step(azimuth, azimuth_step)?)
    }

    pub fn tilt_deg(&self) -> &[f64] {
        &self.tilt_deg
    }

    pub fn azimuth_deg(&self) -> &[f64] {
        &self.azimuth_deg
    }

    pub fn n_tilt(&self) -> usize {
        self.tilt_deg.len()
    }

    pub fn n_azimuth(&self) -> usize {
        self.azimuth_deg.len()
    }

    /// Total number of cells `N`.
    pub fn len(&self) -> usize {
        self.n_tilt() * self.n_azimuth()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat_index(&self, i: usize, j: usize) -> Result<usize> {
        check_index("tilt", i, self.n_tilt())?;
        check_index("azimuth", j, self.n_azimuth())?;
        Ok(i * self.n_azimuth() + j)
    }

    pub fn cell(&self, n: usize) -> Result<(usize, usize)> {
        check_index("grid cell", n, self.len())?;
        Ok((n / self.n_azimuth(), n % self.n_azimuth()))
    }

    /// `(tilt°, azimuth°)` of flattened cell `n`.
    pub fn angles(&self, n: usize) -> Result<(f64, f64)> {
        let (i, j) = self.cell(n)?;
        Ok((self.tilt_deg[i], self.azimuth_deg[j]))
    }

    /// Column label used in matrix exports, e.g. `t-2_a25`.
    pub fn label(&self, n: usize) -> Result<String> {
        let (t, a) = self.angles(n)?;
        Ok(format!("t{t}_a{a}"))
    }

    /// Flattened index of the cell closest to the given direction.
    pub fn nearest(&self, tilt_deg: f64, azimuth_deg: f64) -> usize {
        let closest = |axis: &[f64], v: f64| {
            let mut best = 0;
            for (k, a) in axis.iter().enumerate() {
                if (a - v).abs() < (axis[best] - v).abs() {
                    best = k;
                }
            }
            best
        };
        let i = closest(&self.tilt_deg, tilt_deg);
        let j = closest(&self.azimuth_deg, azimuth_deg);
        i * self.n_azimuth() + j
    }

    /// Same flattening with every angle shifted by the given offsets.
    pub fn shifted(&self, tilt_offset: f64, azimuth_offset: f64) -> Self {
        Self {
            tilt_deg: self.tilt_deg.iter().map(|t| t + tilt_offset).collect(),
            azimuth_deg: self.azimuth_deg.iter().map(|a| a + azimuth_offset).collect(),
        }
    }
}

fn linspace_step((lo, hi): (f64, f64), step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(argument(format!("bad axis range [{lo}, {hi}] step {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    // Multiply instead of accumulating so the values stay exact for integer steps.
    Ok((0..count).map(|k| lo + step * k as f64).collect())
}

/// Phase-only precoders, one `n_x × n_y` phase matrix per beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamCodebook {
    phases: Vec<Array2<f64>>,
    labels: Vec<String>,
}

impl BeamCodebook {
    pub fn new(phases: Vec<Array2<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        if phases.is_empty() {
            return Err(argument("codebook must contain at least one beam"));
        }
        let dim = phases[0].dim();
        if phases.iter().any(|p| p.dim() != dim) {
            return Err(LscmError::Dimension("beam phase matrices differ in shape".into()));
        }
        if phases.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(argument("beam phases must be finite"));
        }
        let labels = match labels {
            Some(l) if l.len() != phases.len() => {
                return Err(LscmError::Dimension(format!(
                    "{} labels for {} beams",
                    l.len(),
                    phases.len()
                )))
            }
            Some(l) => l,
            None => (0..phases.len()).map(|m| format!("beam-{m}")).collect(),
        };
        Ok(Self { phases, labels })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn phases(&self, m: usize) -> Result<&Array2<f64>> {
        check_index("beam", m, self.len())?;
        Ok(&self.phases[m])
    }

    /// Precoder entry `w = e^{jφ}`.
    pub fn weight(&self, m: usize, x: usize, y: usize) -> Result<Complex64> {
        let p = self.phases(m)?;
        check_index("antenna x", x, p.nrows())?;
        check_index("antenna y", y, p.ncols())?;
        Ok(Complex64::from_polar(1.0, p[[x, y]]))
    }

    pub fn check_array(&self, cfg: &ArrayConfig) -> Result<()> {
        let dim = self.phases[0].dim();
        if dim != (cfg.n_x, cfg.n_y) {
            return Err(LscmError::Dimension(format!(
                "codebook beams are {}x{}, array is {}x{}",
                dim.0, dim.1, cfg.n_x, cfg.n_y
            )));
        }
        Ok(())
    }

    /// Keeps the given beams, in the given order.
    pub fn subset(&self, beams: &[usize]) -> Result<Self> {
        for &m in beams {
            check_index("beam", m, self.len())?;
        }
        Self::new(
            beams.iter().map(|&m| self.phases[m].clone()).collect(),
            Some(beams.iter().map(|&m| self.labels[m].clone()).collect()),
        )
    }

    /// Reads a `beam,x,y,phase_rad` table. Beams are ordered by first appearance.
    pub fn read_csv(path: &Path, cfg: &ArrayConfig) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        expect_header(path, reader.headers()?, &["beam", "x", "y", "phase_rad"])?;
        let mut order: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut phases: Vec<Array2<f64>> = Vec::new();
        let mut seen: Vec<Array2<bool>> = Vec::new();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |msg: String| LscmError::Parse { path: path.to_owned(), line, msg };
            let beam = row[0].to_string();
            let x: usize = row[1].trim().parse().map_err(|e| bad(format!("x: {e}")))?;
            let y: usize = row[2].trim().parse().map_err(|e| bad(format!("y: {e}")))?;
            let phase: f64 = row[3].trim().parse().map_err(|e| bad(format!("phase_rad: {e}")))?;
            if x >= cfg.n_x || y >= cfg.n_y {
                return Err(bad(format!("antenna ({x},{y}) outside {}x{} array", cfg.n_x, cfg.n_y)));
            }
            let m = *index.entry(beam.clone()).or_insert_with(|| {
                order.push(beam.clone());
                phases.push(Array2::zeros((cfg.n_x, cfg.n_y)));
                seen.push(Array2::from_elem((cfg.n_x, cfg.n_y), false));
                order.len() - 1
            });
            phases[m][[x, y]] = phase;
            seen[m][[x, y]] = true;
        }
        for (m, s) in seen.iter().enumerate() {
            if s.iter().any(|v| !v) {
                return Err(argument(format!("{}: beam {} does not cover every antenna", path.display(), order[m])));
            }
        }
        Self::new(phases, Some(order))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["beam", "x", "y", "phase_rad"])?;
        for (label, p) in self.labels.iter().zip(&self.phases) {
            for ((x, y), v) in p.indexed_iter() {
                w.write_record([label.clone(), x.to_string(), y.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Amplitude gain `g_{i,j}` of the array element toward each grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPattern {
    gains: Array2<f64>,
}

impl GainPattern {
    pub fn new(gains: Array2<f64>) -> Result<Self> {
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(argument("element gains must be finite and non-negative"));
        }
        Ok(Self { gains })
    }

    pub fn uniform(grid: &AngularGrid, gain: f64) -> Result<Self> {
        Self::new(Array2::from_elem((grid.n_tilt(), grid.n_azimuth()), gain))
    }

    pub fn gains(&self) -> &Array2<f64> {
        &self.gains
    }

    pub fn check_grid(&self, grid: &AngularGrid) -> Result<()> {
        if self.gains.dim() != (grid.n_tilt(), grid.n_azimuth()) {
            return Err(LscmError::Dimension(format!(
                "gain pattern is {:?}, grid is {}x{}",
                self.gains.dim(),
                grid.n_tilt(),
                grid.n_azimuth()
            )));
        }
        Ok(())
    }
}

/// Synthetic element pattern, parabolic in dB:
///
/// `G(θ, φ) = peak − min(12(θ/θ₃)² + 12(φ/φ₃)², floor)` dBi,
///
/// where θ₃ and φ₃ are the 3 dB beamwidths. The pattern is a power gain; the
/// amplitude gain is `10^{G/20}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicPattern {
    pub peak_gain_dbi: f64,
    pub tilt_beamwidth_deg: f64,
    pub azimuth_beamwidth_deg: f64,
    pub floor_db: f64,
}

impl Default for ParabolicPattern {
    fn default() -> Self {
        Self {
            peak_gain_dbi: 8.0,
            tilt_beamwidth_deg: 30.0,
            azimuth_beamwidth_deg: 65.0,
            floor_db: 30.0,
        }
    }
}

impl ParabolicPattern {
    pub fn gain_db(&self, tilt_deg: f64, azimuth_deg: f64) -> f64 {
        let v = 12.0 * (tilt_deg / self.tilt_beamwidth_deg).powi(2);
        let h = 12.0 * (azimuth_deg / self.azimuth_beamwidth_deg).powi(2);
        self.peak_gain_dbi - (v + h).min(self.floor_db)
    }

    pub fn amplitude(&self, tilt_deg: f64, azimuth_deg: f64) -> f64 {
        10f64.powf(self.gain_db(tilt_deg, azimuth_deg) / 20.0)
    }
}

/// Gain values keyed by exact grid angles, as loaded from a
/// `tilt_deg,azimuth_deg,gain_linear` table.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    entries: Vec<(f64, f64, f64)>,
}

const ANGLE_MATCH_TOL: f64 = 1e-9;

impl GainTable {
    pub fn new(entries: Vec<(f64, f64, f64)>) -> Result<Self> {
        if entries.iter().any(|e| !(e.2.is_finite() && e.2 >= 0.0)) {
            return Err(argument("gain table values must be finite and non-negative"));
        }
        Ok(Self { entries })
    }

    pub fn lookup(&self, tilt_deg: f64, azimuth_deg: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|(t, a, _)| (t - tilt_deg).abs() < ANGLE_MATCH_TOL && (a - azimuth_deg).abs() < ANGLE_MATCH_TOL)
            .map(|e| e.2)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        expect_header(path, reader.headers()?, &["tilt_deg", "azimuth_deg", "gain_linear"])?;
        let mut entries = Vec::new();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let mut vals = [0.0; 3];
            for (k, v) in vals.iter_mut().enumerate() {
                *v = row[k].trim().parse().map_err(|e| LscmError::Parse {
                    path: path.to_owned(),
                    line,
                    msg: format!("column {k}: {e}"),
                })?;
            }
            entries.push((vals[0], vals[1], vals[2]));
        }
        Self::new(entries)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["tilt_deg", "azimuth_deg", "gain_linear"])?;
        for (t, a, g) in &self.entries {
            w.write_record([t.to_string(), a.to_string(), g.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Source of element gains: the synthetic default or a measured table.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementPattern {
    Parabolic(ParabolicPattern),
    Table(GainTable),
    Isotropic(f64),
}

impl ElementPattern {
    /// Samples the pattern on every cell of `grid`. Table patterns must
    /// cover the grid; the angles that are missing are listed in the error.
    pub fn sample(&self, grid: &AngularGrid) -> Result<GainPattern> {
        let mut gains = Array2::zeros((grid.n_tilt(), grid.n_azimuth()));
        let mut missing = Vec::new();
        for (i, &t) in grid.tilt_deg().iter().enumerate() {
            for (j, &a) in grid.azimuth_deg().iter().enumerate() {
                gains[[i, j]] = match self {
                    Self::Parabolic(p) => p.amplitude(t, a),
                    Self::Isotropic(g) => *g,
                    Self::Table(table) => match table.lookup(t, a) {
                        Some(g) => g,
                        None => {
                            missing.push(format!("({t}, {a})"));
                            0.0
                        }
                    },
                };
            }
        }
        if !missing.is_empty() {
            return Err(argument(format!(
                "gain table does not cover {} grid cells: {}",
                missing.len(),
                missing.join(" ")
            )));
        }
        GainPattern::new(gains)
    }
}

/// Geometric part of the steering phase for antenna `(x, y)` toward a direction.
pub fn geometric_phase(cfg: &ArrayConfig, tilt_deg: f64, azimuth_deg: f64, x: usize, y: usize) -> f64 {
    let (theta, phi) = (tilt_deg.to_radians(), azimuth_deg.to_radians());
    2.0 * PI * (cfg.d_x * x as f64 / cfg.wavelength) * theta.cos() * phi.sin()
        + 2.0 * PI * (cfg.d_y * y as f64 / cfg.wavelength) * theta.sin()
}

/// `ψ^{(m)}_{i,j,x,y}`: geometric phase of antenna `(x, y)` toward cell
/// `(i, j)` minus the precoder phase of beam `m`. Antenna indices are zero-based.
#[allow(clippy::too_many_arguments)]
pub fn steering_phase(
    cfg: &ArrayConfig,
    grid: &AngularGrid,
    codebook: &BeamCodebook,
    m: usize,
    i: usize,
    j: usize,
    x: usize,
    y: usize,
) -> Result<f64> {
    let n = grid.flat_index(i, j)?;
    let (tilt, az) = grid.angles(n)?;
    let phases = codebook.phases(m)?;
    check_index("antenna x", x, cfg.n_x)?;
    check_index("antenna y", y, cfg.n_y)?;
    check_index("antenna x", x, phases.nrows())?;
    check_index("antenna y", y, phases.ncols())?;
    Ok(geometric_phase(cfg, tilt, az, x, y) - phases[[x, y]])
}

pub fn element_gain(pattern: &GainPattern, i: usize, j: usize) -> Result<f64> {
    let g = pattern.gains();
    check_index("tilt", i, g.nrows())?;
    check_index("azimuth", j, g.ncols())?;
    Ok(g[[i, j]])
}

/// Conjugate-match beams steered toward each `(tilt°, azimuth°)` direction.
pub fn make_dft_codebook(cfg: &ArrayConfig, steer_directions: &[(f64, f64)]) -> Result<BeamCodebook> {
    if steer_directions.is_empty() {
        return Err(argument("at least one steering direction is required"));
    }
    for &(t, a) in steer_directions {
        if !(t.abs() <= 90.0 && a.abs() <= 180.0) {
            return Err(argument(format!("steering direction ({t}, {a}) outside field of view")));
        }
    }
    let phases = steer_directions
        .iter()
        .map(|&(t, a)| Array2::from_shape_fn((cfg.n_x, cfg.n_y), |(x, y)| geometric_phase(cfg, t, a, x, y)))
        .collect();
    BeamCodebook::new(phases, None)
}

pub(crate) fn expect_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let ok = got.len() >= want.len() && want.iter().zip(got.iter()).all(|(w, g)| *w == g.trim());
    if ok {
        Ok(())
    } else {
        Err(LscmError::Parse {
            path: path.to_owned(),
            line: 1,
            msg: format!("expected header `{}`, found `{}`", want.join(","), got.iter().collect::<Vec<_>>().join(",")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn boresight_setup(n_x: usize, n_y: usize) -> (ArrayConfig, AngularGrid, BeamCodebook) {
        let cfg = ArrayConfig::half_wavelength(n_x, n_y, 0.0).unwrap();
        let grid = AngularGrid::new(vec![-10.0, 0.0, 10.0], vec![-30.0, 0.0, 30.0]).unwrap();
        let cb = BeamCodebook::new(vec![Array2::zeros((n_x, n_y))], None).unwrap();
        (cfg, grid, cb)
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(ArrayConfig::new(0, 1, 0.5, 0.5, 1.0, 0.0, 1.0).is_err());
        assert!(ArrayConfig::new(1, 1, 0.5, 0.5, 0.0, 0.0, 1.0).is_err());
        assert!(ArrayConfig::new(1, 1, 0.5, -0.5, 1.0, 0.0, 1.0).is_err());
        assert!(ArrayConfig::new(1, 1, 0.5, 0.5, 1.0, -0.1, 1.0).is_err());
        assert!(ArrayConfig::new(1, 1, 0.5, 0.5, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn grid_flattening_is_azimuth_fastest() {
        let grid = AngularGrid::new(vec![0.0, 2.0], vec![-5.0, 0.0, 5.0]).unwrap();
        assert_eq!(grid.len(), 6);
        assert_eq!(grid.flat_index(1, 0).unwrap(), 3);
        assert_eq!(grid.angles(4).unwrap(), (2.0, 0.0));
        assert_eq!(grid.label(0).unwrap(), "t0_a-5");
        assert!(grid.flat_index(2, 0).is_err());
        assert!(AngularGrid::new(vec![1.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn uniform_grid_default_spacing() {
        let grid = AngularGrid::uniform((-30.0, 30.0), 2.0, (-60.0, 60.0), 5.0).unwrap();
        assert_eq!(grid.n_tilt(), 31);
        assert_eq!(grid.n_azimuth(), 25);
        assert_eq!(grid.tilt_deg()[1], -28.0);
        assert_eq!(*grid.azimuth_deg().last().unwrap(), 60.0);
    }

    #[test]
    fn steering_phase_examples() {
        let (cfg, grid, cb) = boresight_setup(2, 2);
        for x in 0..2 {
            for y in 0..2 {
                assert_eq!(steering_phase(&cfg, &grid, &cb, 0, 1, 1, x, y).unwrap(), 0.0);
            }
        }

        let cb = BeamCodebook::new(vec![Array2::from_elem((2, 2), 0.7)], None).unwrap();
        assert_eq!(steering_phase(&cfg, &grid, &cb, 0, 2, 0, 0, 0).unwrap(), -0.7);

        let grid = AngularGrid::new(vec![0.0], vec![30.0]).unwrap();
        let cfg = ArrayConfig::new(2, 1, 0.5, 0.5, 1.0, 0.0, 1.0).unwrap();
        let cb = BeamCodebook::new(vec![Array2::zeros((2, 1))], None).unwrap();
        let psi = steering_phase(&cfg, &grid, &cb, 0, 0, 0, 1, 0).unwrap();
        assert!((psi - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn steering_phase_index_errors() {
        let (cfg, grid, cb) = boresight_setup(2, 2);
        assert!(matches!(
            steering_phase(&cfg, &grid, &cb, 1, 0, 0, 0, 0),
            Err(LscmError::Index { what: "beam", .. })
        ));
        assert!(steering_phase(&cfg, &grid, &cb, 0, 3, 0, 0, 0).is_err());
        assert!(steering_phase(&cfg, &grid, &cb, 0, 0, 0, 2, 0).is_err());
        assert!(steering_phase(&cfg, &grid, &cb, 0, 0, 0, 0, 2).is_err());
    }

    #[test]
    fn degrees_converted_once() {
        assert!((30f64.to_radians().sin() - 0.5).abs() < 1e-12);
        // sin φ at 30° enters ψ exactly once: d_x = λ gives 2π·0.5 = π.
        let cfg = ArrayConfig::new(2, 1, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert!((geometric_phase(&cfg, 0.0, 30.0, 1, 0) - PI).abs() < 1e-12);
    }

    #[test]
    fn element_gain_lookup() {
        let grid = AngularGrid::uniform((0.0, 10.0), 2.0, (0.0, 40.0), 5.0).unwrap();
        let uniform = GainPattern::uniform(&grid, 1.0).unwrap();
        assert_eq!(element_gain(&uniform, 2, 4).unwrap(), 1.0);
        assert!(element_gain(&uniform, 6, 0).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gain.csv");
        let mut entries = Vec::new();
        for &t in grid.tilt_deg() {
            for &a in grid.azimuth_deg() {
                entries.push((t, a, if t == 6.0 && a == 35.0 { 2.5 } else { 1.0 }));
            }
        }
        GainTable::new(entries).unwrap().write_csv(&path).unwrap();
        let table = GainTable::read_csv(&path).unwrap();
        let pattern = ElementPattern::Table(table).sample(&grid).unwrap();
        assert_eq!(element_gain(&pattern, 3, 7).unwrap(), 2.5);
    }

    #[test]
    fn gain_table_must_cover_grid() {
        let grid = AngularGrid::new(vec![0.0, 2.0], vec![0.0]).unwrap();
        let table = GainTable::new(vec![(0.0, 0.0, 1.0)]).unwrap();
        let err = ElementPattern::Table(table).sample(&grid).unwrap_err();
        assert!(err.to_string().contains("(2, 0)"), "{err}");
    }

    #[test]
    fn gain_table_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gain.csv");
        std::fs::write(&path, "tilt,az,g\n0,0,1\n").unwrap();
        assert!(matches!(GainTable::read_csv(&path), Err(LscmError::Parse { line: 1, .. })));
    }

    #[test]
    fn parabolic_pattern_peaks_at_boresight() {
        let p = ParabolicPattern::default();
        let peak = 10f64.powf(p.peak_gain_dbi / 20.0);
        assert!((p.amplitude(0.0, 0.0) - peak).abs() < 1e-12);
        let grid = AngularGrid::uniform((-20.0, 20.0), 2.0, (-60.0, 60.0), 5.0).unwrap();
        let sampled = ElementPattern::Parabolic(p.clone()).sample(&grid).unwrap();
        let max = sampled.gains().iter().cloned().fold(0.0, f64::max);
        assert_eq!(max, sampled.gains()[[10, 12]]);
        assert!((max - peak).abs() < 1e-12);
        // 3 dB down at one beamwidth off boresight; floor caps the loss.
        assert!((p.gain_db(p.tilt_beamwidth_deg / 2.0, 0.0) - (p.peak_gain_dbi - 3.0)).abs() < 1e-12);
        assert_eq!(p.gain_db(90.0, 180.0), p.peak_gain_dbi - p.floor_db);
    }

    #[test]
    fn dft_codebook_examples() {
        let cfg = ArrayConfig::half_wavelength(4, 2, 0.0).unwrap();
        let cb = make_dft_codebook(&cfg, &[(0.0, 0.0)]).unwrap();
        assert!(cb.phases(0).unwrap().iter().all(|&p| p == 0.0));

        let dirs = [(0.0, -15.0), (0.0, 0.0), (0.0, 15.0), (0.0, 30.0), (0.0, 45.0)];
        let cb = make_dft_codebook(&cfg, &dirs).unwrap();
        assert_eq!(cb.len(), 5);
        cb.check_array(&cfg).unwrap();

        let cfg = ArrayConfig::half_wavelength(2, 1, 0.0).unwrap();
        let cb = make_dft_codebook(&cfg, &[(0.0, 30.0)]).unwrap();
        assert!((cb.phases(0).unwrap()[[1, 0]] - PI / 2.0).abs() < 1e-12);

        assert!(make_dft_codebook(&cfg, &[]).is_err());
    }

    #[test]
    fn precoder_weights_are_unit_modulus() {
        let cfg = ArrayConfig::half_wavelength(3, 2, 0.0).unwrap();
        let cb = make_dft_codebook(&cfg, &[(4.0, 17.0), (-8.0, -40.0)]).unwrap();
        for m in 0..2 {
            for x in 0..3 {
                for y in 0..2 {
                    assert!((cb.weight(m, x, y).unwrap().norm() - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn dft_beam_peaks_at_steer_direction() {
        let cfg = ArrayConfig::half_wavelength(8, 4, 0.0).unwrap();
        let grid = AngularGrid::uniform((-30.0, 30.0), 2.0, (-60.0, 60.0), 5.0).unwrap();
        let dirs = [(0.0, 30.0), (-6.0, -15.0), (3.1, 22.0), (10.0, 45.0), (-2.84, 23.82)];
        let cb = make_dft_codebook(&cfg, &dirs).unwrap();
        for (m, &(t, a)) in dirs.iter().enumerate() {
            let mut best = (0, f64::MIN);
            for n in 0..grid.len() {
                let (i, j) = grid.cell(n).unwrap();
                let mut sum = Complex64::new(0.0, 0.0);
                for x in 0..cfg.n_x {
                    for y in 0..cfg.n_y {
                        sum += Complex64::from_polar(1.0, steering_phase(&cfg, &grid, &cb, m, i, j, x, y).unwrap());
                    }
                }
                if sum.norm() > best.1 {
                    best = (n, sum.norm());
                }
            }
            let (bt, ba) = grid.angles(best.0).unwrap();
            if grid.angles(grid.nearest(t, a)).unwrap() == (t, a) {
                assert_eq!((bt, ba), (t, a), "beam {m}");
            } else {
                // Off-grid steering: the peak lands on a cell adjacent to the direction.
                assert!((bt - t).abs() < 2.0 && (ba - a).abs() < 5.0, "beam {m}: ({bt}, {ba})");
            }
        }
    }

    #[test]
    fn codebook_csv_round_trip() {
        let cfg = ArrayConfig::half_wavelength(3, 2, 0.0).unwrap();
        let cb = make_dft_codebook(&cfg, &[(4.0, 17.0), (-8.0, -40.0)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.csv");
        cb.write_csv(&path).unwrap();
        assert_eq!(BeamCodebook::read_csv(&path, &cfg).unwrap(), cb);
    }

    #[test]
    fn codebook_csv_must_cover_array() {
        let cfg = ArrayConfig::half_wavelength(2, 1, 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.csv");
        std::fs::write(&path, "beam,x,y,phase_rad\nSSB-0,0,0,0.0\n").unwrap();
        assert!(BeamCodebook::read_csv(&path, &cfg).is_err());
        std::fs::write(&path, "beam,x,y,phase_rad\nSSB-0,0,0,0.0\nSSB-0,5,0,0.0\n").unwrap();
        assert!(matches!(BeamCodebook::read_csv(&path, &cfg), Err(LscmError::Parse { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn steering_phase_linear_in_antenna_index(
            tilt in -40.0f64..40.0, az in -70.0f64..70.0, x in 0usize..7, y in 0usize..3,
        ) {
            let cfg = ArrayConfig::half_wavelength(8, 4, 0.0).unwrap();
            let p = |x, y| geometric_phase(&cfg, tilt, az, x, y);
            let dx = p(1, 0) - p(0, 0);
            let dy = p(0, 1) - p(0, 0);
            prop_assert!((p(x + 1, y) - p(x, y) - dx).abs() < 1e-9);
            prop_assert!((p(x, y + 1) - p(x, y) - dy).abs() < 1e-9);
            prop_assert!((p(x, y) - (x as f64 * dx + y as f64 * dy)).abs() < 1e-9);
        }
    }
}
