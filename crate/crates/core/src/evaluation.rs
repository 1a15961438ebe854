//! Support-recovery sweeps and the rotation prediction protocol.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{make_dft_codebook, AngularGrid, ArrayConfig, BeamCodebook, ElementPattern, GainPattern};
use crate::channel_sim::{generate_ground_truth_with, ValueDistribution};
use crate::coeff_matrix::{build_matrix, top_n_columns, CoefficientMatrix};
use crate::error::{argument, LscmError, Result};
use crate::rng::{stream, Domain};
use crate::solvers::{SolverConfig, SolverKind};
use crate::units::to_db;

/// `|Ŝ ∩ S| / |S|`.
pub fn support_accuracy(estimate: &[usize], truth: &[usize]) -> Result<f64> {
    let truth: BTreeSet<usize> = truth.iter().copied().collect();
    if truth.is_empty() {
        return Err(argument("true support is empty"));
    }
    let estimate: BTreeSet<usize> = estimate.iter().copied().collect();
    Ok(estimate.intersection(&truth).count() as f64 / truth.len() as f64)
}

/// Mean absolute difference of two dB vectors.
pub fn mae_db(pred_db: ArrayView1<f64>, meas_db: ArrayView1<f64>) -> Result<f64> {
    if pred_db.len() != meas_db.len() {
        return Err(argument(format!("MAE over vectors of length {} and {}", pred_db.len(), meas_db.len())));
    }
    if pred_db.is_empty() {
        return Err(argument("MAE over empty vectors"));
    }
    Ok(pred_db.iter().zip(meas_db).map(|(p, q)| (p - q).abs()).sum::<f64>() / pred_db.len() as f64)
}

/// `Â x̂` in linear units.
pub fn predict_rotated_rsrp(x_hat: ArrayView1<f64>, rotated: &CoefficientMatrix) -> Result<Array1<f64>> {
    rotated.apply(x_hat)
}

/// Array, grid, element pattern and codebook, with the matrix built from them.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub array: ArrayConfig,
    pub grid: AngularGrid,
    pub element: ElementPattern,
    pub codebook: BeamCodebook,
    pub pattern: GainPattern,
    pub matrix: CoefficientMatrix,
}

impl Scenario {
    pub fn build(array: ArrayConfig, grid: AngularGrid, element: ElementPattern, codebook: BeamCodebook) -> Result<Self> {
        let pattern = element.sample(&grid)?;
        let matrix = build_matrix(&array, &grid, &pattern, &codebook)?;
        Ok(Self { array, grid, element, codebook, pattern, matrix })
    }

    /// 4×8 half-wavelength array (4 columns, 8 rows) with σ = 0.3, tilt
    /// −30°..30° in 2° steps, azimuth −60°..60° in 5° steps (775 cells), an
    /// isotropic element and 32 DFT beams on a 4 × 8 tilt/azimuth lattice.
    /// Column norms then vary only through beam coverage (about 25× here).
    pub fn synthetic_default() -> Result<Self> {
        let array = ArrayConfig::half_wavelength(4, 8, 0.3)?;
        let grid = AngularGrid::uniform((-30.0, 30.0), 2.0, (-60.0, 60.0), 5.0)?;
        let codebook = make_dft_codebook(&array, &default_beam_directions())?;
        Self::build(array, grid, ElementPattern::Isotropic(1.0), codebook)
    }

    /// Matrix seen by the array after a rotation by the given offsets.
    pub fn rotated(&self, azimuth_offset: f64, tilt_offset: f64) -> Result<CoefficientMatrix> {
        let (grid, pattern) = rotate_scenario(&self.grid, &self.element, azimuth_offset, tilt_offset)?;
        let shifted = build_matrix(&self.array, &grid, &pattern, &self.codebook)?;
        // Columns stay labeled by the path direction, not the rotated one.
        CoefficientMatrix::from_dense(
            shifted.a().clone(),
            self.grid.clone(),
            (0..self.grid.len()).collect(),
            self.codebook.labels().to_vec(),
        )
    }
}

/// Steering directions of the default 32-beam codebook.
pub fn default_beam_directions() -> Vec<(f64, f64)> {
    let mut dirs = Vec::with_capacity(32);
    for &t in &[-15.0, -5.0, 5.0, 15.0] {
        for k in 0..8 {
            dirs.push((t, -52.5 + 15.0 * k as f64));
        }
    }
    dirs
}

/// Largest `|tilt|` and `|azimuth|` (degrees) a rotated cell may reach.
pub const FIELD_OF_VIEW_DEG: (f64, f64) = (90.0, 90.0);

/// Grid and element gains seen by an array rotated by the offsets: the path
/// at `(θ, φ)` is seen at `(θ − Δθ, φ − Δφ)`. Cells leaving the field of
/// view, or a gain table, are listed in the error.
pub fn rotate_scenario(
    grid: &AngularGrid,
    element: &ElementPattern,
    azimuth_offset: f64,
    tilt_offset: f64,
) -> Result<(AngularGrid, GainPattern)> {
    if !(azimuth_offset.is_finite() && tilt_offset.is_finite()) {
        return Err(argument("rotation offsets must be finite"));
    }
    let shifted = grid.shifted(-tilt_offset, -azimuth_offset);
    let mut clipped = Vec::new();
    for n in 0..grid.len() {
        let (t, a) = shifted.angles(n)?;
        if t.abs() > FIELD_OF_VIEW_DEG.0 || a.abs() > FIELD_OF_VIEW_DEG.1 {
            clipped.push(grid.label(n)?);
        }
    }
    if !clipped.is_empty() {
        return Err(argument(format!(
            "rotation moves {} cells out of the field of view: {}",
            clipped.len(),
            clipped.join(" ")
        )));
    }
    let pattern = element
        .sample(&shifted)
        .map_err(|e| argument(format!("rotated grid leaves the element pattern coverage: {e}")))?;
    Ok((shifted, pattern))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    N,
    M,
    K,
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::N => "N",
            Self::M => "M",
            Self::K => "K",
        })
    }
}

impl FromStr for SweepVar {
    type Err = LscmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "N" | "n" => Ok(Self::N),
            "M" | "m" => Ok(Self::M),
            "K" | "k" => Ok(Self::K),
            other => Err(argument(format!("unknown sweep variable `{other}` (expected N, M or K)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub var: SweepVar,
    pub values: Vec<usize>,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub solvers: Vec<SolverKind>,
    pub seed: u64,
    pub values_dist: ValueDistribution,
    /// Relative Gaussian noise on linear RSRP; `None` keeps `y = A x` exact.
    pub noise_rel_std: Option<f64>,
    pub solver: SolverConfig,
}

impl ExperimentSpec {
    pub fn new(var: SweepVar, values: Vec<usize>) -> Self {
        Self {
            var,
            values,
            n: 400,
            m: 32,
            k: 5,
            trials: 500,
            solvers: SolverKind::ALL.to_vec(),
            seed: 0,
            values_dist: ValueDistribution::default(),
            noise_rel_std: None,
            solver: SolverConfig::new(5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.values.contains(&0) {
            return Err(argument("sweep values must be a non-empty list of positive integers"));
        }
        if self.n == 0 || self.m == 0 || self.k == 0 {
            return Err(argument("N, M and K must be positive"));
        }
        if self.trials == 0 {
            return Err(argument("trials must be at least 1"));
        }
        if self.solvers.is_empty() {
            return Err(argument("no solvers selected"));
        }
        if let Some(s) = self.noise_rel_std {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(argument("noise_rel_std must be non-negative"));
            }
        }
        Ok(())
    }

    /// `(N, M, K)` at one sweep value.
    pub fn point(&self, value: usize) -> (usize, usize, usize) {
        match self.var {
            SweepVar::N => (value, self.m, self.k),
            SweepVar::M => (self.n, value, self.k),
            SweepVar::K => (self.n, self.m, value),
        }
    }
}

/// `m` beam indices spread evenly over `0..total`.
pub fn spread_beams(total: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > total {
        return Err(argument(format!("cannot pick {m} beams out of {total}")));
    }
    Ok((0..m).map(|i| i * total / m).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub sweep_var: SweepVar,
    pub value: usize,
    pub solver: SolverKind,
    pub mean_accuracy: f64,
    pub std: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeRow {
    pub cellclass: String,
    pub n_grids: usize,
    pub solver: SolverKind,
    pub mae_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accuracy: Vec<AccuracyRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mae: Vec<MaeRow>,
}

impl EvalReport {
    pub fn accuracy_of(&self, value: usize, solver: SolverKind) -> Option<f64> {
        self.accuracy.iter().find(|r| r.value == value && r.solver == solver).map(|r| r.mean_accuracy)
    }

    /// `sweep_var,value,solver,mean_accuracy,std,trials`.
    pub fn write_accuracy_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sweep_var", "value", "solver", "mean_accuracy", "std", "trials"])?;
        for r in &self.accuracy {
            w.write_record([
                r.sweep_var.to_string(),
                r.value.to_string(),
                r.solver.to_string(),
                r.mean_accuracy.to_string(),
                r.std.to_string(),
                r.trials.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `cellclass,n_grids,solver,mae_db`.
    pub fn write_mae_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["cellclass", "n_grids", "solver", "mae_db"])?;
        for r in &self.mae {
            w.write_record([r.cellclass.clone(), r.n_grids.to_string(), r.solver.to_string(), r.mae_db.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sweep counter: point index in the high bits, trial in the low bits.
fn trial_counter(point: usize, trial: usize) -> u64 {
    ((point as u64) << 32) | trial as u64
}

/// Accuracy of every solver over `spec.trials` noiseless instances per sweep
/// value. Columns are the top-`N` by norm of the full matrix; an M-sweep
/// keeps those columns and drops beams with [`spread_beams`].
pub fn run_accuracy_sweep(spec: &ExperimentSpec, scenario: &CoefficientMatrix) -> Result<EvalReport> {
    spec.validate()?;
    let mut report = EvalReport::default();
    for (p, &value) in spec.values.iter().enumerate() {
        let (n, m, k) = spec.point(value);
        if n > scenario.n_columns() {
            return Err(argument(format!("N = {n} exceeds the {} available columns", scenario.n_columns())));
        }
        if m > scenario.n_beams() {
            return Err(argument(format!("M = {m} exceeds the {} available beams", scenario.n_beams())));
        }
        if k > n {
            return Err(argument(format!("K = {k} exceeds N = {n}")));
        }
        let (top, _) = top_n_columns(scenario, n)?;
        let cm = if m == scenario.n_beams() { top } else { top.select_beams(&spread_beams(scenario.n_beams(), m)?)? };
        let mut cfg = spec.solver.clone();
        cfg.k_max = k;

        let per_trial: Vec<Vec<f64>> = (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream(spec.seed, Domain::Sweep, trial_counter(p, t));
                let truth = generate_ground_truth_with(&mut rng, n, k, spec.values_dist)?;
                let mut y = cm.apply(truth.x().view())?;
                if let Some(s) = spec.noise_rel_std.filter(|&s| s > 0.0) {
                    let mut noise = stream(spec.seed, Domain::Noise, trial_counter(p, t));
                    y.mapv_inplace(|v| {
                        let z: f64 = noise.sample(StandardNormal);
                        (v * (1.0 + s * z)).max(0.0)
                    });
                }
                spec.solvers
                    .iter()
                    .map(|kind| {
                        let res = kind.solve(&cm, y.view(), &cfg)?;
                        support_accuracy(&res.support, truth.support())
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        for (s, &kind) in spec.solvers.iter().enumerate() {
            let acc: Vec<f64> = per_trial.iter().map(|row| row[s]).collect();
            let (mean, std) = mean_std(&acc);
            report.accuracy.push(AccuracyRow {
                sweep_var: spec.var,
                value,
                solver: kind,
                mean_accuracy: mean,
                std,
                trials: spec.trials,
            });
        }
        log::info!("sweep {}={value}: done ({} trials)", spec.var, spec.trials);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub azimuth_offset_deg: f64,
    pub tilt_offset_deg: f64,
    pub k: usize,
    /// Number of synthetic grids, one ground truth each.
    pub grids: usize,
    pub solvers: Vec<SolverKind>,
    pub seed: u64,
    pub values_dist: ValueDistribution,
    pub solver: SolverConfig,
}

impl RotationSpec {
    pub fn new(azimuth_offset_deg: f64, tilt_offset_deg: f64) -> Self {
        Self {
            azimuth_offset_deg,
            tilt_offset_deg,
            k: 3,
            grids: 50,
            solvers: SolverKind::ALL.to_vec(),
            seed: 0,
            values_dist: ValueDistribution::default(),
            solver: SolverConfig::new(3),
        }
    }
}

/// Per-grid outcome of the rotation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationOutcome {
    pub solver: SolverKind,
    pub grid: usize,
    pub exact_support: bool,
    pub mae_db: f64,
}

/// Synthetic rotation protocol: recover `x̂` from `y = A x`, predict
/// `Â x̂` with the rotated matrix and compare to `Â x` in dB.
pub fn rotation_protocol(scenario: &Scenario, spec: &RotationSpec) -> Result<Vec<RotationOutcome>> {
    if spec.grids == 0 {
        return Err(argument("grids must be at least 1"));
    }
    let a = &scenario.matrix;
    let rotated = scenario.rotated(spec.azimuth_offset_deg, spec.tilt_offset_deg)?;
    let mut cfg = spec.solver.clone();
    cfg.k_max = spec.k;
    let per_grid: Vec<Vec<RotationOutcome>> = (0..spec.grids)
        .into_par_iter()
        .map(|g| {
            let mut rng = stream(spec.seed, Domain::Rotation, g as u64);
            let truth = generate_ground_truth_with(&mut rng, a.n_columns(), spec.k, spec.values_dist)?;
            let y = a.apply(truth.x().view())?;
            let want = rotated.apply(truth.x().view())?.mapv(to_db);
            spec.solvers
                .iter()
                .map(|&kind| {
                    let res = kind.solve(a, y.view(), &cfg)?;
                    let pred = predict_rotated_rsrp(res.x_hat.view(), &rotated)?.mapv(to_db);
                    Ok(RotationOutcome {
                        solver: kind,
                        grid: g,
                        exact_support: res.support == truth.support(),
                        mae_db: mae_db(pred.view(), want.view())?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_grid.into_iter().flatten().collect())
}

/// Averages outcomes per solver into MAE rows. Grids are grouped as
/// `exact` or `inexact` support recovery, plus an `all` row.
pub fn summarize_rotation(outcomes: &[RotationOutcome], solvers: &[SolverKind]) -> Vec<MaeRow> {
    let mut rows = Vec::new();
    for class in ["all", "exact", "inexact"] {
        for &kind in solvers {
            let sel: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.solver == kind)
                .filter(|o| match class {
                    "exact" => o.exact_support,
                    "inexact" => !o.exact_support,
                    _ => true,
                })
                .map(|o| o.mae_db)
                .collect();
            if sel.is_empty() {
                continue;
            }
            rows.push(MaeRow {
                cellclass: class.to_string(),
                n_grids: sel.len(),
                solver: kind,
                mae_db: sel.iter().sum::<f64>() / sel.len() as f64,
            });
        }
    }
    rows
}
