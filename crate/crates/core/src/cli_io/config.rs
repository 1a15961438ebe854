//! TOML run configuration.
//!
//! Every section is optional and falls back to the synthetic defaults.
//! Unknown keys are rejected. Relative paths are resolved against the
//! directory of the config file. See the README for the full key list.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array_model::{
    make_dft_codebook, AngularGrid, ArrayConfig, BeamCodebook, ElementPattern, GainTable, ParabolicPattern,
};
use crate::channel_sim::{ShadowingParams, ValueDistribution};
use crate::error::{LscmError, Result};
use crate::evaluation::{default_beam_directions, ExperimentSpec, RotationSpec, Scenario, SweepVar};
use crate::solvers::{LassoConfig, SolverConfig, SolverKind};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub array: ArraySection,
    pub grid: GridSection,
    pub pattern: PatternSection,
    pub codebook: CodebookSection,
    pub simulation: SimulationSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub rotation: RotationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub n_x: usize,
    pub n_y: usize,
    pub d_x: f64,
    pub d_y: f64,
    pub wavelength: f64,
    pub sigma: f64,
    pub power: f64,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self { n_x: 4, n_y: 8, d_x: 0.5, d_y: 0.5, wavelength: 1.0, sigma: 0.3, power: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub tilt_min: f64,
    pub tilt_max: f64,
    pub tilt_step: f64,
    pub azimuth_min: f64,
    pub azimuth_max: f64,
    pub azimuth_step: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { tilt_min: -30.0, tilt_max: 30.0, tilt_step: 2.0, azimuth_min: -60.0, azimuth_max: 60.0, azimuth_step: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Parabolic,
    Table,
    #[default]
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternSection {
    pub kind: PatternKind,
    pub peak_gain_dbi: f64,
    pub tilt_beamwidth_deg: f64,
    pub azimuth_beamwidth_deg: f64,
    pub floor_db: f64,
    /// `tilt_deg,azimuth_deg,gain_linear` table, for `kind = "table"`.
    pub table: Option<PathBuf>,
    /// Linear amplitude gain, for `kind = "isotropic"`.
    pub gain: f64,
}

impl Default for PatternSection {
    fn default() -> Self {
        let p = ParabolicPattern::default();
        Self {
            kind: PatternKind::Isotropic,
            peak_gain_dbi: p.peak_gain_dbi,
            tilt_beamwidth_deg: p.tilt_beamwidth_deg,
            azimuth_beamwidth_deg: p.azimuth_beamwidth_deg,
            floor_db: p.floor_db,
            table: None,
            gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookKind {
    #[default]
    Dft,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookSection {
    pub kind: CodebookKind,
    /// `[tilt, azimuth]` steering directions for `kind = "dft"`; empty means
    /// the default 4 × 8 lattice.
    pub directions: Vec<[f64; 2]>,
    /// `beam,x,y,phase_rad` file for `kind = "csv"`.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    /// Number of paths in the synthetic ground truth.
    pub k: usize,
    /// RSRP samples per beam.
    pub samples: usize,
    pub shadowing_log_std: f64,
    pub values: ValueDistribution,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { k: 5, samples: 1000, shadowing_log_std: 0.5, values: ValueDistribution::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKind,
    pub k_max: usize,
    pub stop_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub lasso: LassoConfig,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { kind: SolverKind::Wnomp, k_max: 5, stop_tol: None, max_iter: None, lasso: LassoConfig::default() }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { k_max: self.k_max, stop_tol: self.stop_tol, max_iter: self.max_iter, lasso: self.lasso.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub var: SweepVar,
    pub values: Vec<usize>,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub solvers: Vec<SolverKind>,
    pub values_dist: ValueDistribution,
    pub noise_rel_std: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            var: SweepVar::N,
            values: vec![100, 300, 500, 700],
            n: 400,
            m: 32,
            k: 5,
            trials: 500,
            solvers: SolverKind::ALL.to_vec(),
            values_dist: ValueDistribution::default(),
            noise_rel_std: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotationSection {
    pub azimuth_offset_deg: f64,
    pub tilt_offset_deg: f64,
    pub k: usize,
    pub grids: usize,
    pub solvers: Vec<SolverKind>,
    pub values_dist: ValueDistribution,
}

impl Default for RotationSection {
    fn default() -> Self {
        Self {
            azimuth_offset_deg: 10.0,
            tilt_offset_deg: 0.0,
            k: 3,
            grids: 50,
            solvers: SolverKind::ALL.to_vec(),
            values_dist: ValueDistribution::default(),
        }
    }
}

fn field(name: &str) -> impl Fn(LscmError) -> LscmError + '_ {
    move |e| match e {
        LscmError::Config { .. } => e,
        other => LscmError::Config { field: name.to_string(), msg: other.to_string() },
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

impl Config {
    /// Parses a TOML file; relative paths inside become relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            LscmError::Config { field, msg } => {
                LscmError::Config { field, msg: format!("{msg} (in {})", path.display()) }
            }
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(t) = &cfg.pattern.table {
            cfg.pattern.table = Some(resolve(base, t));
        }
        if let Some(p) = &cfg.codebook.path {
            cfg.codebook.path = Some(resolve(base, p));
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" at byte {}", s.start)).unwrap_or_default();
            LscmError::Config { field: "<root>".into(), msg: format!("{}{span}", e.message()) }
        })
    }

    /// SHA-256 of the canonical JSON form, lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(&canonical))
    }

    pub fn array_config(&self) -> Result<ArrayConfig> {
        let a = &self.array;
        ArrayConfig::new(a.n_x, a.n_y, a.d_x, a.d_y, a.wavelength, a.sigma, a.power).map_err(field("array"))
    }

    pub fn angular_grid(&self) -> Result<AngularGrid> {
        let g = &self.grid;
        AngularGrid::uniform((g.tilt_min, g.tilt_max), g.tilt_step, (g.azimuth_min, g.azimuth_max), g.azimuth_step)
            .map_err(field("grid"))
    }

    pub fn element_pattern(&self) -> Result<ElementPattern> {
        let p = &self.pattern;
        Ok(match p.kind {
            PatternKind::Parabolic => {
                if !(p.tilt_beamwidth_deg > 0.0 && p.azimuth_beamwidth_deg > 0.0 && p.floor_db >= 0.0) {
                    return Err(LscmError::Config {
                        field: "pattern".into(),
                        msg: "beamwidths must be positive and floor_db non-negative".into(),
                    });
                }
                ElementPattern::Parabolic(ParabolicPattern {
                    peak_gain_dbi: p.peak_gain_dbi,
                    tilt_beamwidth_deg: p.tilt_beamwidth_deg,
                    azimuth_beamwidth_deg: p.azimuth_beamwidth_deg,
                    floor_db: p.floor_db,
                })
            }
            PatternKind::Table => {
                let path = p.table.as_ref().ok_or_else(|| LscmError::Config {
                    field: "pattern.table".into(),
                    msg: "required when kind = \"table\"".into(),
                })?;
                ElementPattern::Table(GainTable::read_csv(path).map_err(field("pattern.table"))?)
            }
            PatternKind::Isotropic => {
                if !(p.gain > 0.0 && p.gain.is_finite()) {
                    return Err(LscmError::Config { field: "pattern.gain".into(), msg: "must be positive".into() });
                }
                ElementPattern::Isotropic(p.gain)
            }
        })
    }

    pub fn beam_codebook(&self, array: &ArrayConfig) -> Result<BeamCodebook> {
        let c = &self.codebook;
        match c.kind {
            CodebookKind::Dft => {
                let dirs: Vec<(f64, f64)> = if c.directions.is_empty() {
                    default_beam_directions()
                } else {
                    c.directions.iter().map(|d| (d[0], d[1])).collect()
                };
                make_dft_codebook(array, &dirs).map_err(field("codebook.directions"))
            }
            CodebookKind::Csv => {
                let path = c.path.as_ref().ok_or_else(|| LscmError::Config {
                    field: "codebook.path".into(),
                    msg: "required when kind = \"csv\"".into(),
                })?;
                BeamCodebook::read_csv(path, array).map_err(field("codebook.path"))
            }
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let array = self.array_config()?;
        let grid = self.angular_grid()?;
        let element = self.element_pattern()?;
        let codebook = self.beam_codebook(&array)?;
        Scenario::build(array, grid, element, codebook).map_err(field("pattern"))
    }

    pub fn shadowing(&self) -> Result<ShadowingParams> {
        ShadowingParams::new(self.simulation.shadowing_log_std).map_err(field("simulation.shadowing_log_std"))
    }

    pub fn experiment(&self) -> Result<ExperimentSpec> {
        let s = &self.sweep;
        let spec = ExperimentSpec {
            var: s.var,
            values: s.values.clone(),
            n: s.n,
            m: s.m,
            k: s.k,
            trials: s.trials,
            solvers: s.solvers.clone(),
            seed: self.seed,
            values_dist: s.values_dist,
            noise_rel_std: s.noise_rel_std,
            solver: self.solver.solver_config(),
        };
        spec.validate().map_err(field("sweep"))?;
        Ok(spec)
    }

    pub fn rotation_spec(&self) -> Result<RotationSpec> {
        let r = &self.rotation;
        if r.k == 0 || r.grids == 0 || r.solvers.is_empty() {
            return Err(LscmError::Config {
                field: "rotation".into(),
                msg: "k and grids must be positive and solvers non-empty".into(),
            });
        }
        Ok(RotationSpec {
            azimuth_offset_deg: r.azimuth_offset_deg,
            tilt_offset_deg: r.tilt_offset_deg,
            k: r.k,
            grids: r.grids,
            solvers: r.solvers.clone(),
            seed: self.seed,
            values_dist: r.values_dist,
            solver: self.solver.solver_config(),
        })
    }
}
