//! Configuration, measurement ingestion and the `lscm` subcommands.
//!
//! Every command writes its artifacts into one output directory together
//! with `manifest.json`, which records the command, seed, config hash and
//! the SHA-256 of every artifact. JSON artifacts also carry the hash inline.

pub mod config;
pub mod measurements;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel_sim::{estimate_expected_rsrp, generate_ground_truth, RsrpSampler};
use crate::error::{argument, LscmError, Result};
use crate::evaluation::{rotation_protocol, run_accuracy_sweep, summarize_rotation, EvalReport, SweepVar};
use crate::solvers::{SolverKind, SolverResultJson, SparseEntry};
use crate::units::to_db;

pub use config::Config;
pub use measurements::{ingest_measurements, GridMeasurement, MeasurementRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BuildMatrix,
    Simulate,
    Solve,
    Sweep,
    RotateEval,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::BuildMatrix => "build-matrix",
            Self::Simulate => "simulate",
            Self::Solve => "solve",
            Self::Sweep => "sweep",
            Self::RotateEval => "rotate-eval",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = LscmError;

    fn from_str(s: &str) -> Result<Self> {
        [Self::BuildMatrix, Self::Simulate, Self::Solve, Self::Sweep, Self::RotateEval]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| argument(format!("unknown command `{s}`")))
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub solver: Option<SolverKind>,
    pub var: Option<SweepVar>,
    pub values: Option<Vec<usize>>,
    pub measurements: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seed: u64,
    pub config_hash: String,
    pub config: Config,
    pub artifacts: Vec<ArtifactEntry>,
}

/// JSON artifact wrapper carrying the run metadata.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: Command,
    seed: u64,
    config_hash: &'a str,
    #[serde(flatten)]
    payload: T,
}

struct Artifacts {
    dir: PathBuf,
    command: Command,
    seed: u64,
    hash: String,
    entries: Vec<ArtifactEntry>,
}

impl Artifacts {
    fn new(dir: &Path, command: Command, seed: u64, hash: String) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_owned(), command, seed, hash, entries: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.entries.push(ArtifactEntry {
            file: name.to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        write(&self.path(name))?;
        self.record(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, payload: T) -> Result<()> {
        let env = Envelope { command: self.command, seed: self.seed, config_hash: &self.hash, payload };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        self.record(name)
    }

    fn finish(self, config: Config) -> Result<Manifest> {
        let manifest = Manifest {
            tool: "lscm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            seed: self.seed,
            config_hash: self.hash,
            config,
            artifacts: self.entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

/// Loads the config, applies overrides and runs one command.
pub fn run(command: Command, opts: &RunOptions) -> Result<Manifest> {
    let mut cfg = match &opts.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(kind) = opts.solver {
        cfg.solver.kind = kind;
        cfg.sweep.solvers = vec![kind];
        cfg.rotation.solvers = vec![kind];
    }
    if let Some(var) = opts.var {
        cfg.sweep.var = var;
    }
    if let Some(values) = &opts.values {
        cfg.sweep.values = values.clone();
    }
    let hash = cfg.hash();
    log::info!("{command}: seed {} config {hash}", cfg.seed);
    let mut out = Artifacts::new(&opts.out, command, cfg.seed, hash)?;
    match command {
        Command::BuildMatrix => build_matrix_cmd(&cfg, &mut out)?,
        Command::Simulate => simulate_cmd(&cfg, &mut out)?,
        Command::Solve => {
            let path = opts
                .measurements
                .as_deref()
                .ok_or_else(|| argument("solve needs --measurements <csv>"))?;
            solve_cmd(&cfg, path, &mut out)?
        }
        Command::Sweep => sweep_cmd(&cfg, &mut out)?,
        Command::RotateEval => rotate_cmd(&cfg, &mut out)?,
    }
    let manifest = out.finish(cfg)?;
    log::info!("{command}: wrote {} artifacts to {}", manifest.artifacts.len(), opts.out.display());
    Ok(manifest)
}

fn build_matrix_cmd(cfg: &Config, out: &mut Artifacts) -> Result<()> {
    let sc = cfg.scenario()?;
    out.csv("matrix.csv", |p| sc.matrix.write_csv(p))?;
    out.csv("norms.csv", |p| sc.matrix.write_norms_csv(p))?;
    out.csv("codebook.csv", |p| sc.codebook.write_csv(p))?;
    out.json("matrix.json", sc.matrix.to_json())?;
    if !sc.matrix.zero_columns().is_empty() {
        log::warn!("{} zero-norm columns", sc.matrix.zero_columns().len());
    }
    Ok(())
}

#[derive(Serialize)]
struct GroundTruthJson {
    k: usize,
    x: Vec<SparseEntry>,
}

fn simulate_cmd(cfg: &Config, out: &mut Artifacts) -> Result<()> {
    let sc = cfg.scenario()?;
    let sim = &cfg.simulation;
    let truth = generate_ground_truth(sc.grid.len(), sim.k, cfg.seed, sim.values)
        .map_err(|e| LscmError::Config { field: "simulation.k".into(), msg: e.to_string() })?;
    let sampler = RsrpSampler::new(&sc.array, &sc.grid, &sc.pattern, &sc.codebook, &truth, cfg.shadowing()?)?;
    let set = estimate_expected_rsrp(&sampler, cfg.seed, sim.samples)
        .map_err(|e| LscmError::Config { field: "simulation.samples".into(), msg: e.to_string() })?;
    let expected = sc.matrix.apply(truth.x().view())?;
    let labels = sc.codebook.labels();

    let x = truth
        .support()
        .iter()
        .map(|&n| Ok(SparseEntry { index: n, label: sc.grid.label(n)?, value: truth.x()[n] }))
        .collect::<Result<Vec<_>>>()?;
    out.json("ground_truth.json", GroundTruthJson { k: truth.k(), x })?;
    out.csv("rsrp_trace.csv", |p| set.write_trace_csv(p, labels))?;

    let se = set.std_error();
    out.csv("rsrp_mean.csv", |p| {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["beam", "rsrp_linear", "rsrp_db", "expected_linear", "std_error"])?;
        for m in 0..labels.len() {
            w.write_record([
                labels[m].clone(),
                set.mean[m].to_string(),
                to_db(set.mean[m]).to_string(),
                expected[m].to_string(),
                se[m].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;

    let records: Vec<MeasurementRecord> = set
        .samples
        .rows()
        .into_iter()
        .flat_map(|row| {
            row.iter()
                .enumerate()
                .map(|(m, &v)| MeasurementRecord {
                    grid_id: "sim".into(),
                    cell_id: "cell0".into(),
                    beam_id: labels[m].clone(),
                    rsrp_db: to_db(v),
                    timestamp: None,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out.csv("measurements.csv", |p| measurements::write_measurements(p, &records))?;
    Ok(())
}

#[derive(Serialize)]
struct GridSolution {
    grid_id: String,
    cell_id: String,
    beams_used: Vec<String>,
    result: SolverResultJson,
}

#[derive(Serialize)]
struct Solutions {
    solver: SolverKind,
    grids: Vec<GridSolution>,
}

fn solve_cmd(cfg: &Config, path: &Path, out: &mut Artifacts) -> Result<()> {
    let sc = cfg.scenario()?;
    let grids = ingest_measurements(path)?;
    let labels = sc.codebook.labels();
    let kind = cfg.solver.kind;
    let solver_cfg = cfg.solver.solver_config();
    solver_cfg.validate().map_err(|e| LscmError::Config { field: "solver".into(), msg: e.to_string() })?;

    let solved: Vec<GridSolution> = grids
        .par_iter()
        .map(|g| {
            let (rows, y) = g.aligned(labels)?;
            let cm = sc.matrix.select_beams(&rows)?;
            let res = kind.solve(&cm, y.view(), &solver_cfg)?;
            Ok(GridSolution {
                grid_id: g.grid_id.clone(),
                cell_id: g.cell_id.clone(),
                beams_used: rows.iter().map(|&m| labels[m].clone()).collect(),
                result: res.to_json(&cm, kind)?,
            })
        })
        .collect::<Result<_>>()?;

    out.csv("aps.csv", |p| {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["grid_id", "cell_id", "index", "tilt_deg", "azimuth_deg", "power"])?;
        for s in &solved {
            for e in &s.result.x_hat {
                let (t, a) = sc.grid.angles(e.index)?;
                w.write_record([
                    s.grid_id.clone(),
                    s.cell_id.clone(),
                    e.index.to_string(),
                    t.to_string(),
                    a.to_string(),
                    e.value.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    out.json("solutions.json", Solutions { solver: kind, grids: solved })?;
    Ok(())
}

fn sweep_cmd(cfg: &Config, out: &mut Artifacts) -> Result<()> {
    let sc = cfg.scenario()?;
    let spec = cfg.experiment()?;
    let report = run_accuracy_sweep(&spec, &sc.matrix)
        .map_err(|e| LscmError::Config { field: "sweep".into(), msg: e.to_string() })?;
    out.csv("accuracy.csv", |p| report.write_accuracy_csv(p))?;
    out.json("sweep_report.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct OutcomeJson {
    solver: SolverKind,
    grid: usize,
    exact_support: bool,
    mae_db: f64,
}

#[derive(Serialize)]
struct RotationReportJson<'a> {
    azimuth_offset_deg: f64,
    tilt_offset_deg: f64,
    report: &'a EvalReport,
    grids: Vec<OutcomeJson>,
}

fn rotate_cmd(cfg: &Config, out: &mut Artifacts) -> Result<()> {
    let sc = cfg.scenario()?;
    let spec = cfg.rotation_spec()?;
    let outcomes = rotation_protocol(&sc, &spec)
        .map_err(|e| LscmError::Config { field: "rotation".into(), msg: e.to_string() })?;
    let report = EvalReport { accuracy: Vec::new(), mae: summarize_rotation(&outcomes, &spec.solvers) };
    out.csv("mae.csv", |p| report.write_mae_csv(p))?;
    let grids = outcomes
        .iter()
        .map(|o| OutcomeJson { solver: o.solver, grid: o.grid, exact_support: o.exact_support, mae_db: o.mae_db })
        .collect();
    out.json(
        "rotation_report.json",
        RotationReportJson {
            azimuth_offset_deg: spec.azimuth_offset_deg,
            tilt_offset_deg: spec.tilt_offset_deg,
            report: &report,
            grids,
        },
    )?;
    Ok(())
}
