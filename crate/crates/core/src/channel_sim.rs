//! Physics-level synthetic data.
//!
//! Each sample draws, for every active path, a log-normal power `α` and a
//! uniform path phase `ω_path ∈ (−π, π)`, and for every antenna a Gaussian
//! hardware phase error `ω_ant ~ N(0, σ²)`. The per-antenna channel is
//!
//! ```text
//! h_{x,y} = Σ_p √α_p · g_p · e^{−j(geo_p(x,y) + ω_path,p + ω_ant(x,y))}
//! ```
//!
//! and the beam-`m` RSRP is `P·|Σ_{x,y} h_{x,y} w^{(m)}_{x,y}|²`.
//! Averaging many samples reproduces `A x`, which is what the Monte Carlo
//! tests check.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{geometric_phase, AngularGrid, ArrayConfig, BeamCodebook, GainPattern};
use crate::error::{argument, LscmError, Result};
use crate::rng::{sample_counter, stream, Domain};
use crate::units::to_db;

/// Sparse ground-truth angular power spectrum, `x[n] = E[α_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthAps {
    x: Array1<f64>,
    support: Vec<usize>,
}

impl GroundTruthAps {
    pub fn new(x: Array1<f64>) -> Result<Self> {
        if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(argument("ground-truth powers must be finite and non-negative"));
        }
        let support = x.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(k, _)| k).collect();
        Ok(Self { x, support })
    }

    /// Builds a spectrum of length `n` from `(index, power)` pairs.
    pub fn from_paths(n: usize, paths: &[(usize, f64)]) -> Result<Self> {
        let mut x = Array1::zeros(n);
        for &(k, p) in paths {
            crate::error::check_index("grid cell", k, n)?;
            if !(p > 0.0) {
                return Err(argument(format!("path power at {k} must be positive")));
            }
            x[k] += p;
        }
        Self::new(x)
    }

    pub fn x(&self) -> &Array1<f64> {
        &self.x
    }

    /// Sorted indices with positive power.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }
}

/// Distribution of the non-zero ground-truth powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDistribution {
    /// `peak · 10^{−u·range/10}` with `u ~ U(0, 1)`.
    LogUniform { peak: f64, dynamic_range_db: f64 },
    Constant { value: f64 },
}

impl Default for ValueDistribution {
    fn default() -> Self {
        Self::LogUniform { peak: 1.0, dynamic_range_db: 20.0 }
    }
}

impl ValueDistribution {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::LogUniform { peak, dynamic_range_db } => peak > 0.0 && dynamic_range_db >= 0.0,
            Self::Constant { value } => value > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(argument("ground-truth value distribution must produce positive powers"))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::LogUniform { peak, dynamic_range_db } => {
                let u: f64 = rng.random();
                peak * 10f64.powf(-u * dynamic_range_db / 10.0)
            }
            Self::Constant { value } => value,
        }
    }
}

/// Ground truth with `k` paths placed uniformly without replacement on `0..n`.
pub fn generate_ground_truth(n: usize, k: usize, seed: u64, dist: ValueDistribution) -> Result<GroundTruthAps> {
    generate_ground_truth_with(&mut stream(seed, Domain::GroundTruth, 0), n, k, dist)
}

pub fn generate_ground_truth_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    dist: ValueDistribution,
) -> Result<GroundTruthAps> {
    if k == 0 || k > n {
        return Err(argument(format!("sparsity must satisfy 1 <= k <= n, got k={k}, n={n}")));
    }
    dist.validate()?;
    let mut support = index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    let mut x = Array1::zeros(n);
    for &s in &support {
        x[s] = dist.draw(rng);
    }
    GroundTruthAps::new(x)
}

/// Log-normal shadowing; `log_std` is the std of the underlying normal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShadowingParams {
    pub log_std: f64,
}

impl ShadowingParams {
    pub fn new(log_std: f64) -> Result<Self> {
        if !(log_std.is_finite() && log_std >= 0.0) {
            return Err(argument("shadowing std must be non-negative"));
        }
        Ok(Self { log_std })
    }
}

/// Draws `exp(μ + s·z)` with `μ = ln(mean) − s²/2`, so that `E[α] = mean`.
pub fn sample_channel_gain<R: Rng + ?Sized>(mean: f64, shadow: ShadowingParams, rng: &mut R) -> Result<f64> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(argument(format!("channel gain mean must be positive, got {mean}")));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(lognormal(mean, shadow.log_std, z))
}

fn lognormal(mean: f64, s: f64, z: f64) -> f64 {
    if s == 0.0 {
        return mean;
    }
    (mean.ln() - 0.5 * s * s + s * z).exp()
}

/// Random variables behind one RSRP sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraws {
    /// Standard normals driving the log-normal path powers.
    pub shadow_z: Vec<f64>,
    /// Path phases, uniform on `(−π, π)`.
    pub path_phase: Vec<f64>,
    /// Per-antenna phase errors, row-major over `(x, y)`.
    pub antenna_phase: Vec<f64>,
}

/// Pre-computed path and precoder terms for repeated RSRP sampling.
#[derive(Debug, Clone)]
pub struct RsrpSampler {
    power: f64,
    sigma: f64,
    shadow: ShadowingParams,
    n_elements: usize,
    means: Vec<f64>,
    gains: Vec<f64>,
    /// `e^{−j·geo}` per path, per antenna.
    steering: Vec<Vec<Complex64>>,
    /// Precoder weights per beam, per antenna.
    weights: Vec<Vec<Complex64>>,
}

impl RsrpSampler {
    pub fn new(
        cfg: &ArrayConfig,
        grid: &AngularGrid,
        pattern: &GainPattern,
        codebook: &BeamCodebook,
        truth: &GroundTruthAps,
        shadow: ShadowingParams,
    ) -> Result<Self> {
        cfg.validate()?;
        codebook.check_array(cfg)?;
        pattern.check_grid(grid)?;
        if truth.x().len() != grid.len() {
            return Err(LscmError::Dimension(format!(
                "ground truth has {} cells, grid has {}",
                truth.x().len(),
                grid.len()
            )));
        }
        ShadowingParams::new(shadow.log_std)?;
        let mut means = Vec::new();
        let mut gains = Vec::new();
        let mut steering = Vec::new();
        for &n in truth.support() {
            let (i, j) = grid.cell(n)?;
            let (tilt, az) = grid.angles(n)?;
            means.push(truth.x()[n]);
            gains.push(pattern.gains()[[i, j]]);
            let mut s = Vec::with_capacity(cfg.n_elements());
            for x in 0..cfg.n_x {
                for y in 0..cfg.n_y {
                    s.push(Complex64::from_polar(1.0, -geometric_phase(cfg, tilt, az, x, y)));
                }
            }
            steering.push(s);
        }
        let weights = (0..codebook.len())
            .map(|m| {
                let p = codebook.phases(m)?;
                Ok(p.iter().map(|&phi| Complex64::from_polar(1.0, phi)).collect())
            })
            .collect::<Result<Vec<Vec<Complex64>>>>()?;
        Ok(Self {
            power: cfg.power,
            sigma: cfg.sigma,
            shadow,
            n_elements: cfg.n_elements(),
            means,
            gains,
            steering,
            weights,
        })
    }

    pub fn n_beams(&self) -> usize {
        self.weights.len()
    }

    pub fn n_paths(&self) -> usize {
        self.means.len()
    }

    /// Draws in a fixed order: per path (shadowing normal, path phase), then
    /// the antenna phase errors.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleDraws {
        let mut shadow_z = Vec::with_capacity(self.n_paths());
        let mut path_phase = Vec::with_capacity(self.n_paths());
        for _ in 0..self.n_paths() {
            shadow_z.push(rng.sample(StandardNormal));
            path_phase.push(rng.random_range(-PI..PI));
        }
        let antenna_phase = (0..self.n_elements)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                self.sigma * z
            })
            .collect();
        SampleDraws { shadow_z, path_phase, antenna_phase }
    }

    /// RSRP of beam `m` for the given draws.
    pub fn evaluate(&self, draws: &SampleDraws, m: usize) -> Result<f64> {
        crate::error::check_index("beam", m, self.n_beams())?;
        if self.n_paths() == 0 {
            return Ok(0.0);
        }
        let amps: Vec<Complex64> = (0..self.n_paths())
            .map(|p| {
                let alpha = lognormal(self.means[p], self.shadow.log_std, draws.shadow_z[p]);
                Complex64::from_polar(alpha.sqrt() * self.gains[p], -draws.path_phase[p])
            })
            .collect();
        let w = &self.weights[m];
        let mut field = Complex64::new(0.0, 0.0);
        for e in 0..self.n_elements {
            let mut h = Complex64::new(0.0, 0.0);
            for (p, amp) in amps.iter().enumerate() {
                h += amp * self.steering[p][e];
            }
            h *= Complex64::from_polar(1.0, -draws.antenna_phase[e]);
            field += h * w[e];
        }
        Ok(self.power * field.norm_sqr())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> Result<f64> {
        let draws = self.draw(rng);
        self.evaluate(&draws, m)
    }
}

/// One RSRP sample of beam `m`. An empty support yields 0.
#[allow(clippy::too_many_arguments)]
pub fn sample_rsrp<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    grid: &AngularGrid,
    pattern: &GainPattern,
    codebook: &BeamCodebook,
    truth: &GroundTruthAps,
    shadow: ShadowingParams,
    rng: &mut R,
    m: usize,
) -> Result<f64> {
    RsrpSampler::new(cfg, grid, pattern, codebook, truth, shadow)?.sample(rng, m)
}

/// `T × M` linear RSRP samples with per-beam means.
#[derive(Debug, Clone, PartialEq)]
pub struct RsrpSampleSet {
    pub samples: Array2<f64>,
    pub mean: Array1<f64>,
    /// Set when the ground truth had no paths and every sample is zero.
    pub degenerate: bool,
}

impl RsrpSampleSet {
    pub fn t_count(&self) -> usize {
        self.samples.nrows()
    }

    /// Per-beam sample standard deviation (n − 1 denominator).
    pub fn std(&self) -> Array1<f64> {
        let t = self.t_count();
        if t < 2 {
            return Array1::zeros(self.samples.ncols());
        }
        self.samples.var_axis(Axis(0), 1.0).mapv(f64::sqrt)
    }

    pub fn std_error(&self) -> Array1<f64> {
        self.std() / (self.t_count() as f64).sqrt()
    }

    /// `t,beam,rsrp_linear,rsrp_db`.
    pub fn write_trace_csv(&self, path: &Path, labels: &[String]) -> Result<()> {
        if labels.len() != self.samples.ncols() {
            return Err(LscmError::Dimension(format!("{} labels for {} beams", labels.len(), self.samples.ncols())));
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "beam", "rsrp_linear", "rsrp_db"])?;
        for (t, row) in self.samples.rows().into_iter().enumerate() {
            for (m, &v) in row.iter().enumerate() {
                w.write_record([t.to_string(), labels[m].clone(), v.to_string(), to_db(v).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `t_count` independent samples of every beam. Sample `(t, m)` uses its own
/// counter stream, so the result does not depend on scheduling.
pub fn estimate_expected_rsrp(sampler: &RsrpSampler, seed: u64, t_count: usize) -> Result<RsrpSampleSet> {
    if t_count == 0 {
        return Err(argument("t_count must be at least 1"));
    }
    let n_beams = sampler.n_beams();
    let rows: Vec<Vec<f64>> = (0..t_count)
        .into_par_iter()
        .map(|t| {
            (0..n_beams)
                .map(|m| sampler.sample(&mut stream(seed, Domain::Rsrp, sample_counter(t as u64, m)), m))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let samples = Array2::from_shape_vec((t_count, n_beams), rows.into_iter().flatten().collect())
        .map_err(|e| LscmError::Dimension(e.to_string()))?;
    // Sequential column sums keep the mean independent of the thread count.
    let mean = samples.mean_axis(Axis(0)).expect("t_count >= 1");
    Ok(RsrpSampleSet { samples, mean, degenerate: sampler.n_paths() == 0 })
}
