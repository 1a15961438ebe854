//! Sparse non-negative recovery of `x` from `y = A x`.
//!
//! * [`nnls`]: active-set non-negative least squares, the inner solve of the
//!   greedy methods.
//! * [`nnomp`]: non-negative OMP, selecting by raw correlation `aₙᵀr`.
//! * [`wnomp`]: weighted NNOMP, selecting by normalized correlation plus a
//!   dynamically weighted column norm, and pruning the support after every
//!   NNLS solve.
//! * [`lasso_nn`] / [`lasso_auto`]: non-negative ℓ1 baseline by proximal
//!   gradient.

mod greedy;
mod lasso;
pub mod linalg;
mod nnls;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::coeff_matrix::CoefficientMatrix;
use crate::error::{argument, Result};

pub use greedy::{nnomp, wnomp};
pub use lasso::{lasso_auto, lasso_nn, proximal_gradient, LassoConfig, LambdaRule, ProxOutput, StepRule};
pub use nnls::{nnls, nnls_with, NnlsOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No column has positive correlation with the residual.
    KktStop,
    /// The support reached `k_max`.
    SparsityReached,
    /// Iteration cap hit.
    MaxIter,
    /// Selection made no progress.
    Stall,
    /// Proximal iterations met the relative tolerance.
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Maximum number of non-zero entries `K`.
    pub k_max: usize,
    /// Greedy stop threshold on `max(Aᵀr)`. `None` means `1e-12·‖Aᵀy‖∞`.
    pub stop_tol: Option<f64>,
    /// Greedy iteration cap. `None` means `4·k_max`.
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub lasso: LassoConfig,
}

impl SolverConfig {
    pub fn new(k_max: usize) -> Self {
        Self { k_max, stop_tol: None, max_iter: None, lasso: LassoConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(argument("k_max must be at least 1"));
        }
        if let Some(t) = self.stop_tol {
            if !(t >= 0.0) {
                return Err(argument("stop_tol must be non-negative"));
            }
        }
        self.lasso.validate()
    }

    pub fn iteration_cap(&self) -> usize {
        self.max_iter.unwrap_or(4 * self.k_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// Recovered vector, indexed by the matrix's columns.
    pub x_hat: Array1<f64>,
    /// Sorted column indices with `x_hat > 0`.
    pub support: Vec<usize>,
    /// `‖r‖₂` before the first iteration and after each one.
    pub residual_norms: Vec<f64>,
    pub termination: Termination,
    pub iterations: usize,
    /// Regularization weight used, for the LASSO.
    pub lambda: Option<f64>,
}

impl SolverResult {
    pub(crate) fn from_x(
        x_hat: Array1<f64>,
        residual_norms: Vec<f64>,
        termination: Termination,
        iterations: usize,
    ) -> Self {
        let support = x_hat.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(k, _)| k).collect();
        Self { x_hat, support, residual_norms, termination, iterations, lambda: None }
    }

    /// Support expressed as flattened grid indices of `cm`.
    pub fn grid_support(&self, cm: &CoefficientMatrix) -> Vec<usize> {
        let mut s: Vec<usize> = self.support.iter().map(|&k| cm.columns()[k]).collect();
        s.sort_unstable();
        s
    }

    pub fn to_json(&self, cm: &CoefficientMatrix, solver: SolverKind) -> Result<SolverResultJson> {
        let x_hat = self
            .support
            .iter()
            .map(|&k| {
                Ok(SparseEntry { index: cm.columns()[k], label: cm.column_label(k)?, value: self.x_hat[k] })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SolverResultJson {
            solver,
            x_hat,
            support: self.grid_support(cm),
            residual_norms: self.residual_norms.clone(),
            termination: self.termination,
            iterations: self.iterations,
            lambda: self.lambda,
        })
    }
}

/// One non-zero entry of a recovered spectrum, keyed by flattened grid index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseEntry {
    pub index: usize,
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResultJson {
    pub solver: SolverKind,
    pub x_hat: Vec<SparseEntry>,
    pub support: Vec<usize>,
    pub residual_norms: Vec<f64>,
    pub termination: Termination,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Nnomp,
    Wnomp,
    Lasso,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Lasso, SolverKind::Nnomp, SolverKind::Wnomp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nnomp => "nnomp",
            Self::Wnomp => "wnomp",
            Self::Lasso => "lasso",
        }
    }

    /// Runs the solver; the LASSO picks its own weight per `cfg.lasso.lambda`.
    pub fn solve(self, cm: &CoefficientMatrix, y: ArrayView1<f64>, cfg: &SolverConfig) -> Result<SolverResult> {
        match self {
            Self::Nnomp => nnomp(cm, y, cfg),
            Self::Wnomp => wnomp(cm, y, cfg),
            Self::Lasso => lasso_auto(cm, y, cfg),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = crate::LscmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nnomp" => Ok(Self::Nnomp),
            "wnomp" => Ok(Self::Wnomp),
            "lasso" => Ok(Self::Lasso),
            other => Err(argument(format!("unknown solver `{other}` (expected nnomp, wnomp or lasso)"))),
        }
    }
}
