use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::linalg::spectral_norm_sq;
use super::{SolverConfig, SolverResult, Termination};
use crate::coeff_matrix::CoefficientMatrix;
use crate::error::{argument, LscmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Constant step, `1/L` unless `step_size` is given.
    Fixed,
    /// Armijo-style backtracking on the quadratic upper bound.
    Backtracking,
}

/// How [`lasso_auto`] chooses the ℓ1 weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    Fixed(f64),
    /// Log-spaced sweep below `λ_max = max(Aᵀy)`.
    Sweep { points: usize, decades: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    /// Fixed ℓ1 weight. When absent the weight is picked per instance by a sweep.
    pub lambda: Option<f64>,
    pub sweep_points: usize,
    pub sweep_decades: f64,
    pub step: StepRule,
    pub step_size: Option<f64>,
    /// Nesterov momentum with function-value restart.
    pub accelerated: bool,
    pub max_iter: usize,
    /// Stop once the relative objective change stays below this.
    pub rel_tol: f64,
    /// Entries below `support_eps · max(x)` are treated as zero.
    pub support_eps: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            sweep_points: 24,
            sweep_decades: 4.0,
            step: StepRule::Fixed,
            step_size: None,
            accelerated: true,
            max_iter: 5000,
            rel_tol: 1e-10,
            support_eps: 1e-8,
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l >= 0.0) {
                return Err(argument("lasso lambda must be non-negative"));
            }
        }
        if let Some(s) = self.step_size {
            if !(s > 0.0) {
                return Err(argument("lasso step size must be positive"));
            }
        }
        if self.sweep_points == 0 || !(self.sweep_decades > 0.0) {
            return Err(argument("lasso sweep needs at least one point and a positive span"));
        }
        if self.max_iter == 0 || !(self.rel_tol >= 0.0) || !(self.support_eps >= 0.0) {
            return Err(argument("lasso max_iter, rel_tol and support_eps must be positive"));
        }
        Ok(())
    }

    pub fn lambda_rule(&self) -> LambdaRule {
        match self.lambda {
            Some(l) => LambdaRule::Fixed(l),
            None => LambdaRule::Sweep { points: self.sweep_points, decades: self.sweep_decades },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxOutput {
    pub x: Array1<f64>,
    pub iterations: usize,
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

fn objective(a: ArrayView2<f64>, y: ArrayView1<f64>, penalty: &Array1<f64>, x: &Array1<f64>) -> (f64, Array1<f64>) {
    let r = a.dot(x) - &y;
    (0.5 * r.dot(&r) + penalty.dot(x), r)
}

/// Minimizes `½‖Ax − y‖² + λ‖x‖₁` over `x ≥ 0` by proximal gradient: a
/// gradient step followed by the one-sided soft threshold `max(0, v − ηλ)`.
pub fn proximal_gradient(
    a: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    cfg: &LassoConfig,
    x0: Option<&Array1<f64>>,
) -> Result<ProxOutput> {
    if !(lambda >= 0.0) {
        return Err(argument("lasso lambda must be non-negative"));
    }
    weighted_prox(a, y, &Array1::from_elem(a.ncols(), lambda), cfg, x0)
}

/// Proximal gradient for `½‖Ax − y‖² + Σ wₙxₙ` over `x ≥ 0`.
fn weighted_prox(
    a: ArrayView2<f64>,
    y: ArrayView1<f64>,
    penalty: &Array1<f64>,
    cfg: &LassoConfig,
    x0: Option<&Array1<f64>>,
) -> Result<ProxOutput> {
    cfg.validate()?;
    let (m, n) = a.dim();
    if y.len() != m {
        return Err(LscmError::Dimension(format!("y has {} entries, A has {m} rows", y.len())));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.mapv(|v| v.max(0.0)),
        Some(_) => return Err(LscmError::Dimension("warm start has wrong length".into())),
        None => Array1::zeros(n),
    };

    let mut step = match (cfg.step, cfg.step_size) {
        (_, Some(s)) => s,
        (StepRule::Fixed, None) => {
            let lip = spectral_norm_sq(a, 300) * 1.01;
            if lip == 0.0 {
                return Ok(ProxOutput { x: Array1::zeros(n), iterations: 0, residual_norms: vec![y.dot(&y).sqrt()], converged: true });
            }
            1.0 / lip
        }
        (StepRule::Backtracking, None) => {
            let max_col = a.axis_iter(Axis(1)).map(|c| c.dot(&c)).fold(0.0, f64::max);
            if max_col == 0.0 {
                return Ok(ProxOutput { x: Array1::zeros(n), iterations: 0, residual_norms: vec![y.dot(&y).sqrt()], converged: true });
            }
            1.0 / max_col
        }
    };

    // Row-major copy of Aᵀ for the gradient product.
    let at = a.t().as_standard_layout().into_owned();
    let (f0, r0) = objective(a, y, penalty, &x);
    let mut f_prev = f0;
    let mut residual_norms = vec![r0.dot(&r0).sqrt()];
    let mut v = x.clone();
    // Residuals A x − y and A v − y, carried along instead of recomputed.
    let mut rx = r0.clone();
    let mut rv = r0;
    let mut t = 1.0f64;
    let mut quiet = 0;
    let fixed = cfg.step == StepRule::Fixed || cfg.step_size.is_some();
    // True when v equals x, i.e. the coming step is a plain proximal step.
    let mut plain = true;

    for iter in 1..=cfg.max_iter {
        if iter % 64 == 0 {
            // Resync the carried residual against rounding drift.
            rv = a.dot(&v) - &y;
        }
        let grad = at.dot(&rv);
        let fv = 0.5 * rv.dot(&rv) + penalty.dot(&v);
        let mut next;
        let mut r_next;
        let mut f_next;
        loop {
            next = &v - &(&grad * step);
            next.zip_mut_with(penalty, |u, &w| *u = (*u - step * w).max(0.0));
            (f_next, r_next) = objective(a, y, penalty, &next);
            if fixed {
                break;
            }
            // Sufficient decrease against the quadratic model at v.
            let d = &next - &v;
            let model = fv - penalty.dot(&v) + grad.dot(&d) + d.dot(&d) / (2.0 * step) + penalty.dot(&next);
            if f_next <= model * (1.0 + 1e-14) + 1e-300 {
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return Err(LscmError::Convergence { solver: "lasso", iterations: iter, detail: "backtracking step underflow".into() });
            }
        }

        // A plain step no longer than 1/L never increases the objective.
        let overshoot = fixed && plain && f_next > f_prev * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        if overshoot || !f_next.is_finite() {
            return Err(LscmError::Convergence {
                solver: "lasso",
                iterations: iter,
                detail: format!("objective diverged with fixed step {step:e}; use the backtracking step rule"),
            });
        }
        residual_norms.push(r_next.dot(&r_next).sqrt());

        if cfg.accelerated && f_next <= f_prev {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            v = &next + &((&next - &x) * beta);
            rv = &r_next + &((&r_next - &rx) * beta);
            t = t_next;
            plain = false;
        } else {
            // Plain step, or a momentum restart after an increase.
            t = 1.0;
            v = next.clone();
            rv = r_next.clone();
            plain = true;
        }
        x = next;
        rx = r_next;

        let change = (f_prev - f_next).abs();
        f_prev = f_next;
        if change <= cfg.rel_tol * f_next.abs().max(f64::MIN_POSITIVE) {
            quiet += 1;
            if quiet >= 3 {
                return Ok(ProxOutput { x, iterations: iter, residual_norms, converged: true });
            }
        } else {
            quiet = 0;
        }
    }
    Ok(ProxOutput { x, iterations: cfg.max_iter, residual_norms, converged: false })
}

/// Keeps entries above `eps · max(x)` and, if more than `k_max` survive, the
/// `k_max` largest contributions `xₙ‖aₙ‖₂` (ties to the lower index).
fn sparsify(x: &mut Array1<f64>, norms: &Array1<f64>, eps: f64, k_max: usize) {
    let peak = x.iter().cloned().fold(0.0, f64::max);
    let floor = eps * peak;
    let mut kept: Vec<usize> = (0..x.len()).filter(|&k| x[k] > floor && x[k] > 0.0).collect();
    if kept.len() > k_max {
        kept.sort_by(|&p, &q| (x[q] * norms[q]).total_cmp(&(x[p] * norms[p])).then(p.cmp(&q)));
        kept.truncate(k_max);
    }
    let mut out = Array1::zeros(x.len());
    for k in kept {
        out[k] = x[k];
    }
    *x = out;
}

/// Non-negative LASSO with a fixed weight, sparsified to at most `k_max` entries.
pub fn lasso_nn(cm: &CoefficientMatrix, y: ArrayView1<f64>, lambda: f64, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    if !(lambda >= 0.0) {
        return Err(argument("lasso lambda must be non-negative"));
    }
    let out = proximal_gradient(cm.a().view(), y, lambda, &cfg.lasso, None)?;
    Ok(finish(cm, out, lambda, cfg))
}

fn finish(cm: &CoefficientMatrix, out: ProxOutput, lambda: f64, cfg: &SolverConfig) -> SolverResult {
    let mut x = out.x;
    sparsify(&mut x, cm.col_norms(), cfg.lasso.support_eps, cfg.k_max);
    let termination = if out.converged { Termination::Converged } else { Termination::MaxIter };
    let mut res = SolverResult::from_x(x, out.residual_norms, termination, out.iterations);
    res.lambda = Some(lambda);
    res
}

/// Non-negative LASSO with the weight chosen by `cfg.lasso`.
///
/// In sweep mode the weight runs down a log grid from `λ_max = max(Aᵀy)`,
/// warm-starting each solve from the previous one, and stops at the first
/// weight whose solution has more than `k_max` entries above the support
/// threshold. The result is the last solution with at most `k_max` entries,
/// i.e. the smallest residual on the grid that still respects the sparsity
/// budget. If even the first point exceeds the budget it is truncated.
pub fn lasso_auto(cm: &CoefficientMatrix, y: ArrayView1<f64>, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    let (points, decades) = match cfg.lasso.lambda_rule() {
        LambdaRule::Fixed(l) => return lasso_nn(cm, y, l, cfg),
        LambdaRule::Sweep { points, decades } => (points, decades),
    };
    let a = cm.a().view();
    if y.len() != a.nrows() {
        return Err(LscmError::Dimension(format!("y has {} entries, A has {} rows", y.len(), a.nrows())));
    }
    let lambda_max = a.t().dot(&y).iter().cloned().fold(0.0, f64::max);
    if lambda_max <= 0.0 {
        return lasso_nn(cm, y, lambda_max.max(0.0), cfg);
    }

    // The Lipschitz bound does not depend on the weight, so estimate it once.
    let mut lasso = cfg.lasso.clone();
    if lasso.step == StepRule::Fixed && lasso.step_size.is_none() {
        lasso.step_size = Some(1.0 / (spectral_norm_sq(a, 300) * 1.01));
    }
    let mut warm: Option<Array1<f64>> = None;
    let mut chosen: Option<SolverResult> = None;
    for k in 1..=points {
        let lambda = lambda_max * 10f64.powf(-decades * k as f64 / points as f64);
        let out = proximal_gradient(a, y, lambda, &lasso, warm.as_ref())?;
        let over = support_size(&out.x, cfg.lasso.support_eps) > cfg.k_max;
        warm = Some(out.x.clone());
        if over && chosen.is_some() {
            break;
        }
        chosen = Some(finish(cm, out, lambda, cfg));
        if over {
            break;
        }
    }
    Ok(chosen.expect("sweep has at least one point"))
}

fn support_size(x: &Array1<f64>, eps: f64) -> usize {
    let floor = eps * x.iter().cloned().fold(0.0, f64::max);
    x.iter().filter(|&&v| v > floor && v > 0.0).count()
}
