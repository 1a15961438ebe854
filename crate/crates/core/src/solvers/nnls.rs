//! Lawson–Hanson active-set non-negative least squares.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::linalg::{argmax, lstsq};
use crate::error::{argument, LscmError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnlsOptions {
    /// Outer iteration cap is `max_iter_factor × n_columns`.
    pub max_iter_factor: usize,
    /// Dual feasibility tolerance relative to `‖y‖₂`, on unit-norm columns.
    pub tol: f64,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        Self { max_iter_factor: 5, tol: 1e-13 }
    }
}

/// `argmin_{z ≥ 0} ‖y − A z‖₂`.
pub fn nnls(a: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
    nnls_with(a, y, NnlsOptions::default())
}

pub fn nnls_with(a: ArrayView2<f64>, y: ArrayView1<f64>, opts: NnlsOptions) -> Result<Array1<f64>> {
    let (m, n) = a.dim();
    if n == 0 {
        return Err(argument("NNLS needs at least one column"));
    }
    if y.len() != m {
        return Err(LscmError::Dimension(format!("y has {} entries, A has {m} rows", y.len())));
    }

    // Solve on unit-norm columns; non-negativity is preserved by positive scaling.
    let scale: Vec<f64> = a.axis_iter(Axis(1)).map(|c| c.dot(&c).sqrt()).collect();
    let mut unit = a.to_owned();
    for (k, mut c) in unit.axis_iter_mut(Axis(1)).enumerate() {
        if scale[k] > 0.0 {
            c /= scale[k];
        }
    }
    let tol = opts.tol * y.dot(&y).sqrt().max(f64::MIN_POSITIVE);

    let mut z = Array1::<f64>::zeros(n);
    let mut passive = vec![false; n];
    // Columns that could not enter the passive set since the last change of z.
    let mut blocked = vec![false; n];
    let max_outer = opts.max_iter_factor * n.max(1) + 10;
    let max_inner = 3 * n + 10;

    for _outer in 0..max_outer {
        let r = &y - &unit.dot(&z);
        let w = unit.t().dot(&r);
        let pick = argmax(
            (0..n)
                .filter(|&k| !passive[k] && !blocked[k] && scale[k] > 0.0 && w[k] > tol)
                .map(|k| (k, w[k])),
        );
        let Some((j, _)) = pick else {
            return Ok(unscale(z, &scale));
        };
        passive[j] = true;

        let mut inner = 0;
        loop {
            inner += 1;
            if inner > max_inner {
                return Err(LscmError::Convergence {
                    solver: "nnls",
                    iterations: inner,
                    detail: format!("inner loop did not settle, passive set {:?}", indices(&passive)),
                });
            }
            let p = indices(&passive);
            let sub: Array2<f64> = unit.select(Axis(1), &p);
            let Some(s) = lstsq(sub.view(), y) else {
                // New column is dependent on the passive ones.
                passive[j] = false;
                blocked[j] = true;
                break;
            };
            if s.iter().all(|&v| v > 0.0) {
                for (q, &k) in p.iter().enumerate() {
                    z[k] = s[q];
                }
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let mut alpha = f64::INFINITY;
            for (q, &k) in p.iter().enumerate() {
                if s[q] <= 0.0 {
                    alpha = alpha.min(z[k] / (z[k] - s[q]));
                }
            }
            for (q, &k) in p.iter().enumerate() {
                z[k] += alpha * (s[q] - z[k]);
                if z[k] <= 0.0 || (s[q] <= 0.0 && z[k] <= f64::EPSILON * scale_hint(&z)) {
                    z[k] = 0.0;
                    passive[k] = false;
                }
            }
            if !passive[j] && alpha == 0.0 {
                // Entering column made no progress; keep it out until z moves.
                blocked[j] = true;
                break;
            }
            if p.iter().all(|&k| !passive[k]) {
                break;
            }
        }
    }
    Err(LscmError::Convergence {
        solver: "nnls",
        iterations: max_outer,
        detail: format!("outer loop cap reached, passive set {:?}", indices(&passive)),
    })
}

fn scale_hint(z: &Array1<f64>) -> f64 {
    z.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k).collect()
}

fn unscale(mut z: Array1<f64>, scale: &[f64]) -> Array1<f64> {
    for (k, v) in z.iter_mut().enumerate() {
        *v = if scale[k] > 0.0 { *v / scale[k] } else { 0.0 };
    }
    z
}
