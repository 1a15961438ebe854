use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::linalg::argmax;
use super::nnls::nnls;
use super::{SolverConfig, SolverResult, Termination};
use crate::coeff_matrix::CoefficientMatrix;
use crate::error::{LscmError, Result};

/// Residual decrease below this relative amount counts as no progress.
const PROGRESS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    /// `argmax aₙᵀr`, keep every selected index.
    Correlation,
    /// `argmax âₙᵀr + λₖ‖aₙ‖`, then prune to `supp(x)`.
    Weighted,
}

/// Non-negative orthogonal matching pursuit.
pub fn nnomp(cm: &CoefficientMatrix, y: ArrayView1<f64>, cfg: &SolverConfig) -> Result<SolverResult> {
    greedy(cm, y, cfg, Rule::Correlation)
}

/// Weighted non-negative orthogonal matching pursuit.
///
/// The selection score adds `λₖ‖aₙ‖₂` to the normalized correlation, with
/// `λₖ = ‖Âᵀrₖ‖₂ / Σₙ‖aₙ‖₂` recomputed from the current residual, so large
/// columns are favored without drowning out the correlation term. After each
/// NNLS solve the selected set shrinks to the support of the solution.
pub fn wnomp(cm: &CoefficientMatrix, y: ArrayView1<f64>, cfg: &SolverConfig) -> Result<SolverResult> {
    greedy(cm, y, cfg, Rule::Weighted)
}

fn greedy(cm: &CoefficientMatrix, y: ArrayView1<f64>, cfg: &SolverConfig, rule: Rule) -> Result<SolverResult> {
    cfg.validate()?;
    let a = cm.a();
    let (m, n) = a.dim();
    if y.len() != m {
        return Err(LscmError::Dimension(format!("y has {} entries, A has {m} rows", y.len())));
    }
    let norms = cm.col_norms();
    let selectable: Vec<usize> = (0..n).filter(|&k| norms[k] > 0.0).collect();
    let norm_sum: f64 = norms.sum();

    let aty = a.t().dot(&y);
    let stop_tol = cfg.stop_tol.unwrap_or_else(|| 1e-12 * aty.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())));
    let max_iter = cfg.iteration_cap();

    let mut x = Array1::<f64>::zeros(n);
    let mut r = y.to_owned();
    let mut selected: Vec<usize> = Vec::new();
    let mut residual_norms = vec![r.dot(&r).sqrt()];
    let mut iterations = 0;

    let termination = loop {
        if selected.len() >= cfg.k_max {
            break Termination::SparsityReached;
        }
        let corr = a.t().dot(&r);
        let max_corr = selectable.iter().map(|&k| corr[k]).fold(f64::NEG_INFINITY, f64::max);
        if !(max_corr > stop_tol) {
            break Termination::KktStop;
        }
        if iterations >= max_iter {
            break Termination::MaxIter;
        }

        let pick = match rule {
            Rule::Correlation => argmax(selectable.iter().map(|&k| (k, corr[k]))),
            Rule::Weighted => {
                let normalized = cm.a_hat().t().dot(&r);
                let lambda = normalized.dot(&normalized).sqrt() / norm_sum;
                argmax(selectable.iter().map(|&k| (k, normalized[k] + lambda * norms[k])))
            }
        };
        let Some((i, _)) = pick else {
            break Termination::KktStop;
        };
        if selected.contains(&i) {
            break Termination::Stall;
        }
        selected.push(i);

        let sub: Array2<f64> = a.select(Axis(1), &selected);
        let z = nnls(sub.view(), y)?;
        x.fill(0.0);
        for (q, &k) in selected.iter().enumerate() {
            x[k] = z[q];
        }
        if rule == Rule::Weighted {
            selected.retain(|&k| x[k] > 0.0);
        }
        r = &y - &a.dot(&x);
        iterations += 1;
        let prev = *residual_norms.last().unwrap();
        let now = r.dot(&r).sqrt();
        residual_norms.push(now);
        if !(now < prev * (1.0 - PROGRESS_TOL)) && now > 0.0 {
            break Termination::Stall;
        }
    };

    Ok(SolverResult::from_x(x, residual_norms, termination, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::AngularGrid;
    use crate::solvers::nnls::tests::random_instance;
    use ndarray::array;

    pub(crate) fn matrix(a: Array2<f64>) -> CoefficientMatrix {
        let n = a.ncols();
        let m = a.nrows();
        let grid = AngularGrid::new(vec![0.0], (0..n).map(|k| k as f64).collect()).unwrap();
        CoefficientMatrix::from_dense(a, grid, (0..n).collect(), (0..m).map(|b| format!("b{b}")).collect()).unwrap()
    }

    #[test]
    fn orthonormal_single_path() {
        let cm = matrix(Array2::eye(4));
        let y = array![0.0, 0.0, 3.0, 0.0];
        for solve in [nnomp, wnomp] {
            let res = solve(&cm, y.view(), &SolverConfig::new(1)).unwrap();
            assert_eq!(res.support, vec![2]);
            assert_eq!(res.x_hat[2], 3.0);
            assert_eq!(*res.residual_norms.last().unwrap(), 0.0);
            assert_eq!(res.termination, Termination::SparsityReached);
        }
    }

    #[test]
    fn zero_measurement_stops_immediately() {
        let cm = matrix(Array2::eye(3));
        for solve in [nnomp, wnomp] {
            let res = solve(&cm, Array1::zeros(3).view(), &SolverConfig::new(2)).unwrap();
            assert!(res.x_hat.iter().all(|&v| v == 0.0));
            assert_eq!(res.termination, Termination::KktStop);
            assert_eq!(res.iterations, 0);
        }
    }

    #[test]
    fn exact_fit_stops_on_kkt() {
        let cm = matrix(Array2::eye(4));
        let y = array![1.0, 0.0, 2.0, 0.0];
        let res = nnomp(&cm, y.view(), &SolverConfig::new(4)).unwrap();
        assert_eq!(res.support, vec![0, 2]);
        assert_eq!(res.termination, Termination::KktStop);
    }

    #[test]
    fn negative_correlation_everywhere_stops() {
        let cm = matrix(array![[1.0, 0.5], [0.0, 1.0]]);
        let y = array![-1.0, -1.0];
        let res = wnomp(&cm, y.view(), &SolverConfig::new(2)).unwrap();
        assert_eq!(res.termination, Termination::KktStop);
        assert!(res.support.is_empty());
    }

    /// Hand-scored two-column instance. Column 0 is parallel to `y` with
    /// norm 1; column 1 has norm 3 and cosine 0.4 with `y`.
    ///
    /// y = (1, 0), a₀ = (1, 0), a₁ = 3·(0.4, √0.84)
    ///
    /// NNOMP scores a₀ᵀy = 1 and a₁ᵀy = 1.2, so it picks column 1.
    /// WNOMP: Âᵀy = (1, 0.4), λ₀ = √1.16 / 4 ≈ 0.269258, scores
    /// 1 + λ₀ ≈ 1.269258 and 0.4 + 3λ₀ ≈ 1.207775, so it picks column 0.
    #[test]
    fn weighted_rule_prefers_parallel_column() {
        let a = array![[1.0, 1.2], [0.0, 3.0 * 0.84f64.sqrt()]];
        let cm = matrix(a);
        let y = array![1.0, 0.0];

        let plain = nnomp(&cm, y.view(), &SolverConfig::new(1)).unwrap();
        assert_eq!(plain.support, vec![1]);
        assert!((plain.x_hat[1] - 1.2 / 9.0).abs() < 1e-12);

        let weighted = wnomp(&cm, y.view(), &SolverConfig::new(1)).unwrap();
        assert_eq!(weighted.support, vec![0]);
        assert!((weighted.x_hat[0] - 1.0).abs() < 1e-12);
        assert!(*weighted.residual_norms.last().unwrap() < 1e-12);
    }

    #[test]
    fn equal_norm_columns_reduce_to_normalized_correlation() {
        let (a, _) = random_instance(3, 6, 10);
        let a = a.mapv(f64::abs);
        // Rescale every column to norm 2.
        let mut a = a;
        for mut c in a.axis_iter_mut(Axis(1)) {
            let nrm = c.dot(&c).sqrt();
            c *= 2.0 / nrm;
        }
        let cm = matrix(a.clone());
        let truth = array![0.0, 1.5, 0.0, 0.0, 0.7, 0.0, 0.0, 0.0, 0.0, 0.2];
        let y = a.dot(&truth);
        let res = wnomp(&cm, y.view(), &SolverConfig::new(1)).unwrap();
        let corr = cm.a_hat().t().dot(&y);
        let (best, _) = argmax(corr.iter().cloned().enumerate()).unwrap();
        assert_eq!(res.support, vec![best]);
    }
}
