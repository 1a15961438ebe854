//! Small dense helpers for the solvers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Relative threshold on `|R_kk|` below which a column is treated as
/// linearly dependent on the ones before it.
const RANK_TOL: f64 = 1e-12;

/// Least-squares solution of `min ‖b − A z‖₂` through Householder QR.
///
/// Returns `None` when `A` has more columns than rows or is numerically
/// rank deficient.
pub fn lstsq(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    let (m, n) = a.dim();
    if n == 0 {
        return Some(Array1::zeros(0));
    }
    if n > m {
        return None;
    }
    let mut r: Array2<f64> = a.to_owned();
    let mut qtb: Array1<f64> = b.to_owned();
    let scale = a.columns().into_iter().map(|c| c.dot(&c).sqrt()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for k in 0..n {
        let norm = (k..m).map(|i| r[[i, k]] * r[[i, k]]).sum::<f64>().sqrt();
        if norm <= RANK_TOL * scale {
            return None;
        }
        let alpha = if r[[k, k]] > 0.0 { -norm } else { norm };
        // v = x − αe₁, stored in place below the diagonal.
        let mut v: Vec<f64> = (k..m).map(|i| r[[i, k]]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * r[[i, j]]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    r[[i, j]] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..m).map(|i| v[i - k] * qtb[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                qtb[i] -= f * v[i - k];
            }
        }
        if r[[k, k]].abs() <= RANK_TOL * scale {
            return None;
        }
    }
    let mut z = Array1::zeros(n);
    for k in (0..n).rev() {
        let mut s = qtb[k];
        for j in k + 1..n {
            s -= r[[k, j]] * z[j];
        }
        z[k] = s / r[[k, k]];
    }
    Some(z)
}

/// Largest eigenvalue of `AᵀA` (squared spectral norm of `A`) by power iteration.
pub fn spectral_norm_sq(a: ArrayView2<f64>, iterations: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w = a.t().dot(&a.dot(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / norm;
        if (next - lambda).abs() <= 1e-12 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

/// Index of the largest finite value among `candidates`, lowest index on ties.
pub fn argmax<I: IntoIterator<Item = (usize, f64)>>(candidates: I) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in candidates {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((k, v)),
        }
    }
    best
}
