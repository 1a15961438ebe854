//! Acceptance criteria 1-8, run in order by a plain `main` (no libtest
//! harness) so the `PASS`/`FAIL` lines are never captured and criterion 5
//! has the machine to itself. Arguments filter criteria by name substring.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lscm::array_model::{make_dft_codebook, AngularGrid, ArrayConfig, ElementPattern, GainPattern, ParabolicPattern};
use lscm::channel_sim::{estimate_expected_rsrp, generate_ground_truth, RsrpSampler, ShadowingParams, ValueDistribution};
use lscm::coeff_matrix::{build_matrix, coherent_power, compute_coefficient, CoefficientMatrix};
use lscm::evaluation::{rotation_protocol, run_accuracy_sweep, ExperimentSpec, RotationSpec, Scenario, SweepVar};
use lscm::solvers::{nnls, nnomp, wnomp, SolverConfig, SolverKind};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn verdict(id: u32, ok: bool, detail: &str) {
    println!("criterion {id}: {} | {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed");
}

fn main() {
    let criteria: [(&str, fn()); 8] = [
        ("criterion_1_monte_carlo_expectation", criterion_1_monte_carlo_expectation),
        ("criterion_2_coherent_sum_identity", criterion_2_coherent_sum_identity),
        ("criterion_3_nnls_against_oracle", criterion_3_nnls_against_oracle),
        ("criterion_4_orthonormal_exactness", criterion_4_orthonormal_exactness),
        ("criterion_5_accuracy_trends", criterion_5_accuracy_trends),
        ("criterion_6_weighted_selection", criterion_6_weighted_selection),
        ("criterion_7_rotation_mae", criterion_7_rotation_mae),
        ("criterion_8_cli_determinism", criterion_8_cli_determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        if std::panic::catch_unwind(run).is_err() {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: {} failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
    println!("acceptance: ok");
}

fn labels(m: usize) -> Vec<String> {
    (0..m).map(|k| format!("b{k}")).collect()
}

fn criterion_1_monte_carlo_expectation() {
    let start = Instant::now();
    let grid = AngularGrid::uniform((-18.0, 18.0), 4.0, (-45.0, 45.0), 10.0).unwrap();
    assert_eq!(grid.len(), 100);
    let pattern = ElementPattern::Parabolic(ParabolicPattern::default()).sample(&grid).unwrap();
    // (σ, shadowing log-std, seed)
    let cases = [(0.0, 0.0, 1), (0.3, 0.0, 2), (0.0, 0.5, 3), (0.3, 0.5, 4), (0.3, 0.5, 5)];
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for &(sigma, s, seed) in &cases {
        let cfg = ArrayConfig::half_wavelength(4, 2, sigma).unwrap();
        let dirs: Vec<(f64, f64)> = [-10.0, 10.0]
            .iter()
            .flat_map(|&t| [-45.0, -15.0, 15.0, 45.0].map(move |a| (t, a)))
            .collect();
        let codebook = make_dft_codebook(&cfg, &dirs).unwrap();
        let a = build_matrix(&cfg, &grid, &pattern, &codebook).unwrap();
        let truth = generate_ground_truth(grid.len(), 3, seed, ValueDistribution::default()).unwrap();
        let expected = a.apply(truth.x().view()).unwrap();
        let sampler =
            RsrpSampler::new(&cfg, &grid, &pattern, &codebook, &truth, ShadowingParams::new(s).unwrap()).unwrap();
        let set = estimate_expected_rsrp(&sampler, seed, 100_000).unwrap();
        let se = set.std_error();
        for m in 0..codebook.len() {
            let dev = (set.mean[m] - expected[m]).abs();
            let z = dev / se[m];
            worst = worst.max(z);
            if !(z <= 3.0) {
                failures.push(format!("σ={sigma} s={s} beam {m}: {z:.2} SE"));
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed <= Duration::from_secs(60);
    verdict(1, ok, &format!("worst |mean-Ax| = {worst:.2} SE over 5x8 beams, {elapsed:.1?} {failures:?}"));
}

/// `A` from the literal double sum over antenna pairs.
fn literal_coefficient(cfg: &ArrayConfig, gain: f64, tilt: f64, az: f64, phases: &Array2<f64>) -> f64 {
    let (th, ph) = (tilt.to_radians(), az.to_radians());
    let psi = |x: usize, y: usize| {
        2.0 * PI * cfg.d_x * x as f64 / cfg.wavelength * th.cos() * ph.sin()
            + 2.0 * PI * cfg.d_y * y as f64 / cfg.wavelength * th.sin()
            - phases[[x, y]]
    };
    let mut double = 0.0;
    for x in 0..cfg.n_x {
        for y in 0..cfg.n_y {
            for x2 in 0..cfg.n_x {
                for y2 in 0..cfg.n_y {
                    double += (psi(x, y) - psi(x2, y2)).cos();
                }
            }
        }
    }
    let nt = (cfg.n_x * cfg.n_y) as f64;
    let decay = (-cfg.sigma * cfg.sigma).exp();
    cfg.power * gain * gain * (nt * (1.0 - decay) + decay * double)
}

fn criterion_2_coherent_sum_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let cfg = ArrayConfig::new(
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(0.2..0.8),
            rng.random_range(0.2..0.8),
            1.0,
            rng.random_range(0.0..1.2),
            rng.random_range(0.5..2.0),
        )
        .unwrap();
        let tilt = rng.random_range(-60.0..60.0);
        let az = rng.random_range(-80.0..80.0);
        let gain = rng.random_range(0.1..3.0);
        let phases = Array2::from_shape_fn((cfg.n_x, cfg.n_y), |_| rng.random_range(-PI..PI));
        let codebook = lscm::array_model::BeamCodebook::new(vec![phases.clone()], None).unwrap();
        let grid = AngularGrid::new(vec![tilt], vec![az]).unwrap();
        let pattern = GainPattern::uniform(&grid, gain).unwrap();
        let fast = compute_coefficient(&cfg, &grid, &pattern, &codebook, 0, 0, 0).unwrap();
        let literal = literal_coefficient(&cfg, gain, tilt, az, &phases);
        worst = worst.max((fast - literal).abs() / literal.abs());

        // Coherent term alone, against the same literal sum with σ = 0 and P = g = 1.
        let mut plain = cfg.clone();
        plain.sigma = 0.0;
        plain.power = 1.0;
        let c = coherent_power(&cfg, tilt, az, &phases);
        let lit = literal_coefficient(&plain, 1.0, tilt, az, &phases);
        worst = worst.max((c - lit).abs() / lit.abs().max(1e-300));
    }
    verdict(2, worst <= 1e-9, &format!("max relative error {worst:.2e} over 100 arrays"));
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
fn top_eigenvalue(s: &Array2<f64>) -> f64 {
    let mut v = Array1::from_elem(s.ncols(), 1.0);
    let mut l = 0.0;
    for _ in 0..2000 {
        let w = s.dot(&v);
        l = w.dot(&w).sqrt();
        if l == 0.0 {
            return 0.0;
        }
        v = w / l;
    }
    l
}

/// `σ_max / σ_min` of `a` from the extreme eigenvalues of `AᵀA`.
fn condition_number(a: &Array2<f64>) -> f64 {
    let ata = a.t().dot(a);
    let top = top_eigenvalue(&ata);
    let shifted = Array2::from_diag_elem(ata.ncols(), top) - &ata;
    let bottom = top - top_eigenvalue(&shifted);
    (top / bottom.max(0.0)).sqrt()
}

/// Accelerated projected gradient with adaptive restart on `½‖Ax − y‖²`
/// over `x ≥ 0`, run until the projected-gradient step is below 1e-10 of
/// the solution scale.
fn projected_gradient(a: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let ata = a.t().dot(a);
    let aty = a.t().dot(y);
    let l = top_eigenvalue(&ata);
    let step = 1.0 / (1.01 * l);
    let project = |z: Array1<f64>| z.mapv(|v| v.max(0.0));
    let mut x: Array1<f64> = Array1::zeros(ata.ncols());
    let mut z = x.clone();
    let mut t = 1.0_f64;
    for _ in 0..50_000_000 {
        let next = project(&z - &(step * &(ata.dot(&z) - &aty)));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        if (&z - &next).dot(&(&next - &x)) > 0.0 {
            // momentum points uphill: restart
            t = 1.0;
            z = x.clone();
            continue;
        }
        z = &next + &((t - 1.0) / t_next * (&next - &x));
        x = next;
        t = t_next;
        let pg = &x - &project(&x - &(ata.dot(&x) - &aty));
        let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if pg.iter().all(|v| v.abs() <= 1e-14 * scale) {
            break;
        }
    }
    x
}

fn criterion_3_nnls_against_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_sol, mut worst_kkt): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let m = rng.random_range(2..=10);
        let n = rng.random_range(1..=6.min(m));
        // Near-singular draws are skipped: there the oracle's own error,
        // about cond² times its tolerance, exceeds the comparison bound.
        let a = loop {
            let a = Array2::from_shape_fn((m, n), |_| rng.sample::<f64, _>(StandardNormal));
            if condition_number(&a) <= 100.0 {
                break a;
            }
        };
        let y = Array1::from_shape_fn(m, |_| rng.sample::<f64, _>(StandardNormal));
        let x = nnls(a.view(), y.view()).unwrap();
        let oracle = projected_gradient(&a, &y);
        let diff = &x - &oracle;
        worst_sol = worst_sol.max(diff.dot(&diff).sqrt());
        let grad = a.t().dot(&(a.dot(&x) - &y));
        for k in 0..n {
            let kkt = [(-x[k]).max(0.0), (-grad[k]).max(0.0), (x[k] * grad[k]).abs()];
            worst_kkt = worst_kkt.max(kkt.iter().cloned().fold(0.0, f64::max));
        }
    }
    verdict(
        3,
        worst_sol <= 1e-7 && worst_kkt <= 1e-8,
        &format!("max ‖x - oracle‖ {worst_sol:.2e}, max KKT violation {worst_kkt:.2e} over 50 instances"),
    );
}

fn criterion_4_orthonormal_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut misses = 0;
    for case in 0..100 {
        // Non-negative orthonormal columns have disjoint supports: split the
        // rows into N random blocks and give each column a positive unit
        // vector on its block.
        let n = rng.random_range(2..=12);
        let m = rng.random_range(n..=3 * n);
        let mut owner: Vec<usize> = (0..m).map(|r| if r < n { r } else { rng.random_range(0..n) }).collect();
        for r in (1..m).rev() {
            owner.swap(r, rng.random_range(0..=r));
        }
        let mut a = Array2::<f64>::zeros((m, n));
        for (r, &c) in owner.iter().enumerate() {
            a[[r, c]] = rng.random_range(0.1..1.0);
        }
        for mut col in a.columns_mut() {
            let norm: f64 = col.dot(&col).sqrt();
            col /= norm;
        }
        let k = rng.random_range(1..=n);
        let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();
        support.sort_unstable();
        let mut x = Array1::zeros(n);
        for &s in &support {
            x[s] = rng.random_range(0.1..10.0);
        }
        let y = a.dot(&x);
        let grid = AngularGrid::new(vec![0.0], (0..n).map(|j| j as f64).collect()).unwrap();
        let cm = CoefficientMatrix::from_dense(a, grid, (0..n).collect(), labels(m)).unwrap();
        let cfg = SolverConfig::new(k);
        for res in [nnomp(&cm, y.view(), &cfg).unwrap(), wnomp(&cm, y.view(), &cfg).unwrap()] {
            let r = cm.apply(res.x_hat.view()).unwrap() - &y;
            let err = (&res.x_hat - &x).mapv(f64::abs).fold(0.0_f64, |m, &v| m.max(v));
            worst = worst.max(r.dot(&r).sqrt());
            if res.support != support || err > 1e-9 {
                misses += 1;
                println!("case {case}: support {:?} vs {:?}, coefficient error {err:.2e}", res.support, support);
            }
        }
    }
    verdict(4, misses == 0 && worst < 1e-10, &format!("{misses} misses, max residual {worst:.2e} over 100 cases"));
}

fn is_monotone(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] >= w[0] } else { w[1] <= w[0] })
}

fn criterion_5_accuracy_trends() {
    let start = Instant::now();
    let scenario = Scenario::synthetic_default().unwrap();
    let sweeps = [
        (SweepVar::N, vec![100, 300, 500, 700], false),
        (SweepVar::M, vec![8, 16, 24, 32], true),
        (SweepVar::K, vec![1, 2, 4, 8], false),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    let mut reference = BTreeMap::new();
    for (var, values, increasing) in sweeps {
        let mut spec = ExperimentSpec::new(var, values.clone());
        spec.trials = 500;
        spec.seed = 5;
        let report = run_accuracy_sweep(&spec, &scenario.matrix).unwrap();
        for kind in SolverKind::ALL {
            let curve: Vec<f64> = values.iter().map(|&v| report.accuracy_of(v, kind).unwrap()).collect();
            let good = is_monotone(&curve, increasing);
            ok &= good;
            let shown: Vec<String> = curve.iter().map(|a| format!("{a:.3}")).collect();
            lines.push(format!("{var}-sweep {kind}: {} {}", shown.join(" "), if good { "ok" } else { "NOT MONOTONE" }));
        }
        if var == SweepVar::M {
            for kind in SolverKind::ALL {
                reference.insert(kind, report.accuracy_of(32, kind).unwrap());
            }
        }
    }
    let (w, l, n) = (reference[&SolverKind::Wnomp], reference[&SolverKind::Lasso], reference[&SolverKind::Nnomp]);
    let ordered = w > l && l > n;
    let elapsed = start.elapsed();
    for line in &lines {
        println!("  {line}");
    }
    verdict(
        5,
        ok && ordered && elapsed <= Duration::from_secs(600),
        &format!("N=400 M=32 K=5: wnomp {w:.3} lasso {l:.3} nnomp {n:.3}, 500 trials/point, {elapsed:.1?}"),
    );
}

fn criterion_6_weighted_selection() {
    // a0 = (1, 0), a1 = 3·(0.4, √0.84), y = a0.
    //   plain correlation: a0ᵀy = 1, a1ᵀy = 1.2 -> picks column 1.
    //   weighted: Âᵀy = (1, 0.4), λ = √1.16 / 4 = 0.269258;
    //   scores 1 + λ·1 = 1.269258 and 0.4 + λ·3 = 1.207775 -> picks column 0.
    let a = Array2::from_shape_vec((2, 2), vec![1.0, 1.2, 0.0, 3.0 * 0.84_f64.sqrt()]).unwrap();
    let grid = AngularGrid::new(vec![0.0], vec![0.0, 5.0]).unwrap();
    let cm = CoefficientMatrix::from_dense(a, grid, vec![0, 1], labels(2)).unwrap();
    let y = Array1::from(vec![1.0, 0.0]);
    let cfg = SolverConfig::new(1);
    let plain = nnomp(&cm, y.view(), &cfg).unwrap();
    let weighted = wnomp(&cm, y.view(), &cfg).unwrap();
    let ok = plain.support == vec![1]
        && weighted.support == vec![0]
        && (weighted.x_hat[0] - 1.0).abs() < 1e-12
        && weighted.residual_norms.last().unwrap().abs() < 1e-12;
    verdict(
        6,
        ok,
        &format!("nnomp picks {:?}, wnomp picks {:?} with x = {:?}", plain.support, weighted.support, weighted.x_hat.to_vec()),
    );
}

fn criterion_7_rotation_mae() {
    let scenario = Scenario::synthetic_default().unwrap();
    let mut report = Vec::new();
    let mut ok = true;
    let mut exact_total = 0;
    for az in [10.0, 0.0] {
        let mut spec = RotationSpec::new(az, 0.0);
        spec.seed = 7;
        let outcomes = rotation_protocol(&scenario, &spec).unwrap();
        for kind in SolverKind::ALL {
            // Greedy estimates are NNLS refits, exact on the true support; the
            // LASSO keeps its shrinkage, so only the 0.5 dB bound applies to it.
            let bound = if az == 0.0 && kind != SolverKind::Lasso { 1e-9 } else { 0.5 };
            let exact: Vec<f64> =
                outcomes.iter().filter(|o| o.solver == kind && o.exact_support).map(|o| o.mae_db).collect();
            let worst = exact.iter().cloned().fold(0.0, f64::max);
            exact_total += exact.len();
            ok &= worst <= bound;
            report.push(format!("Δaz={az}° {kind}: {}/50 exact, max {worst:.1e} dB", exact.len()));
        }
    }
    ok &= exact_total > 0;
    verdict(7, ok, &report.join("; "));
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_lscm")).args(args).output().unwrap();
    assert!(out.status.success(), "lscm {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn criterion_8_cli_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        "seed = 11\n\n[simulation]\nsamples = 300\n\n[sweep]\nvalues = [50, 100]\ntrials = 6\n\n[rotation]\ngrids = 4\n",
    )
    .unwrap();
    let config = config.to_str().unwrap();
    let root = tmp.path();
    let commands: [&[&str]; 5] = [
        &["build-matrix"],
        &["simulate"],
        &["solve", "--measurements", "MEAS"],
        &["sweep"],
        &["rotate-eval"],
    ];
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for run in ["a", "b"] {
        for cmd in commands {
            let out = root.join(run).join(cmd[0]);
            let meas = root.join("a/simulate/measurements.csv");
            let mut args = vec!["--config", config, "--out", out.to_str().unwrap()];
            args.extend(cmd.iter().map(|&s| if s == "MEAS" { meas.to_str().unwrap() } else { s }));
            run_cli(&args);
        }
    }
    for cmd in commands {
        let a = files(&root.join("a").join(cmd[0]));
        let b = files(&root.join("b").join(cmd[0]));
        if a.keys().ne(b.keys()) {
            mismatches.push(format!("{}: file sets differ", cmd[0]));
        }
        for (name, bytes) in &a {
            checked += 1;
            if b.get(name) != Some(bytes) {
                mismatches.push(format!("{}/{name}", cmd[0]));
            }
        }
    }
    verdict(
        8,
        mismatches.is_empty() && checked > 5,
        &format!("{checked} artifacts compared across 5 commands, mismatches {mismatches:?}"),
    );
}
