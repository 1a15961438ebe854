use lscm::array_model::AngularGrid;
use lscm::coeff_matrix::CoefficientMatrix;
use lscm::evaluation::{run_accuracy_sweep, support_accuracy, ExperimentSpec, Scenario, SweepVar};
use lscm::solvers::{SolverConfig, SolverKind};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn dense(a: Array2<f64>) -> CoefficientMatrix {
    let (m, n) = a.dim();
    let grid = AngularGrid::new(vec![0.0], (0..n).map(|k| k as f64).collect()).unwrap();
    CoefficientMatrix::from_dense(a, grid, (0..n).collect(), (0..m).map(|b| format!("b{b}")).collect()).unwrap()
}

#[test]
fn single_path_on_separated_columns() {
    // Each column peaks on its own row with a weak common floor, and norms
    // vary 1..4 so the unweighted rule is still exercised.
    let n = 24;
    let a = Array2::from_shape_fn((n, n), |(r, c)| {
        let scale = 1.0 + 3.0 * (c % 4) as f64 / 3.0;
        scale * if r == c { 1.0 } else { 0.02 }
    });
    let mut spec = ExperimentSpec::new(SweepVar::K, vec![1]);
    spec.n = n;
    spec.m = n;
    spec.trials = 60;
    let report = run_accuracy_sweep(&spec, &dense(a)).unwrap();
    for kind in SolverKind::ALL {
        let acc = report.accuracy_of(1, kind).unwrap();
        assert!(acc >= 0.99, "{kind}: {acc}");
    }
}

#[test]
fn sweeps_are_reproducible() {
    let sc = Scenario::synthetic_default().unwrap();
    let mut spec = ExperimentSpec::new(SweepVar::N, vec![60, 120]);
    spec.trials = 12;
    spec.seed = 21;
    let a = run_accuracy_sweep(&spec, &sc.matrix).unwrap();
    let b = run_accuracy_sweep(&spec, &sc.matrix).unwrap();
    assert_eq!(a, b);
    spec.seed = 22;
    let c = run_accuracy_sweep(&spec, &sc.matrix).unwrap();
    assert_ne!(a.accuracy, c.accuracy);
}

#[test]
fn sweep_rejects_oversized_points() {
    let sc = Scenario::synthetic_default().unwrap();
    let spec = ExperimentSpec::new(SweepVar::N, vec![10_000]);
    assert!(run_accuracy_sweep(&spec, &sc.matrix).is_err());
    let spec = ExperimentSpec::new(SweepVar::M, vec![64]);
    assert!(run_accuracy_sweep(&spec, &sc.matrix).is_err());
}

#[test]
fn accuracy_examples() {
    assert_eq!(support_accuracy(&[1, 2, 9, 4, 7], &[1, 2, 3, 4, 5]).unwrap(), 0.6);
    assert!(support_accuracy(&[1], &[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_residuals_never_grow(
        entries in prop::collection::vec(0.0f64..1.0, 8 * 12),
        weights in prop::collection::vec(0.0f64..2.0, 12),
        k in 1usize..6,
    ) {
        let a = Array2::from_shape_vec((8, 12), entries).unwrap();
        let cm = dense(a.clone());
        let y = a.dot(&Array1::from(weights));
        for kind in [SolverKind::Nnomp, SolverKind::Wnomp] {
            let res = kind.solve(&cm, y.view(), &SolverConfig::new(k)).unwrap();
            prop_assert!(res.support.len() <= k);
            prop_assert!(res.x_hat.iter().all(|&v| v >= 0.0));
            for w in res.residual_norms.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }
}
