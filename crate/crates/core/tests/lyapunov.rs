use frontier_core::forcing::QuasiPeriodicSignal;
use frontier_core::kernels::{DispersalKernel, KernelSpec};
use frontier_core::lyapunov::{
    find_lstar, kernel_principal_eigenvalue, lyapunov_exponent, lyapunov_exponent_from, DEFAULT_CELLS,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dense_rho(kernel: &KernelSpec<f64>, l: f64, cells: usize) -> f64 {
    let dx = 2.0 * l / cells as f64;
    let x = |i: usize| -l + dx * (i + 1) as f64;
    DMatrix::from_fn(cells - 1, cells - 1, |i, j| kernel.density(x(i) - x(j)) * dx).symmetric_eigen().eigenvalues.max()
}

fn gauss() -> KernelSpec<f64> {
    KernelSpec::gaussian(1.0).unwrap()
}

#[test]
fn power_iteration_matches_dense_eigensolve() {
    let (rho, iterations) = kernel_principal_eigenvalue(&gauss(), 50.0, 0.5).unwrap();
    assert!(rho > 0.99 && rho < 1.0);
    assert!((rho - dense_rho(&gauss(), 50.0, 200)).abs() < 1e-7, "{iterations} iterations");

    let bump = KernelSpec::compact_bump(1.0).unwrap();
    let (small, _) = kernel_principal_eigenvalue(&bump, 0.01, 1e-4).unwrap();
    let oracle = dense_rho(&bump, 0.01, 200);
    assert!((small - oracle).abs() < 1e-9);
    assert!((small - 2.0 * 0.01 * bump.density(0.0)).abs() < 2e-3);
}

#[test]
fn exponent_matches_separable_oracle() {
    let rho = dense_rho(&gauss(), 20.0, DEFAULT_CELLS);
    let constant = lyapunov_exponent(&QuasiPeriodicSignal::constant(0.5), 1.0, &gauss(), 20.0, 200.0, 1.0).unwrap();
    assert!((constant.lambda - (0.5 - (1.0 - rho))).abs() < 5e-3);

    let a = QuasiPeriodicSignal::new(0.5, &[(0.3, 1.0, 0.0), (0.2, 2f64.sqrt(), 0.0)]).unwrap();
    let ap = lyapunov_exponent(&a, 1.0, &gauss(), 20.0, 400.0, 1.0).unwrap();
    assert!((ap.lambda - (0.5 - (1.0 - rho))).abs() < 5e-3, "{}", ap.lambda);
    assert_eq!(ap.window_slopes.len(), 5);
    let mean: f64 = ap.window_slopes.iter().sum::<f64>() / 5.0;
    assert!((mean - ap.lambda).abs() < 1e-12);
}

#[test]
fn lstar_examples() {
    let half = QuasiPeriodicSignal::constant(0.5);
    let l = find_lstar(&half, 1.0, &gauss(), 100.0).unwrap().unwrap();
    assert!((dense_rho(&gauss(), l, DEFAULT_CELLS) - 0.5).abs() < 1e-2);
    assert!(find_lstar(&QuasiPeriodicSignal::constant(2.0), 1.0, &gauss(), 100.0).unwrap().is_some());
    assert_eq!(find_lstar(&QuasiPeriodicSignal::constant(-0.1), 1.0, &gauss(), 100.0).unwrap(), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn scaling_the_initial_profile_changes_nothing(seed in prop::collection::vec(0.1..1.0f64, DEFAULT_CELLS - 1)) {
        let a = QuasiPeriodicSignal::new(0.3, &[(0.2, 1.0, 0.0)]).unwrap();
        let scaled: Vec<f64> = seed.iter().map(|v| v * 1e3).collect();
        let x = lyapunov_exponent_from(&a, 1.0, &gauss(), 8.0, 100.0, 1.0, DEFAULT_CELLS, Some(&seed)).unwrap();
        let y = lyapunov_exponent_from(&a, 1.0, &gauss(), 8.0, 100.0, 1.0, DEFAULT_CELLS, Some(&scaled)).unwrap();
        prop_assert!((x.lambda - y.lambda).abs() < 1e-8);
    }

    #[test]
    fn exponent_grows_with_length_and_stays_below_mean(l0 in 1.0..5.0f64, mean in -0.5..1.0f64) {
        let a = QuasiPeriodicSignal::new(mean, &[(0.2, 0.9, 0.0)]).unwrap();
        // finite-horizon averaging error of the oscillating mode
        let slack = 2.0 * 0.2 / 0.9 / 100.0;
        let mut previous = f64::NEG_INFINITY;
        for l in [l0, 2.0 * l0, 4.0 * l0, 8.0 * l0] {
            let est = lyapunov_exponent(&a, 1.0, &gauss(), l, 100.0, 1.0).unwrap();
            prop_assert!(est.lambda >= previous);
            prop_assert!(est.lambda <= mean + slack, "{} vs {}", est.lambda, mean);
            previous = est.lambda;
        }
    }
}
