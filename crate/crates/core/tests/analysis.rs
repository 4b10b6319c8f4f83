use frontier_core::analysis::{
    acceleration_check, classify_outcome, compute_cstar, compute_cstar_with_dispersal, estimate_speed,
    flattening_metric, reference_solution, truncation_ladder, AnalysisError, Front, Outcome,
};
use frontier_core::forcing::{GrowthLaw, QuasiPeriodicSignal};
use frontier_core::kernels::{truncate, DispersalKernel, KernelSpec};
use frontier_core::quadrature::integrate;
use frontier_core::solver::{SeriesRow, Snapshot};
use frontier_core::ExtReal;
use proptest::prelude::*;

fn series(n: usize, dt: f64, h: impl Fn(f64) -> f64, umax: impl Fn(f64) -> f64) -> Vec<SeriesRow<f64>> {
    (0..=n)
        .map(|i| {
            let t = i as f64 * dt;
            SeriesRow { t, g: -h(t), h: h(t), umax: umax(t), mass: 1.0 }
        })
        .collect()
}

#[test]
fn speed_of_a_sublinear_front() {
    let s = series(10_000, 1.0, |t| t + t.sqrt(), |_| 1.0);
    for front in [Front::Right, Front::Left] {
        let est = estimate_speed(&s, front, 0.5).unwrap();
        assert!(est.slope.c_hat > 1.0 && est.slope.c_hat < 1.01, "{}", est.slope.c_hat);
        assert_eq!(est.slope.window, (5000.0, 10_000.0));
        assert!((est.endpoint.c_hat - 1.01).abs() < 1e-12);
    }
}

#[test]
fn speed_of_a_linear_front_is_exact() {
    let s = series(400, 0.5, |t| 3.0 + 0.75 * t, |_| 1.0);
    let est = estimate_speed(&s, Front::Right, 0.25).unwrap();
    assert!((est.slope.c_hat - 0.75).abs() < 1e-12);
    assert!(est.slope.stderr < 1e-10);
}

#[test]
fn speed_needs_data() {
    let s = series(30, 1.0, |t| t, |_| 1.0);
    assert!(matches!(estimate_speed(&s, Front::Right, 0.5), Err(AnalysisError::InsufficientData(_))));
    assert!(matches!(estimate_speed(&s, Front::Right, 0.7), Err(AnalysisError::InvalidArgument(_))));
    assert!(matches!(estimate_speed(&s[..0], Front::Right, 0.5), Err(AnalysisError::InsufficientData(_))));
}

#[test]
fn classification() {
    let spreading = series(200, 1.0, |t| 1.0 + 0.5 * t, |_| 1.0);
    assert_eq!(classify_outcome(&spreading, 50.0, 1e-3), Outcome::Spreading);
    let vanishing = series(200, 1.0, |t| 2.0 - (-t).exp(), |t| (-0.1 * t).exp());
    assert_eq!(classify_outcome(&vanishing, 50.0, 1e-3), Outcome::Vanishing);
    let stalled = series(200, 1.0, |t| 2.0 - (-t).exp(), |_| 0.5);
    assert_eq!(classify_outcome(&stalled, 50.0, 1e-3), Outcome::Undetermined);
    assert_eq!(classify_outcome(&spreading[..1], 50.0, 1e-3), Outcome::Undetermined);
}

#[test]
fn acceleration_flags_superlinear_fronts() {
    let (flag, ratio) = acceleration_check(&series(400, 1.0, |t| 1.0 + t, |_| 1.0)).unwrap();
    assert!(!flag && (ratio - 1.0).abs() < 0.02, "{ratio}");
    let (flag, ratio) = acceleration_check(&series(400, 1.0, |t| 1.0 + t * t, |_| 1.0)).unwrap();
    assert!(flag && ratio > 3.5, "{ratio}");
}

#[test]
fn cstar_closed_form_for_logistic_laplace() {
    let target =
        compute_cstar(2.0, &GrowthLaw::<f64>::logistic(1.0, 1.0).unwrap(), &KernelSpec::laplace(1.0).unwrap()).unwrap();
    assert!((target.c_star.finite().unwrap() - 1.0).abs() < 1e-6);
    assert!(target.quadrature_residual.unwrap() < 1e-5);

    let fat =
        compute_cstar(1.0, &GrowthLaw::<f64>::logistic(1.0, 1.0).unwrap(), &KernelSpec::power_law(2.0, 1.0).unwrap())
            .unwrap();
    assert_eq!(fat.c_star, ExtReal::Infinite);

    let dying = GrowthLaw::new(QuasiPeriodicSignal::constant(-0.2), QuasiPeriodicSignal::constant(1.0)).unwrap();
    let zero = compute_cstar(1.0, &dying, &KernelSpec::gaussian(1.0).unwrap()).unwrap();
    assert_eq!(zero.c_star, ExtReal::Finite(0.0));
}

#[test]
fn ladder_approaches_the_untruncated_speed() {
    let f = GrowthLaw::<f64>::logistic(1.0, 1.0).unwrap();
    let base = KernelSpec::laplace(1.0).unwrap();
    let full = compute_cstar(1.0, &f, &base).unwrap().c_star.finite().unwrap();
    let ladder = truncation_ladder(1.0, 1.0, &f, &base, &[5.0, 10.0, 20.0, 40.0], 1.0).unwrap();
    let speeds: Vec<f64> = ladder.iter().map(|t| t.c_star.finite().unwrap()).collect();
    assert!(speeds.windows(2).all(|w| w[1] >= w[0]), "{speeds:?}");
    assert!((speeds[3] - full).abs() < 1e-4);

    // a cutoff barely above the ramp width leaves too little mass to persist
    let weak = GrowthLaw::<f64>::logistic(0.2, 1.0).unwrap();
    let stub = truncate(&base, 1.1, 1.0).unwrap();
    assert!(stub.mass() < 0.8);
    let c = compute_cstar_with_dispersal(1.0, 1.0, &weak, &stub).unwrap().c_star.finite().unwrap();
    assert!(c.abs() < 1e-12);
    assert!(truncation_ladder(1.0, 1.0, &f, &base, &[10.0, 5.0], 1.0).is_err());
}

#[test]
fn flattening_at_time_zero_uses_the_origin() {
    let f = GrowthLaw::<f64>::logistic(1.0, 1.0).unwrap();
    let target = compute_cstar(1.0, &f, &KernelSpec::laplace(1.0).unwrap()).unwrap();
    let ap = reference_solution(&f, 10.0).unwrap();
    let x: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
    let u: Vec<f64> = x.iter().map(|x| (0.5 * (1.0 - x * x)).max(0.0)).collect();
    let snap = Snapshot { t: 0.0, x: x.clone(), u: u.clone() };
    let later = Snapshot { t: 4.0, x, u };
    let dev = flattening_metric(&[snap, later], &target, 0.5, &ap).unwrap();
    assert!((dev[0].1 - 0.5).abs() < 1e-9);
    // at t = 4 the window |x| ≤ 2 covers the whole profile, where u ≥ 0 is furthest from 1
    assert!((dev[1].1 - 1.0).abs() < 1e-9);
    assert!(flattening_metric(&[], &target, 1.5, &ap).is_err());
}

fn thin_kernel() -> impl Strategy<Value = KernelSpec<f64>> {
    prop_oneof![
        (0.3..3.0f64).prop_map(|s| KernelSpec::gaussian(s).unwrap()),
        (0.3..3.0f64).prop_map(|b| KernelSpec::laplace(b).unwrap()),
        (0.3..3.0f64).prop_map(|r| KernelSpec::compact_bump(r).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cstar_matches_quadrature(k in thin_kernel(), mu in 0.0..5.0f64, a in 0.1..2.0f64, b in 0.5..2.0f64) {
        let target = compute_cstar(mu, &GrowthLaw::<f64>::logistic(a, b).unwrap(), &k).unwrap();
        let reach = k.reach(1e-16);
        let m1 = integrate(|x| x * k.density(x), 0.0, reach, 1e-12);
        let expected = mu * (a / b) * m1;
        let got = target.c_star.finite().unwrap();
        prop_assert!((got - expected).abs() <= 1e-5 * expected.max(1e-12), "{} vs {}", got, expected);
    }
}
