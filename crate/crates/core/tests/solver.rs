use frontier_core::experiment::parse_config;
use frontier_core::forcing::{GrowthLaw, QuasiPeriodicSignal};
use frontier_core::kernels::KernelSpec;
use frontier_core::solver::{run, ConvolutionMethod, InitialShape, RunConfig, SimState, Solver, Termination};
use proptest::prelude::*;

fn laplace_config(dx: f64) -> RunConfig<f64> {
    RunConfig {
        d: 1.0,
        mu: 1.0,
        h0: 1.0,
        kernel: KernelSpec::laplace(1.0).unwrap().into(),
        growth: GrowthLaw::logistic(1.0, 1.0).unwrap(),
        envelope: None,
        initial: InitialShape::Parabolic { amplitude: 0.5 },
        dx,
        window_halfwidth: 60.0,
        dt: 0.01,
        horizon: 1.0,
        record_every: 0.1,
        snapshot_every: 0.5,
        convolution: ConvolutionMethod::Fft,
    }
}

fn unit_block(s: &Solver<f64>, g: f64, h: f64) -> SimState<f64> {
    SimState { t: 0.0, g, h, u: s.grid().nodes().map(|x| if x > g && x < h { 1.0 } else { 0.0 }).collect() }
}

fn node_near(s: &Solver<f64>, x: f64) -> usize {
    ((x + s.grid().halfwidth()) / s.grid().dx()).round() as usize
}

#[test]
fn rhs_of_a_unit_block() {
    // Q[1](0) = ∫_{-1}^{1} e^{-|y|}/2 dy = 1 - e^{-1}; logistic term vanishes at u = 1
    let mut s = Solver::new(laplace_config(1e-3)).unwrap();
    let st = unit_block(&s, -1.0, 1.0);
    let rhs = s.nonlocal_rhs(&st).unwrap();
    let centre = node_near(&s, 0.0);
    assert!((rhs[centre] + (-1.0f64).exp()).abs() < 1e-3, "{}", rhs[centre]);

    let mut wide = Solver::new(laplace_config(0.1)).unwrap();
    let st = unit_block(&wide, -20.0, 20.0);
    let rhs = wide.nonlocal_rhs(&st).unwrap();
    assert!(rhs[node_near(&wide, 0.0)].abs() < 1e-8);
}

#[test]
fn flux_of_a_unit_block() {
    // h' = ∫_{-1}^{1} K̄(1 - x) dx = (1 - e^{-2}) / 2
    // the trapezoid ramps u to 0 over the last partial cell, losing ≈ dx K̄(0)/2
    let exact = 0.5 * (1.0 - (-2.0f64).exp());
    let flux = |dx: f64| {
        let s = Solver::new(laplace_config(dx)).unwrap();
        s.boundary_flux(&unit_block(&s, -1.0, 1.0))
    };
    let (gd, hd) = flux(1e-3);
    assert!((hd - exact).abs() < 5e-4, "{hd}");
    assert!((gd + hd).abs() < 1e-12);
    let (_, hd_fine) = flux(2.5e-4);
    let ratio = (hd - exact) / (hd_fine - exact);
    assert!((ratio - 4.0).abs() < 0.5, "first-order ratio {ratio}");

    let mut c = laplace_config(1e-3);
    c.mu = 3.0;
    let s3 = Solver::new(c).unwrap();
    let (_, hd3) = s3.boundary_flux(&unit_block(&s3, -1.0, 1.0));
    assert!((hd3 - 3.0 * hd).abs() < 1e-12);
}

#[test]
fn midpoint_step_matches_fine_euler() {
    let mut cfg = laplace_config(0.1);
    cfg.mu = 2.0;
    // keep the fronts off the nodes so no node enters the support mid-step
    cfg.h0 = 1.05;
    let mut s = Solver::new(cfg).unwrap();
    let start = s.initial_state();
    let stepped = s.step(&start).unwrap();

    let mut e = start.clone();
    let sub = 0.01 / 100.0;
    for _ in 0..100 {
        let rhs = s.nonlocal_rhs(&e).unwrap();
        let (gd, hd) = s.boundary_flux(&e);
        for (u, r) in e.u.iter_mut().zip(&rhs) {
            *u += sub * r;
        }
        e.g += sub * gd;
        e.h += sub * hd;
        e.t += sub;
    }
    assert!((stepped.h - e.h).abs() < 1e-6);
    assert!((stepped.g - e.g).abs() < 1e-6);
    let gap = stepped.u.iter().zip(&e.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-5, "{gap}");
}

#[test]
fn larger_mu_dominates() {
    let mut c = laplace_config(0.1);
    c.horizon = 20.0;
    let slow = run(&c).unwrap();
    c.mu = 2.0;
    let fast = run(&c).unwrap();
    assert_eq!(fast.termination, Termination::Horizon);
    assert_eq!(slow.series.len(), fast.series.len());
    for (a, b) in slow.series.iter().zip(&fast.series) {
        assert!(b.h >= a.h && b.g <= a.g, "t={}", a.t);
    }
    assert!(fast.final_row().h > slow.final_row().h + 1.0);
}

#[test]
fn tiny_mu_vanishes() {
    let a = QuasiPeriodicSignal::new(0.2, &[(0.1, 1.0, 0.0)]).unwrap();
    let cfg = RunConfig {
        mu: 1e-4,
        h0: 0.2,
        kernel: KernelSpec::gaussian(1.0).unwrap().into(),
        growth: GrowthLaw::new(a, QuasiPeriodicSignal::constant(1.0)).unwrap(),
        dx: 0.02,
        window_halfwidth: 10.0,
        horizon: 500.0,
        record_every: 1.0,
        snapshot_every: 100.0,
        ..laplace_config(0.1)
    };
    let rec = run(&cfg).unwrap();
    let first = rec.series.iter().find(|r| r.umax < 1e-4).expect("density never decayed");
    assert!(first.t < 500.0);
    assert!(rec.final_row().h - rec.final_row().g < 0.5);
}

#[test]
fn solution_stays_in_bounds_and_fronts_are_monotone() {
    let mut c = laplace_config(0.1);
    c.initial = InitialShape::Cosine { amplitude: 1.7 };
    c.horizon = 15.0;
    let rec = run(&c).unwrap();
    assert_eq!(rec.termination, Termination::Horizon);
    for snap in &rec.snapshots {
        assert!(snap.u.iter().all(|&v| (-1e-12..=1.7 + 1e-9).contains(&v)));
    }
    for w in rec.series.windows(2) {
        assert!(w[1].h >= w[0].h && w[1].g <= w[0].g);
    }
}

#[test]
fn grid_refinement_moves_front_little() {
    let mut coarse = parse_config(include_str!("../../../configs/spreading.toml")).unwrap().run;
    coarse.horizon = 60.0;
    coarse.window_halfwidth = 100.0;
    let mut fine = coarse.clone();
    fine.dx /= 2.0;
    fine.dt /= 2.0;
    let hc = run(&coarse).unwrap().final_row().h;
    let hf = run(&fine).unwrap().final_row().h;
    assert!((hc - hf).abs() / hf < 0.02, "{hc} vs {hf}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn even_data_stays_even(h0 in 0.5..3.0f64, mu in 0.1..4.0f64, direct in any::<bool>()) {
        let mut c = laplace_config(0.1);
        c.h0 = h0;
        c.mu = mu;
        c.horizon = 5.0;
        c.convolution = if direct { ConvolutionMethod::Direct } else { ConvolutionMethod::Fft };
        let rec = run(&c).unwrap();
        for r in &rec.series {
            prop_assert!((r.g + r.h).abs() < 1e-9, "t={} g={} h={}", r.t, r.g, r.h);
        }
        let last = rec.snapshots.last().unwrap();
        let n = last.u.len();
        for j in 0..n / 2 {
            prop_assert!((last.u[j] - last.u[n - 1 - j]).abs() < 1e-9);
        }
    }
}
