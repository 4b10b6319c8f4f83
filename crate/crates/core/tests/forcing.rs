use frontier_core::forcing::{GrowthLaw, QuasiPeriodicSignal};
use proptest::prelude::*;

fn signal() -> impl Strategy<Value = QuasiPeriodicSignal<f64>> {
    (-1.0..2.0f64, prop::collection::vec((-1.0..1.0f64, 0.1..3.0f64, 0.0..6.3f64), 0..4))
        .prop_map(|(mean, modes)| QuasiPeriodicSignal::new(mean, &modes).unwrap())
}

proptest! {
    #[test]
    fn averaging_bound(s in signal(), horizon in 10.0..2000.0f64) {
        let bound: f64 = s.modes().iter().map(|m| 2.0 * m.amplitude.abs() / m.frequency).sum::<f64>() / horizon;
        let gap = (s.empirical_mean(horizon) - s.mean_level()).abs();
        prop_assert!(gap <= bound + 1e-12, "gap {} bound {}", gap, bound);
    }

    #[test]
    fn eval_stays_within_bounds(s in signal(), t in -1e4..1e4f64) {
        let v = s.eval(t);
        prop_assert!(v >= s.inf_bound() - 1e-12 && v <= s.sup_bound() + 1e-12);
    }

    #[test]
    fn growth_law_is_kpp(a in signal(), b_mean in 0.5..3.0f64, b_amp in 0.0..0.4f64, t in 0.0..1e3f64) {
        let b = QuasiPeriodicSignal::new(b_mean, &[(b_amp, 0.7, 0.0)]).unwrap();
        let f = GrowthLaw::new(a.clone(), b).unwrap();
        prop_assert_eq!(f.eval(t, 0.0), a.eval(t));
        prop_assert!(f.df_du(t) < 0.0);
        for delta in [0.01, 0.1, 1.0] {
            prop_assert!(f.eval(t, f.saturation() + delta) < 0.0);
        }
    }
}
