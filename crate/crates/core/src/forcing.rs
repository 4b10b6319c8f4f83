//! Time almost-periodic coefficients and the KPP growth law built from them.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForcingError {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("crowding coefficient must stay positive: inf b = {0}")]
    NonPositiveCrowding(f64),
}

/// One sinusoidal component `amplitude · sin(frequency · t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode<T> {
    pub amplitude: T,
    pub frequency: T,
    pub phase: T,
}

/// Finite quasi-periodic sum `mean + Σ aᵢ sin(ωᵢ t + φᵢ)`. With rationally
/// independent frequencies this is almost periodic but not periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPeriodicSignal<T> {
    mean_level: T,
    modes: Vec<Mode<T>>,
}

impl<T: Real> QuasiPeriodicSignal<T> {
    pub fn constant(level: T) -> Self {
        Self { mean_level: level, modes: Vec::new() }
    }

    /// Modes are `(amplitude, frequency, phase)` triples.
    pub fn new(mean_level: T, modes: &[(T, T, T)]) -> Result<Self, ForcingError> {
        if !mean_level.is_finite() {
            return Err(ForcingError::InvalidSignal("mean level must be finite".into()));
        }
        let modes = modes
            .iter()
            .map(|&(amplitude, frequency, phase)| {
                if !(amplitude.is_finite() && frequency.is_finite() && phase.is_finite()) {
                    return Err(ForcingError::InvalidSignal("mode entries must be finite".into()));
                }
                if frequency <= T::zero() {
                    return Err(ForcingError::InvalidSignal(format!(
                        "mode frequency must be positive, got {frequency}"
                    )));
                }
                Ok(Mode { amplitude, frequency, phase })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { mean_level, modes })
    }

    pub fn mean_level(&self) -> T {
        self.mean_level
    }

    pub fn modes(&self) -> &[Mode<T>] {
        &self.modes
    }

    pub fn is_constant(&self) -> bool {
        self.modes.iter().all(|m| m.amplitude == T::zero())
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        self.modes.iter().fold(self.mean_level, |acc, m| acc + m.amplitude * (m.frequency * t + m.phase).sin())
    }

    fn spread(&self) -> T {
        self.modes.iter().map(|m| m.amplitude.abs()).sum()
    }

    /// Upper bound `mean + Σ|aᵢ|` (attained in the limit for independent frequencies).
    pub fn sup_bound(&self) -> T {
        self.mean_level + self.spread()
    }

    pub fn inf_bound(&self) -> T {
        self.mean_level - self.spread()
    }

    pub fn sup_abs(&self) -> T {
        self.sup_bound().abs().max(self.inf_bound().abs())
    }

    pub fn max_frequency(&self) -> T {
        self.modes.iter().map(|m| m.frequency).fold(T::zero(), T::max)
    }

    /// Time average (1/T)∫₀ᵀ s(t) dt by composite Simpson at step
    /// ≤ 0.01 / max frequency.
    pub fn empirical_mean(&self, horizon: T) -> T {
        assert!(horizon > T::zero(), "averaging horizon must be positive");
        if self.modes.is_empty() {
            return self.mean_level;
        }
        let max_step = T::lit(0.01) / self.max_frequency();
        let mut panels = (horizon / max_step).ceil().to_usize().unwrap_or(usize::MAX).max(1);
        if panels % 2 == 1 {
            panels += 1;
        }
        let h = horizon / T::from_usize_exact(panels);
        let mut acc = self.eval(T::zero()) + self.eval(horizon);
        for i in 1..panels {
            let w = if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
            acc += w * self.eval(h * T::from_usize_exact(i));
        }
        acc * h / T::lit(3.0) / horizon
    }
}

/// Optional multiplicative spatial envelope `1 + α cos(2πx/λ)` on the
/// intrinsic growth rate. Accepted by the solver only; no speed theory
/// applies to such runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialEnvelope<T> {
    pub amplitude: T,
    pub wavelength: T,
}

impl<T: Real> SpatialEnvelope<T> {
    pub fn new(amplitude: T, wavelength: T) -> Result<Self, ForcingError> {
        if !(amplitude >= T::zero() && amplitude < T::one() && wavelength > T::zero()) {
            return Err(ForcingError::InvalidSignal("envelope needs 0 <= amplitude < 1 and wavelength > 0".into()));
        }
        Ok(Self { amplitude, wavelength })
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        T::one() + self.amplitude * (T::TAU() * x / self.wavelength).cos()
    }

    pub fn sup(&self) -> T {
        T::one() + self.amplitude
    }
}

/// KPP law f(t,u) = a(t) - b(t)·u with inf b > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthLaw<T> {
    a: QuasiPeriodicSignal<T>,
    b: QuasiPeriodicSignal<T>,
}

impl<T: Real> GrowthLaw<T> {
    pub fn new(a: QuasiPeriodicSignal<T>, b: QuasiPeriodicSignal<T>) -> Result<Self, ForcingError> {
        let inf_b = b.inf_bound();
        if !(inf_b > T::zero()) {
            return Err(ForcingError::NonPositiveCrowding(inf_b.as_f64()));
        }
        Ok(Self { a, b })
    }

    /// Logistic law with constant coefficients.
    pub fn logistic(a: T, b: T) -> Result<Self, ForcingError> {
        Self::new(QuasiPeriodicSignal::constant(a), QuasiPeriodicSignal::constant(b))
    }

    pub fn intrinsic(&self) -> &QuasiPeriodicSignal<T> {
        &self.a
    }

    pub fn crowding(&self) -> &QuasiPeriodicSignal<T> {
        &self.b
    }

    #[inline]
    pub fn eval(&self, t: T, u: T) -> T {
        self.a.eval(t) - self.b.eval(t) * u
    }

    #[inline]
    pub fn df_du(&self, t: T) -> T {
        -self.b.eval(t)
    }

    /// Saturation level M = sup a⁺ / inf b; f(t,u) < 0 for every u > M.
    pub fn saturation(&self) -> T {
        self.a.sup_bound().max(T::zero()) / self.b.inf_bound()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_mode() -> QuasiPeriodicSignal<f64> {
        QuasiPeriodicSignal::new(1.0, &[(0.5, 1.0, 0.0), (0.3, 2f64.sqrt(), 0.0)]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(QuasiPeriodicSignal::constant(1.0).eval(17.3), 1.0);
        let s = QuasiPeriodicSignal::new(1.0, &[(0.5, 1.0, 0.0)]).unwrap();
        assert!((s.eval(std::f64::consts::FRAC_PI_2) - 1.5).abs() < 1e-15);
        assert_eq!(two_mode().eval(0.0), 1.0);
    }

    #[test]
    fn empirical_mean_examples() {
        assert_eq!(QuasiPeriodicSignal::constant(0.7).empirical_mean(100.0), 0.7);
        let s = QuasiPeriodicSignal::new(1.0, &[(0.5, 1.0, 0.0)]).unwrap();
        assert!((s.empirical_mean(std::f64::consts::TAU) - 1.0).abs() < 1e-12);
        let m = two_mode().empirical_mean(10_000.0);
        // closed form: 1 + Σ a (1 - cos ωT) / (ωT)
        let t = 10_000.0_f64;
        let w = 2f64.sqrt();
        let exact = 1.0 + 0.5 * (1.0 - t.cos()) / t + 0.3 * (1.0 - (w * t).cos()) / (w * t);
        assert!((m - exact).abs() < 1e-9);
        assert!((m - 1.0).abs() < 2e-4);
    }

    #[test]
    fn growth_law_identities() {
        let f = GrowthLaw::new(two_mode(), QuasiPeriodicSignal::constant(2.0)).unwrap();
        assert!((f.saturation() - 0.9).abs() < 1e-15);
        for i in 0..500 {
            let t = i as f64 * 0.37;
            assert_eq!(f.eval(t, 0.0), f.intrinsic().eval(t));
            assert_eq!(f.df_du(t), -2.0);
            for delta in [0.01, 0.1, 1.0] {
                assert!(f.eval(t, f.saturation() + delta) < 0.0);
            }
        }
    }

    #[test]
    fn crowding_must_be_positive() {
        let b = QuasiPeriodicSignal::new(0.5, &[(0.6, 1.0, 0.0)]).unwrap();
        assert!(matches!(
            GrowthLaw::new(QuasiPeriodicSignal::constant(1.0), b),
            Err(ForcingError::NonPositiveCrowding(_))
        ));
        assert!(QuasiPeriodicSignal::new(1.0, &[(0.1, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn negative_intrinsic_rate_saturates_at_zero() {
        let f = GrowthLaw::logistic(-0.1, 1.0).unwrap();
        assert_eq!(f.saturation(), 0.0);
        assert!(f.eval(3.0, 0.01) < 0.0);
    }
}
