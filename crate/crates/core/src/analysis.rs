//! Verdicts on simulated runs: the theoretical speed c*, empirical front
//! speeds, spreading/vanishing classification, flattening behind the fronts,
//! acceleration under fat tails and the truncated-kernel speed ladder.
//!
//! Everything here works on plain series/snapshot slices so that records read
//! back from CSV are handled the same way as in-memory ones.

use thiserror::Error;

use crate::ap_ode::{ap_mean, solve_scalar, solve_scalar_from, stable_dt, ApError, ApSolution};
use crate::forcing::GrowthLaw;
use crate::kernels::{double_tail_integral, truncate, DispersalKernel, KernelError, KernelSpec};
use crate::scalar::{ExtReal, Real};
use crate::solver::{SeriesRow, Snapshot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("speed target is infinite")]
    InfiniteTarget,
    #[error("closed-form c* disagrees with the 2-D quadrature (relative residual {residual:e})")]
    QuadratureMismatch { residual: f64 },
    #[error(transparent)]
    Ap(#[from] ApError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Minimum number of series samples inside a speed-fit window.
pub const MIN_FIT_SAMPLES: usize = 20;
/// Relative agreement required between closed-form c* and the 2-D quadrature.
pub const CSTAR_QUADRATURE_TOL: f64 = 1e-5;
/// Width plateau tolerance over the last half of a run.
pub const PLATEAU_TOL: f64 = 0.01;
/// Late width growth rate, as a fraction of the mean rate, still counted as spreading.
pub const SPREADING_RATE_FRACTION: f64 = 0.1;
/// h(T)/T over h(T/4)/(T/4) at or above which growth is called accelerated.
pub const ACCELERATION_THRESHOLD: f64 = 1.5;
/// Length of the scalar solve used to average the attracting state.
pub const AP_HORIZON: f64 = 4000.0;
/// How far before t = 0 the reference solution is started.
pub const AP_LEAD_IN: f64 = 400.0;

/// Theoretical asymptotic speed c* = μ · û* · M₁.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedTarget<T> {
    pub c_star: ExtReal<T>,
    pub mu: T,
    pub u_mean: T,
    pub m1: ExtReal<T>,
    /// Relative gap to the direct quadrature of the defining double integral.
    pub quadrature_residual: Option<T>,
}

impl<T: Real> SpeedTarget<T> {
    pub fn to_key_value(&self) -> String {
        let residual = self.quadrature_residual.map_or("none".to_string(), |r| format!("{:.3e}", r.as_f64()));
        format!(
            "c_star = {}\nmu = {}\nu_mean = {}\nm1 = {}\nquadrature_residual = {}\n",
            self.c_star, self.mu, self.u_mean, self.m1, residual
        )
    }
}

/// Long-time mean of the positive solution of u' = u (f(t,u) + shift); zero
/// when the shifted intrinsic rate has non-positive mean.
pub fn attracting_mean<T: Real>(growth: &GrowthLaw<T>, shift: T) -> Result<T, AnalysisError> {
    if growth.intrinsic().mean_level() + shift <= T::zero() {
        return Ok(T::zero());
    }
    let u_init = growth.saturation().max(T::lit(1e-3));
    let dt = stable_dt(growth, shift, u_init);
    let sol = solve_scalar(growth, shift, u_init, T::lit(AP_HORIZON), dt)?;
    Ok(ap_mean(&sol, 4)?.mean)
}

/// c* for a unit-mass kernel.
pub fn compute_cstar<T: Real, K: DispersalKernel<T> + ?Sized>(
    mu: T,
    growth: &GrowthLaw<T>,
    kernel: &K,
) -> Result<SpeedTarget<T>, AnalysisError> {
    target_with_shift(mu, T::zero(), growth, kernel)
}

/// c* for a kernel of mass m ≤ 1 (a truncation): the lost mass acts as the
/// extra death rate d (1 - m) in the reaction, so û* is the mean of the
/// solution of u' = u (f(t,u) - d (1 - m)).
pub fn compute_cstar_with_dispersal<T: Real, K: DispersalKernel<T> + ?Sized>(
    mu: T,
    d: T,
    growth: &GrowthLaw<T>,
    kernel: &K,
) -> Result<SpeedTarget<T>, AnalysisError> {
    let shift = -d * (T::one() - kernel.mass()).max(T::zero());
    target_with_shift(mu, shift, growth, kernel)
}

fn target_with_shift<T: Real, K: DispersalKernel<T> + ?Sized>(
    mu: T,
    shift: T,
    growth: &GrowthLaw<T>,
    kernel: &K,
) -> Result<SpeedTarget<T>, AnalysisError> {
    if !(mu >= T::zero()) {
        return Err(AnalysisError::InvalidArgument(format!("mu must be non-negative, got {mu}")));
    }
    let u_mean = attracting_mean(growth, shift)?;
    let m1 = kernel.half_first_moment();
    let Some(moment) = m1.finite() else {
        return Ok(SpeedTarget { c_star: ExtReal::Infinite, mu, u_mean, m1, quadrature_residual: None });
    };
    let c = mu * u_mean * moment;
    let quad_box = kernel.reach(T::lit(1e-13));
    let q = double_tail_integral(kernel, quad_box);
    let residual = if moment > T::zero() { (q - moment).abs() / moment } else { q.abs() };
    if residual > T::lit(CSTAR_QUADRATURE_TOL) {
        return Err(AnalysisError::QuadratureMismatch { residual: residual.as_f64() });
    }
    Ok(SpeedTarget { c_star: ExtReal::Finite(c), mu, u_mean, m1, quadrature_residual: Some(residual) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Front {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    SlopeFit,
    EndpointRatio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedFit<T> {
    pub c_hat: T,
    pub stderr: T,
    pub window: (T, T),
    pub method: FitMethod,
}

/// Both estimators side by side; a large gap flags pre-asymptotic data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedEstimate<T> {
    pub slope: SpeedFit<T>,
    pub endpoint: SpeedFit<T>,
}

impl<T: Real> SpeedEstimate<T> {
    /// |slope - endpoint| / slope.
    pub fn disagreement(&self) -> T {
        (self.slope.c_hat - self.endpoint.c_hat).abs() / self.slope.c_hat.abs()
    }
}

/// Ordinary least squares; returns (slope, intercept, slope standard error).
pub fn least_squares<T: Real>(ts: &[T], ys: &[T]) -> (T, T, T) {
    let n = T::from_usize_exact(ts.len());
    let tm = ts.iter().copied().sum::<T>() / n;
    let ym = ys.iter().copied().sum::<T>() / n;
    let sxx = ts.iter().map(|&t| (t - tm) * (t - tm)).sum::<T>();
    let sxy = ts.iter().zip(ys).map(|(&t, &y)| (t - tm) * (y - ym)).sum::<T>();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ssr = ts.iter().zip(ys).map(|(&t, &y)| (y - intercept - slope * t).powi(2)).sum::<T>();
    let dof = T::from_usize_exact(ts.len().saturating_sub(2).max(1));
    (slope, intercept, (ssr / dof / sxx).sqrt())
}

/// Fits the speed of one front over the last `window_fraction` of the run.
pub fn estimate_speed<T: Real>(
    series: &[SeriesRow<T>],
    which: Front,
    window_fraction: T,
) -> Result<SpeedEstimate<T>, AnalysisError> {
    if !(window_fraction > T::zero() && window_fraction <= T::lit(0.5)) {
        return Err(AnalysisError::InvalidArgument(format!(
            "window_fraction must be in (0, 0.5], got {window_fraction}"
        )));
    }
    let last = series.last().ok_or_else(|| AnalysisError::InsufficientData("empty series".into()))?;
    let t_hi = last.t;
    if !(t_hi > T::zero()) {
        return Err(AnalysisError::InsufficientData("series ends at t = 0".into()));
    }
    let t_lo = t_hi * (T::one() - window_fraction);
    let pos = |r: &SeriesRow<T>| match which {
        Front::Right => r.h,
        Front::Left => -r.g,
    };
    let (ts, ys): (Vec<T>, Vec<T>) = series.iter().filter(|r| r.t >= t_lo).map(|r| (r.t, pos(r))).unzip();
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::InsufficientData(format!(
            "{} samples in [{t_lo}, {t_hi}], need {MIN_FIT_SAMPLES}",
            ts.len()
        )));
    }
    let (c_hat, _, stderr) = least_squares(&ts, &ys);
    Ok(SpeedEstimate {
        slope: SpeedFit { c_hat, stderr, window: (t_lo, t_hi), method: FitMethod::SlopeFit },
        endpoint: SpeedFit {
            c_hat: pos(last) / t_hi,
            stderr: T::zero(),
            window: (t_hi, t_hi),
            method: FitMethod::EndpointRatio,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Spreading,
    Vanishing,
    Undetermined,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Spreading => "Spreading",
            Outcome::Vanishing => "Vanishing",
            Outcome::Undetermined => "Undetermined",
        })
    }
}

/// Finite-horizon reading of the spreading-vanishing dichotomy.
///
/// Vanishing: final sup norm below `decay_tol` and the width grew by less than
/// 1% over the last half. Spreading: final width above `width_threshold` and
/// the late growth rate of the width is at least 10% of its mean rate.
pub fn classify_outcome<T: Real>(series: &[SeriesRow<T>], width_threshold: T, decay_tol: T) -> Outcome {
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return Outcome::Undetermined;
    };
    let span = last.t - first.t;
    if series.len() < 3 || !(span > T::zero()) {
        return Outcome::Undetermined;
    }
    let t_mid = first.t + T::lit(0.5) * span;
    let mid = series.iter().find(|r| r.t >= t_mid).unwrap_or(last);
    let width = |r: &SeriesRow<T>| r.h - r.g;
    let (w0, w_mid, w_end) = (width(first), width(mid), width(last));

    if last.umax < decay_tol && w_end - w_mid < T::lit(PLATEAU_TOL) * w_mid {
        return Outcome::Vanishing;
    }
    let mean_rate = (w_end - w0) / span;
    let late_span = last.t - mid.t;
    if w_end > width_threshold && mean_rate > T::zero() && late_span > T::zero() {
        let late_rate = (w_end - w_mid) / late_span;
        if late_rate >= T::lit(SPREADING_RATE_FRACTION) * mean_rate {
            return Outcome::Spreading;
        }
    }
    Outcome::Undetermined
}

/// Reference trajectory û*(t) covering `[0, horizon]`, started early enough
/// that the transient has died out by t = 0.
pub fn reference_solution<T: Real>(growth: &GrowthLaw<T>, horizon: T) -> Result<ApSolution<T>, AnalysisError> {
    let u_init = growth.saturation().max(T::lit(1e-3));
    let dt = stable_dt(growth, T::zero(), u_init);
    let lead = T::lit(AP_LEAD_IN);
    Ok(solve_scalar_from(growth, T::zero(), u_init, -lead, lead + horizon, dt)?)
}

/// max over |x| ≤ (c* - ε) t of |u(t,x) - û*(t)| for each snapshot, with
/// ε = eps_fraction · c*. An empty window falls back to the node nearest 0.
pub fn flattening_metric<T: Real>(
    snapshots: &[Snapshot<T>],
    target: &SpeedTarget<T>,
    eps_fraction: T,
    ap: &ApSolution<T>,
) -> Result<Vec<(T, T)>, AnalysisError> {
    let c = target.c_star.finite().ok_or(AnalysisError::InfiniteTarget)?;
    if !(eps_fraction > T::zero() && eps_fraction < T::one()) {
        return Err(AnalysisError::InvalidArgument(format!("eps_fraction must be in (0, 1), got {eps_fraction}")));
    }
    let inner_speed = c * (T::one() - eps_fraction);
    snapshots
        .iter()
        .map(|snap| {
            let reference = ap.value_at(snap.t).ok_or_else(|| {
                AnalysisError::InsufficientData(format!("reference solution does not cover t = {}", snap.t))
            })?;
            let radius = inner_speed * snap.t;
            let mut deviation = None::<T>;
            for (&x, &u) in snap.x.iter().zip(&snap.u) {
                if x.abs() <= radius {
                    let d = (u - reference).abs();
                    deviation = Some(deviation.map_or(d, |m| m.max(d)));
                }
            }
            let deviation = match deviation {
                Some(d) => d,
                None => {
                    let (_, u) = snap
                        .x
                        .iter()
                        .zip(&snap.u)
                        .min_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).expect("finite grid"))
                        .ok_or_else(|| AnalysisError::InsufficientData("empty snapshot".into()))?;
                    (*u - reference).abs()
                }
            };
            Ok((snap.t, deviation))
        })
        .collect()
}

/// Linear interpolation of the right front at time `t`.
fn front_at<T: Real>(series: &[SeriesRow<T>], t: T) -> Option<T> {
    let i = series.partition_point(|r| r.t < t);
    if i == series.len() {
        return None;
    }
    let r1 = &series[i];
    if r1.t == t || i == 0 {
        return (r1.t == t).then_some(r1.h);
    }
    let r0 = &series[i - 1];
    let w = (t - r0.t) / (r1.t - r0.t);
    Some(r0.h + w * (r1.h - r0.h))
}

/// Ratio [h(T)/T] / [h(T/4)/(T/4)] and whether it reaches the threshold.
pub fn acceleration_check<T: Real>(series: &[SeriesRow<T>]) -> Result<(bool, T), AnalysisError> {
    let last = series.last().ok_or_else(|| AnalysisError::InsufficientData("empty series".into()))?;
    let t_end = last.t;
    if !(t_end > T::zero()) {
        return Err(AnalysisError::InsufficientData("series ends at t = 0".into()));
    }
    let t_q = T::lit(0.25) * t_end;
    let h_q = front_at(series, t_q)
        .ok_or_else(|| AnalysisError::InsufficientData(format!("no sample bracketing t = {t_q}")))?;
    if !(h_q > T::zero()) {
        return Err(AnalysisError::InsufficientData("front not positive at T/4".into()));
    }
    let ratio = (last.h / t_end) / (h_q / t_q);
    Ok((ratio >= T::lit(ACCELERATION_THRESHOLD), ratio))
}

/// c*ₙ for each truncation κₙ of `base` (cutoff n, ramp `width`).
pub fn truncation_ladder<T: Real>(
    mu: T,
    d: T,
    growth: &GrowthLaw<T>,
    base: &KernelSpec<T>,
    cutoffs: &[T],
    width: T,
) -> Result<Vec<SpeedTarget<T>>, AnalysisError> {
    if cutoffs.is_empty() || cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::InvalidArgument("cutoffs must be non-empty and strictly increasing".into()));
    }
    cutoffs
        .iter()
        .map(|&n| {
            let k = truncate(base, n, width)?;
            compute_cstar_with_dispersal(mu, d, growth, &k)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::QuasiPeriodicSignal;

    fn row(t: f64, g: f64, h: f64, umax: f64) -> SeriesRow<f64> {
        SeriesRow { t, g, h, umax, mass: 0.0 }
    }

    fn logistic() -> GrowthLaw<f64> {
        GrowthLaw::logistic(1.0, 1.0).unwrap()
    }

    #[test]
    fn cstar_examples() {
        let t = compute_cstar(2.0, &logistic(), &KernelSpec::laplace(1.0).unwrap()).unwrap();
        assert_eq!(t.c_star, ExtReal::Finite(1.0));
        assert!(t.quadrature_residual.unwrap() < 1e-5);
        let t = compute_cstar(1.0, &logistic(), &KernelSpec::gaussian(1.0).unwrap()).unwrap();
        assert!((t.c_star.finite().unwrap() - 0.398_942_3).abs() < 1e-7);
        let t = compute_cstar(0.3, &logistic(), &KernelSpec::power_law(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(t.c_star, ExtReal::Infinite);
    }

    #[test]
    fn negative_mean_growth_has_zero_state() {
        let g = GrowthLaw::logistic(-0.1, 1.0).unwrap();
        assert_eq!(attracting_mean(&g, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_front_speed() {
        let s: Vec<_> = (0..=100).map(|i| i as f64 * 0.5).map(|t| row(t, -2.0 - 3.0 * t, 2.0 + 3.0 * t, 1.0)).collect();
        let est = estimate_speed(&s, Front::Right, 0.5).unwrap();
        assert!((est.slope.c_hat - 3.0).abs() < 1e-12 && est.slope.stderr < 1e-10);
        assert!((est.endpoint.c_hat - (2.0 + 150.0) / 50.0).abs() < 1e-12);
        let left = estimate_speed(&s, Front::Left, 0.5).unwrap();
        assert_eq!(left.slope.c_hat, est.slope.c_hat);
        assert!(estimate_speed(&s[..30], Front::Right, 0.5).is_err());
    }

    #[test]
    fn classify_by_rule() {
        let vanish: Vec<_> = (0..=100).map(|i| row(i as f64, -1.55, 1.55, 1e-9)).collect();
        assert_eq!(classify_outcome(&vanish, 10.0, 1e-6), Outcome::Vanishing);
        let spread: Vec<_> = (0..=100).map(|i| i as f64).map(|t| row(t, -t, t + 0.5, 1.0)).collect();
        assert_eq!(classify_outcome(&spread, 100.0, 1e-6), Outcome::Spreading);
        assert_eq!(classify_outcome(&spread[..2], 100.0, 1e-6), Outcome::Undetermined);
    }

    #[test]
    fn acceleration_examples() {
        let lin: Vec<_> = (0..=40).map(|i| i as f64 * 5.0).map(|t| row(t, -2.0 * t, 2.0 * t, 1.0)).collect();
        let (v, r) = acceleration_check(&lin).unwrap();
        assert!(!v && (r - 1.0).abs() < 1e-12);
        let quad: Vec<_> =
            (0..=40).map(|i| i as f64 * 5.0).map(|t| row(t, -t * t / 100.0, t * t / 100.0, 1.0)).collect();
        let (v, r) = acceleration_check(&quad).unwrap();
        assert!(v && (r - 4.0).abs() < 1e-12);
    }

    #[test]
    fn flattening_of_exact_state_is_zero() {
        let g = logistic();
        let ap = reference_solution(&g, 10.0).unwrap();
        let target = compute_cstar(2.0, &g, &KernelSpec::laplace(1.0).unwrap()).unwrap();
        let x: Vec<f64> = (-20..=20).map(|j| j as f64 * 0.5).collect();
        let snaps = vec![
            Snapshot { t: 0.0, x: x.clone(), u: x.iter().map(|&x| if x == 0.0 { 0.25 } else { 0.0 }).collect() },
            Snapshot { t: 5.0, x: x.clone(), u: vec![1.0; x.len()] },
        ];
        let m = flattening_metric(&snaps, &target, 0.5, &ap).unwrap();
        assert!((m[0].1 - 0.75).abs() < 1e-12);
        assert!(m[1].1 < 1e-12);
    }

    #[test]
    fn ladder_on_fat_tail_increases() {
        let ladder =
            truncation_ladder(2.0, 1.0, &logistic(), &KernelSpec::power_law(2.0, 1.0).unwrap(), &[10.0, 20.0], 1.0)
                .unwrap();
        let c: Vec<f64> = ladder.iter().map(|t| t.c_star.finite().unwrap()).collect();
        assert!(c[0] < c[1]);
        assert!(
            truncation_ladder(2.0, 1.0, &logistic(), &KernelSpec::laplace(1.0).unwrap(), &[20.0, 10.0], 1.0).is_err()
        );
    }

    #[test]
    fn ap_forcing_keeps_cstar() {
        let a = QuasiPeriodicSignal::new(1.0, &[(0.5, 1.0, 0.0), (0.3, 2f64.sqrt(), 0.0)]).unwrap();
        let g = GrowthLaw::new(a, QuasiPeriodicSignal::constant(1.0)).unwrap();
        let t = compute_cstar(2.0, &g, &KernelSpec::laplace(1.0).unwrap()).unwrap();
        assert!((t.c_star.finite().unwrap() - 1.0).abs() < 1e-3);
    }
}
