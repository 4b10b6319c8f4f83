//! The spatially flat almost-periodic state: u' = u (f(t,u) + shift).
//!
//! With shift 0 the attracting positive solution is û*(t); shifts ±ε give
//! the bracketing solutions used to squeeze the front speed. Trajectories are
//! integrated with classical RK4. The transient is detected by integrating
//! from two initial values and waiting for them to merge.

use thiserror::Error;

use crate::forcing::GrowthLaw;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("trajectories from distinct initial data did not merge (final gap {gap:e})")]
    NoConvergence { gap: f64 },
    #[error("non-positive value {value} at t = {t}; the time step is too large")]
    NonPositive { t: f64, value: f64 },
    #[error("window-doubling mean did not settle: last relative change {relative_change:e}")]
    NotConverged { mean: f64, relative_change: f64 },
}

/// Gap below which two trajectories are considered merged.
pub const MERGE_TOL: f64 = 1e-6;
/// Relative agreement required between successive doubled windows.
pub const MEAN_REL_TOL: f64 = 1e-3;

const MAX_STORED: usize = 1 << 20;
const CI_BLOCKS: usize = 8;

/// Largest admissible RK4 step for the shifted logistic flow started at
/// `u_init` (the companion trajectory starts at `2·u_init`).
pub fn stable_dt<T: Real>(growth: &GrowthLaw<T>, shift: T, u_init: T) -> T {
    let top = (T::lit(2.0) * u_init).max(growth.saturation());
    let rate = growth.intrinsic().sup_abs() + shift.abs() + growth.crowding().sup_bound() * top;
    T::lit(0.01) / rate.max(T::epsilon())
}

/// Sampled trajectory of the attracting solution.
#[derive(Debug, Clone)]
pub struct ApSolution<T> {
    pub sample_times: Vec<T>,
    pub values: Vec<T>,
    /// ∫ from the first sample to each sample, accumulated at full resolution.
    cumulative: Vec<T>,
    /// Elapsed time accumulated with the same trapezoid weights, so that a
    /// constant trajectory averages to itself exactly.
    clock: Vec<T>,
    pub transient_cut: T,
    pub mean_estimate: T,
    pub mean_ci_width: T,
    pub shift: T,
}

impl<T: Real> ApSolution<T> {
    pub fn start_time(&self) -> T {
        self.sample_times[0]
    }

    pub fn end_time(&self) -> T {
        *self.sample_times.last().expect("non-empty trajectory")
    }

    fn locate(&self, t: T) -> Option<(usize, T)> {
        let first = self.start_time();
        let last = self.end_time();
        if !(t >= first && t <= last) {
            return None;
        }
        let n = self.sample_times.len();
        if n == 1 {
            return Some((0, T::zero()));
        }
        let idx = self.sample_times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let (t0, t1) = (self.sample_times[idx], self.sample_times[idx + 1]);
        Some((idx, (t - t0) / (t1 - t0)))
    }

    /// Linear interpolation of the trajectory; `None` outside the sampled span.
    pub fn value_at(&self, t: T) -> Option<T> {
        let (i, w) = self.locate(t)?;
        if w == T::zero() {
            return Some(self.values[i]);
        }
        Some(self.values[i] + w * (self.values[i + 1] - self.values[i]))
    }

    fn accumulated_at(&self, t: T) -> Option<(T, T)> {
        let (i, w) = self.locate(t)?;
        if w == T::zero() {
            return Some((self.cumulative[i], self.clock[i]));
        }
        let lerp = |v: &[T]| v[i] + w * (v[i + 1] - v[i]);
        Some((lerp(&self.cumulative), lerp(&self.clock)))
    }

    /// Time average over `[t0, t1]`.
    pub fn mean_over(&self, t0: T, t1: T) -> Option<T> {
        if !(t1 > t0) {
            return None;
        }
        let (u1, c1) = self.accumulated_at(t1)?;
        let (u0, c0) = self.accumulated_at(t0)?;
        Some((u1 - u0) / (c1 - c0))
    }

    /// Values at or after the transient cut.
    pub fn settled(&self) -> impl Iterator<Item = (T, T)> + '_ {
        let cut = self.transient_cut;
        self.sample_times.iter().copied().zip(self.values.iter().copied()).filter(move |&(t, _)| t >= cut)
    }
}

/// Solves on `[0, horizon]`.
pub fn solve_scalar<T: Real>(
    growth: &GrowthLaw<T>,
    shift: T,
    u_init: T,
    horizon: T,
    dt: T,
) -> Result<ApSolution<T>, ApError> {
    solve_scalar_from(growth, shift, u_init, T::zero(), horizon, dt)
}

#[inline]
fn rk4<T: Real>(growth: &GrowthLaw<T>, shift: T, t: T, u: T, dt: T) -> T {
    let rhs = |t: T, u: T| u * (growth.eval(t, u) + shift);
    let half = T::lit(0.5) * dt;
    let k1 = rhs(t, u);
    let k2 = rhs(t + half, u + half * k1);
    let k3 = rhs(t + half, u + half * k2);
    let k4 = rhs(t + dt, u + dt * k3);
    u + dt / T::lit(6.0) * (k1 + T::lit(2.0) * (k2 + k3) + k4)
}

/// Solves u' = u (f(t,u) + shift) on `[t_start, t_start + horizon]`.
///
/// Starting before the window of interest lets callers read û*(t) at t = 0
/// after the transient has died out.
pub fn solve_scalar_from<T: Real>(
    growth: &GrowthLaw<T>,
    shift: T,
    u_init: T,
    t_start: T,
    horizon: T,
    dt: T,
) -> Result<ApSolution<T>, ApError> {
    if !(u_init > T::zero() && u_init.is_finite()) {
        return Err(ApError::InvalidArgument(format!("u_init must be positive, got {u_init}")));
    }
    if !(horizon > T::zero() && dt > T::zero() && t_start.is_finite()) {
        return Err(ApError::InvalidArgument("horizon and dt must be positive".into()));
    }
    let bound = stable_dt(growth, shift, u_init);
    if dt > bound * (T::one() + T::lit(1e-12)) {
        return Err(ApError::StepTooLarge { dt: dt.as_f64(), bound: bound.as_f64() });
    }
    let steps = (horizon / dt).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    let dt = horizon / T::from_usize_exact(steps);
    let stride = steps.div_ceil(MAX_STORED).max(1);
    let capacity = steps / stride + 2;

    let mut sample_times = Vec::with_capacity(capacity);
    let mut values = Vec::with_capacity(capacity);
    let mut cumulative = Vec::with_capacity(capacity);
    let mut clock = Vec::with_capacity(capacity);

    let merge_tol = T::lit(MERGE_TOL);
    let mut u = u_init;
    let mut w = T::lit(2.0) * u_init;
    let mut integral = T::zero();
    let mut elapsed = T::zero();
    let mut last_apart: Option<usize> = if (w - u).abs() >= merge_tol { Some(0) } else { None };

    sample_times.push(t_start);
    values.push(u);
    cumulative.push(integral);
    clock.push(elapsed);

    for n in 0..steps {
        let t = t_start + dt * T::from_usize_exact(n);
        let next = rk4(growth, shift, t, u, dt);
        w = rk4(growth, shift, t, w, dt);
        if !(next > T::zero() && next.is_finite()) {
            return Err(ApError::NonPositive { t: (t + dt).as_f64(), value: next.as_f64() });
        }
        if !(w > T::zero() && w.is_finite()) {
            return Err(ApError::NonPositive { t: (t + dt).as_f64(), value: w.as_f64() });
        }
        integral += T::lit(0.5) * dt * (u + next);
        elapsed += T::lit(0.5) * dt * (T::one() + T::one());
        u = next;
        if (w - u).abs() >= merge_tol {
            last_apart = Some(n + 1);
        }
        if (n + 1) % stride == 0 || n + 1 == steps {
            sample_times.push(t_start + dt * T::from_usize_exact(n + 1));
            values.push(u);
            cumulative.push(integral);
            clock.push(elapsed);
        }
    }

    if let Some(step) = last_apart {
        if step >= steps {
            return Err(ApError::NoConvergence { gap: (w - u).abs().as_f64() });
        }
    }
    let cut_step = last_apart.map_or(0, |s| s + 1);
    let cut_time = t_start + dt * T::from_usize_exact(cut_step);
    // snap forward to the next stored sample
    let cut_index = sample_times.partition_point(|&s| s < cut_time).min(sample_times.len() - 1);
    if cut_index + 1 >= sample_times.len() {
        return Err(ApError::NoConvergence { gap: (w - u).abs().as_f64() });
    }
    let transient_cut = sample_times[cut_index];

    let mut sol = ApSolution {
        sample_times,
        values,
        cumulative,
        clock,
        transient_cut,
        mean_estimate: T::zero(),
        mean_ci_width: T::zero(),
        shift,
    };
    let end = sol.end_time();
    sol.mean_estimate = sol.mean_over(transient_cut, end).unwrap_or(sol.values[cut_index]);
    let span = end - transient_cut;
    let block = span / T::from_usize_exact(CI_BLOCKS);
    let means: Vec<T> = (0..CI_BLOCKS)
        .filter_map(|i| {
            let a = transient_cut + block * T::from_usize_exact(i);
            sol.mean_over(a, (a + block).min(end))
        })
        .collect();
    if means.len() > 1 {
        let k = T::from_usize_exact(means.len());
        let avg = means.iter().copied().sum::<T>() / k;
        let var = means.iter().map(|&m| (m - avg) * (m - avg)).sum::<T>() / (k - T::one());
        sol.mean_ci_width = T::lit(2.0) * (var / k).sqrt();
    }
    Ok(sol)
}

/// Window-doubling estimate of the long-time mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ApMean<T> {
    pub mean: T,
    /// (window length, mean over that window), shortest first.
    pub window_means: Vec<(T, T)>,
    pub relative_change: T,
}

/// Averages over windows T₀, 2T₀, 4T₀, … starting at the transient cut, the
/// longest window spanning the whole settled trajectory. Converged when the
/// last two window means agree to `MEAN_REL_TOL`.
pub fn ap_mean<T: Real>(sol: &ApSolution<T>, window_doublings: u32) -> Result<ApMean<T>, ApError> {
    if window_doublings == 0 {
        return Err(ApError::InvalidArgument("need at least one window doubling".into()));
    }
    let start = sol.transient_cut;
    let span = sol.end_time() - start;
    let base = span / T::from_usize_exact(1usize << window_doublings);
    let mut window_means = Vec::with_capacity(window_doublings as usize + 1);
    for k in 0..=window_doublings {
        let len = if k == window_doublings { span } else { base * T::from_usize_exact(1usize << k) };
        let m = sol
            .mean_over(start, start + len)
            .ok_or_else(|| ApError::InvalidArgument("settled trajectory too short".into()))?;
        window_means.push((len, m));
    }
    let last = window_means[window_means.len() - 1].1;
    let prev = window_means[window_means.len() - 2].1;
    let scale = last.abs().max(T::lit(1e-12));
    let relative_change = (last - prev).abs() / scale;
    if relative_change < T::lit(MEAN_REL_TOL) {
        Ok(ApMean { mean: last, window_means, relative_change })
    } else {
        Err(ApError::NotConverged { mean: last.as_f64(), relative_change: relative_change.as_f64() })
    }
}

/// Result of comparing u̲_ε ≤ û* ≤ ū_ε on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Bracket<T> {
    pub max_violation: T,
    pub lower_mean: T,
    pub center_mean: T,
    pub upper_mean: T,
}

/// Solves the problems with shifts -ε, 0, +ε and measures any violation of
/// the ordering past the latest of the three transients.
pub fn bracket_check<T: Real>(growth: &GrowthLaw<T>, eps: T, horizon: T) -> Result<Bracket<T>, ApError> {
    if !(eps >= T::zero()) {
        return Err(ApError::InvalidArgument(format!("eps must be non-negative, got {eps}")));
    }
    let u_init =
        ((growth.intrinsic().sup_bound() + eps).max(T::zero()) / growth.crowding().inf_bound()).max(T::lit(1e-3));
    let dt = [-eps, T::zero(), eps].iter().map(|&s| stable_dt(growth, s, u_init)).fold(T::infinity(), T::min);
    let lower = solve_scalar(growth, -eps, u_init, horizon, dt)?;
    let center = solve_scalar(growth, T::zero(), u_init, horizon, dt)?;
    let upper = solve_scalar(growth, eps, u_init, horizon, dt)?;
    let cut = lower.transient_cut.max(center.transient_cut).max(upper.transient_cut);
    let mut max_violation = T::zero();
    for i in 0..center.values.len() {
        if center.sample_times[i] < cut {
            continue;
        }
        let v = (lower.values[i] - center.values[i]).max(center.values[i] - upper.values[i]);
        max_violation = max_violation.max(v);
    }
    let end = center.end_time();
    let mean = |s: &ApSolution<T>| s.mean_over(cut, end).unwrap_or(s.mean_estimate);
    Ok(Bracket { max_violation, lower_mean: mean(&lower), center_mean: mean(&center), upper_mean: mean(&upper) })
}
