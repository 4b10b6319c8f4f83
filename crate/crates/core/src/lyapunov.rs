//! Principal Lyapunov exponent of the fixed-interval linear problem
//!
//! ```text
//! u_t = d ∫_{-L}^{L} κ(y-x) u(t,y) dy - d u + a(t) u,   u(±L) = 0
//! ```
//!
//! estimated by a renormalized power method in time, plus the principal
//! eigenvalue of the kernel operator on (-L, L) and the threshold length L*.

use thiserror::Error;

use crate::forcing::QuasiPeriodicSignal;
use crate::kernels::DispersalKernel;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("profile norm underflowed before t = {t}")]
    Degenerate { t: f64 },
    #[error("power iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Cells across (-L, L) used when the caller does not choose a grid.
pub const DEFAULT_CELLS: usize = 200;
const WINDOWS: usize = 5;
const RAYLEIGH_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate<T> {
    pub half_length: T,
    pub lambda: T,
    pub window_slopes: Vec<T>,
    /// Two standard errors of the window slopes.
    pub ci_width: T,
}

/// Discretized kernel operator on the interior nodes of (-L, L), stored as
/// the Toeplitz row `κ(k·dx)·dx`.
struct IntervalOperator<T> {
    row: Vec<T>,
    dx: T,
    half_length: T,
}

impl<T: Real> IntervalOperator<T> {
    fn new<K: DispersalKernel<T> + ?Sized>(kernel: &K, half_length: T, cells: usize) -> Self {
        let dx = T::lit(2.0) * half_length / T::from_usize_exact(cells);
        let m = cells - 1;
        let row = (0..m).map(|k| kernel.density(T::from_usize_exact(k) * dx) * dx).collect();
        Self { row, dx, half_length }
    }

    fn len(&self) -> usize {
        self.row.len()
    }

    fn x(&self, i: usize) -> T {
        -self.half_length + self.dx * T::from_usize_exact(i + 1)
    }

    fn apply(&self, v: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = v.iter().enumerate().map(|(j, &vj)| self.row[i.abs_diff(j)] * vj).sum();
        }
    }

    fn cosine_profile(&self) -> Vec<T> {
        (0..self.len()).map(|i| (T::FRAC_PI_2() * self.x(i) / self.half_length).cos()).collect()
    }
}

fn check_interval<T: Real>(half_length: T, cells: usize) -> Result<(), LyapunovError> {
    if !(half_length > T::zero() && half_length.is_finite()) {
        return Err(LyapunovError::InvalidArgument(format!("L must be positive, got {half_length}")));
    }
    if cells < DEFAULT_CELLS {
        return Err(LyapunovError::InvalidArgument(format!("need dx <= L/100 (at least {DEFAULT_CELLS} cells)")));
    }
    Ok(())
}

/// Estimates λ_PL(a, L) on the default grid (dx = L/100) from a cosine profile.
pub fn lyapunov_exponent<T: Real, K: DispersalKernel<T> + ?Sized>(
    a: &QuasiPeriodicSignal<T>,
    d: T,
    kernel: &K,
    half_length: T,
    horizon: T,
    renorm_every: T,
) -> Result<LyapunovEstimate<T>, LyapunovError> {
    lyapunov_exponent_from(a, d, kernel, half_length, horizon, renorm_every, DEFAULT_CELLS, None)
}

/// Full-control variant: grid resolution and an optional initial profile on
/// the interior nodes (`cells - 1` values, all positive).
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_exponent_from<T: Real, K: DispersalKernel<T> + ?Sized>(
    a: &QuasiPeriodicSignal<T>,
    d: T,
    kernel: &K,
    half_length: T,
    horizon: T,
    renorm_every: T,
    cells: usize,
    initial: Option<&[T]>,
) -> Result<LyapunovEstimate<T>, LyapunovError> {
    check_interval(half_length, cells)?;
    if !(d >= T::zero() && renorm_every > T::zero()) {
        return Err(LyapunovError::InvalidArgument("need d >= 0 and renorm_every > 0".into()));
    }
    if horizon < T::lit(50.0) * renorm_every {
        return Err(LyapunovError::InvalidArgument("horizon must be at least 50 renormalization periods".into()));
    }
    let op = IntervalOperator::new(kernel, half_length, cells);
    let m = op.len();
    let mut u = match initial {
        Some(p) if p.len() == m && p.iter().all(|&v| v > T::zero()) => p.to_vec(),
        Some(_) => return Err(LyapunovError::InvalidArgument(format!("initial profile needs {m} positive values"))),
        None => op.cosine_profile(),
    };
    let norm0 = u.iter().copied().fold(T::zero(), T::max);
    u.iter_mut().for_each(|v| *v /= norm0);

    let intervals =
        WINDOWS * ((horizon / (renorm_every * T::from_usize_exact(WINDOWS))).round().to_usize().unwrap_or(0)).max(10);
    let max_step = T::lit(0.05).min(T::lit(0.5) / (T::lit(2.0) * d + a.sup_abs()).max(T::epsilon()));
    let substeps = (renorm_every / max_step).ceil().to_usize().unwrap_or(1).max(1);
    let dt = renorm_every / T::from_usize_exact(substeps);

    let rhs = |t: T, v: &[T], out: &mut [T]| {
        op.apply(v, out);
        let at = a.eval(t);
        for (o, &vi) in out.iter_mut().zip(v) {
            *o = d * (*o - vi) + at * vi;
        }
    };
    let mut k1 = vec![T::zero(); m];
    let mut k2 = vec![T::zero(); m];
    let mut k3 = vec![T::zero(); m];
    let mut k4 = vec![T::zero(); m];
    let mut tmp = vec![T::zero(); m];
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let tiny = T::min_positive_value() * T::lit(1e6);

    let mut log_norms = Vec::with_capacity(intervals);
    for r in 0..intervals {
        for s in 0..substeps {
            let t = renorm_every * T::from_usize_exact(r) + dt * T::from_usize_exact(s);
            rhs(t, &u, &mut k1);
            for i in 0..m {
                tmp[i] = u[i] + half * dt * k1[i];
            }
            rhs(t + half * dt, &tmp, &mut k2);
            for i in 0..m {
                tmp[i] = u[i] + half * dt * k2[i];
            }
            rhs(t + half * dt, &tmp, &mut k3);
            for i in 0..m {
                tmp[i] = u[i] + dt * k3[i];
            }
            rhs(t + dt, &tmp, &mut k4);
            for i in 0..m {
                u[i] += dt * sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
            }
        }
        let norm = u.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        if !(norm > tiny && norm.is_finite()) {
            return Err(LyapunovError::Degenerate { t: (renorm_every * T::from_usize_exact(r + 1)).as_f64() });
        }
        log_norms.push(norm.ln());
        u.iter_mut().for_each(|v| *v /= norm);
    }

    let total = renorm_every * T::from_usize_exact(intervals);
    let lambda = log_norms.iter().copied().sum::<T>() / total;
    let per_window = intervals / WINDOWS;
    let window_len = renorm_every * T::from_usize_exact(per_window);
    let window_slopes: Vec<T> =
        log_norms.chunks(per_window).map(|c| c.iter().copied().sum::<T>() / window_len).collect();
    let k = T::from_usize_exact(WINDOWS);
    let mean = window_slopes.iter().copied().sum::<T>() / k;
    let var = window_slopes.iter().map(|&s| (s - mean) * (s - mean)).sum::<T>() / (k - T::one());
    Ok(LyapunovEstimate { half_length, lambda, window_slopes, ci_width: T::lit(2.0) * (var / k).sqrt() })
}

/// Principal eigenvalue ρ₁ of (Ku)(x) = ∫_{-L}^{L} κ(x-y) u(y) dy discretized
/// by the trapezoid rule at spacing ≈ `dx` (u = 0 at ±L). Returns ρ₁ and the
/// number of power iterations.
pub fn kernel_principal_eigenvalue<T: Real, K: DispersalKernel<T> + ?Sized>(
    kernel: &K,
    half_length: T,
    dx: T,
) -> Result<(T, usize), LyapunovError> {
    if !(dx > T::zero()) {
        return Err(LyapunovError::InvalidArgument("dx must be positive".into()));
    }
    let cells = (T::lit(2.0) * half_length / dx).round().to_usize().unwrap_or(0);
    check_interval(half_length, cells)?;
    principal_eigenvalue_on(&IntervalOperator::new(kernel, half_length, cells))
}

fn principal_eigenvalue_on<T: Real>(op: &IntervalOperator<T>) -> Result<(T, usize), LyapunovError> {
    let mut v = op.cosine_profile();
    let mut w = vec![T::zero(); v.len()];
    let mut previous = T::nan();
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>();
    for it in 1..=MAX_ITERATIONS {
        op.apply(&v, &mut w);
        let rayleigh = dot(&v, &w) / dot(&v, &v);
        let norm = dot(&w, &w).sqrt();
        if !(norm > T::zero()) {
            return Ok((T::zero(), it));
        }
        for (vi, &wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (rayleigh - previous).abs() < T::lit(RAYLEIGH_TOL) {
            return Ok((rayleigh, it));
        }
        previous = rayleigh;
    }
    Err(LyapunovError::NoConvergence { iterations: MAX_ITERATIONS })
}

/// λ(L) = mean(a) - d (1 - ρ₁(L)) on the default grid. Exact for
/// x-independent a: u = φ(x) exp(∫a - d t + d ρ₁ t) separates.
pub fn separable_exponent<T: Real, K: DispersalKernel<T> + ?Sized>(
    a: &QuasiPeriodicSignal<T>,
    d: T,
    kernel: &K,
    half_length: T,
) -> Result<T, LyapunovError> {
    check_interval(half_length, DEFAULT_CELLS)?;
    let (rho, _) = principal_eigenvalue_on(&IntervalOperator::new(kernel, half_length, DEFAULT_CELLS))?;
    Ok(a.mean_level() - d * (T::one() - rho))
}

/// Smallest probed length below which the search does not go.
pub const LSTAR_MIN: f64 = 0.1;
const LSTAR_TOL: f64 = 0.01;

/// Smallest L with λ(L) > 0, to within 0.01, or `None` when λ(Lmax) ≤ 0.
pub fn find_lstar<T: Real, K: DispersalKernel<T> + ?Sized>(
    a: &QuasiPeriodicSignal<T>,
    d: T,
    kernel: &K,
    l_max: T,
) -> Result<Option<T>, LyapunovError> {
    let lo_probe = T::lit(LSTAR_MIN);
    if !(l_max >= lo_probe) {
        return Err(LyapunovError::InvalidArgument(format!("Lmax must be at least {LSTAR_MIN}")));
    }
    if separable_exponent(a, d, kernel, lo_probe)? > T::zero() {
        return Ok(Some(lo_probe));
    }
    if separable_exponent(a, d, kernel, l_max)? <= T::zero() {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo_probe, l_max);
    while hi - lo > T::lit(LSTAR_TOL) {
        let mid = T::lit(0.5) * (lo + hi);
        if separable_exponent(a, d, kernel, mid)? > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
