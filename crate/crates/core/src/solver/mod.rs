//! Explicit time stepping of the free-boundary problem
//!
//! ```text
//! u_t = d ∫_g^h κ(x-y) u(t,y) dy - d u + u f(t,x,u),   g(t) < x < h(t)
//! h'  =  μ ∫_g^h u(t,x) K̄(h - x) dx
//! g'  = -μ ∫_g^h u(t,x) K̄(x - g) dx
//! ```
//!
//! on a fixed uniform grid over `[-X, X]`. The fronts are continuous scalars;
//! u vanishes at every node outside `(g, h)`.

mod convolution;

use std::time::Instant;

use thiserror::Error;

pub use convolution::ConvolutionMethod;
use convolution::Convolver;

use crate::forcing::{GrowthLaw, SpatialEnvelope};
use crate::kernels::{AnyKernel, DispersalKernel};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("front reached the edge of the computational window at t = {t} (g = {g}, h = {h})")]
    WindowExhausted { t: f64, g: f64, h: f64 },
    #[error("stability violation at t = {t}: u = {value} outside [0, {bound}]")]
    StabilityViolation { t: f64, value: f64, bound: f64 },
}

/// Initial profile on `[-h0, h0]`, vanishing at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialShape<T> {
    /// A (1 - (x/h0)²).
    Parabolic { amplitude: T },
    /// A cos(πx / (2 h0)).
    Cosine { amplitude: T },
}

impl<T: Real> InitialShape<T> {
    pub fn amplitude(&self) -> T {
        match *self {
            Self::Parabolic { amplitude } | Self::Cosine { amplitude } => amplitude,
        }
    }

    pub fn eval(&self, x: T, h0: T) -> T {
        if x.abs() >= h0 {
            return T::zero();
        }
        let q = x / h0;
        match *self {
            Self::Parabolic { amplitude } => amplitude * (T::one() - q * q),
            Self::Cosine { amplitude } => amplitude * (T::FRAC_PI_2() * q).cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub d: T,
    pub mu: T,
    pub h0: T,
    pub kernel: AnyKernel<T>,
    pub growth: GrowthLaw<T>,
    pub envelope: Option<SpatialEnvelope<T>>,
    pub initial: InitialShape<T>,
    pub dx: T,
    /// X: the grid covers `[-X, X]`.
    pub window_halfwidth: T,
    pub dt: T,
    pub horizon: T,
    /// Cadence of the (t, g, h, umax, mass) series.
    pub record_every: T,
    /// Cadence of full u-profile snapshots.
    pub snapshot_every: T,
    pub convolution: ConvolutionMethod,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SolverError> {
    Err(SolverError::InvalidConfig(msg.into()))
}

impl<T: Real> RunConfig<T> {
    /// Saturation level M of the (possibly enveloped) growth law.
    pub fn saturation(&self) -> T {
        self.growth.saturation() * self.envelope.map_or(T::one(), |e| e.sup())
    }

    /// max(sup u0, M).
    pub fn solution_bound(&self) -> T {
        self.initial.amplitude().max(self.saturation())
    }

    /// dt ≤ 0.2 / (2d + sup|a| + sup b · M).
    pub fn stability_bound(&self) -> T {
        let sup_a = self.growth.intrinsic().sup_abs() * self.envelope.map_or(T::one(), |e| e.sup());
        let lip = T::lit(2.0) * self.d + sup_a + self.growth.crowding().sup_bound() * self.solution_bound();
        T::lit(0.2) / lip
    }

    /// Distance z with K̄(z) < 1e-12, capped at 50·dx for kernels without an
    /// exponential tail.
    pub fn tail_margin(&self) -> T {
        let z = self.kernel.reach(T::lit(1e-12));
        if self.kernel.exponential_tail() {
            z
        } else {
            z.min(T::lit(50.0) * self.dx)
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let finite = [
            self.d,
            self.mu,
            self.h0,
            self.dx,
            self.window_halfwidth,
            self.dt,
            self.horizon,
            self.record_every,
            self.snapshot_every,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return invalid("all numeric parameters must be finite");
        }
        if !(self.d > T::zero()) {
            return invalid("d must be positive");
        }
        if self.mu < T::zero() {
            return invalid("mu must be non-negative");
        }
        if !(self.h0 > T::zero()) {
            return invalid("h0 must be positive");
        }
        if !(self.initial.amplitude() > T::zero()) {
            return invalid("initial amplitude must be positive");
        }
        if !(self.dx > T::zero()) {
            return invalid("dx must be positive");
        }
        if !(self.dt > T::zero()) {
            return invalid("dt must be positive");
        }
        if self.horizon < T::zero() {
            return invalid("horizon must be non-negative");
        }
        if !(self.record_every > T::zero() && self.snapshot_every > T::zero()) {
            return invalid("record_every and snapshot_every must be positive");
        }
        let bound = self.stability_bound();
        if self.dt > bound {
            return invalid(format!("dt = {} exceeds the stability bound {}", self.dt, bound));
        }
        let margin = self.tail_margin();
        if !(self.window_halfwidth > self.h0 + margin) {
            return invalid(format!(
                "window half-width {} must exceed h0 + tail margin = {}",
                self.window_halfwidth,
                self.h0 + margin
            ));
        }
        let cells = (self.window_halfwidth / self.dx).round();
        if cells > T::lit(f64::from(1u32 << 25)) {
            return invalid("grid too large");
        }
        Ok(())
    }
}

/// Uniform symmetric grid: node j sits at (j - half)·dx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    half: usize,
    dx: T,
}

impl<T: Real> Grid<T> {
    pub fn new(window_halfwidth: T, dx: T) -> Self {
        let half = (window_halfwidth / dx).round().to_usize().unwrap_or(0).max(1);
        Self { half, dx }
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    /// Half-width actually covered, X rounded to whole cells.
    pub fn halfwidth(&self) -> T {
        T::from_usize_exact(self.half) * self.dx
    }

    #[inline]
    pub fn x(&self, j: usize) -> T {
        if j >= self.half {
            T::from_usize_exact(j - self.half) * self.dx
        } else {
            -(T::from_usize_exact(self.half - j) * self.dx)
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len()).map(|j| self.x(j))
    }

    fn index_floor(&self, x: T) -> isize {
        let k = (x / self.dx).floor().to_isize().unwrap_or(0);
        k + self.half as isize
    }

    /// Indices of the nodes strictly inside `(g, h)`, if any.
    pub fn support(&self, g: T, h: T) -> Option<(usize, usize)> {
        let n = self.len() as isize;
        let mut lo = (self.index_floor(g) + 1).clamp(0, n - 1);
        while lo > 0 && self.x(lo as usize - 1) > g {
            lo -= 1;
        }
        while lo < n && self.x(lo as usize) <= g {
            lo += 1;
        }
        let mut hi = self.index_floor(h).clamp(0, n - 1);
        while hi + 1 < n && self.x(hi as usize + 1) < h {
            hi += 1;
        }
        while hi >= 0 && self.x(hi as usize) >= h {
            hi -= 1;
        }
        if lo > hi || lo >= n || hi < 0 {
            None
        } else {
            Some((lo as usize, hi as usize))
        }
    }

    /// Trapezoid weights on the support, with the partial end cells closed by
    /// linear interpolation to u = 0 exactly at g and h.
    pub fn weights(&self, g: T, h: T, lo: usize, hi: usize) -> (T, T) {
        let half = T::lit(0.5);
        if lo == hi {
            let w = half * (h - g);
            return (w, w);
        }
        (half * (self.dx + self.x(lo) - g), half * (self.dx + h - self.x(hi)))
    }
}

/// Time, fronts, and nodal density over the whole window.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    pub t: T,
    pub g: T,
    pub h: T,
    pub u: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow<T> {
    pub t: T,
    pub g: T,
    pub h: T,
    pub umax: T,
    pub mass: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub t: T,
    pub x: Vec<T>,
    pub u: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Horizon,
    WindowExhausted { t: f64 },
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::Horizon => write!(f, "horizon"),
            Termination::WindowExhausted { t } => write!(f, "window_exhausted at t={t}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord<T> {
    pub series: Vec<SeriesRow<T>>,
    pub snapshots: Vec<Snapshot<T>>,
    pub config: RunConfig<T>,
    pub termination: Termination,
    pub steps: usize,
    /// Step actually used: horizon / steps, never above the configured dt.
    pub dt_used: T,
    pub wall_time_secs: f64,
}

impl<T: Real> RunRecord<T> {
    pub fn final_row(&self) -> &SeriesRow<T> {
        self.series.last().expect("record holds at least the initial row")
    }
}

/// Owns the discretization and scratch buffers for one configuration.
pub struct Solver<T: Real> {
    cfg: RunConfig<T>,
    grid: Grid<T>,
    conv: Convolver<T>,
    envelope: Option<Vec<T>>,
    kernel_scale: T,
    bound: T,
    margin: T,
    weighted: Vec<T>,
    conv_out: Vec<T>,
}

impl<T: Real> Solver<T> {
    pub fn new(cfg: RunConfig<T>) -> Result<Self, SolverError> {
        cfg.validate()?;
        Self::build(cfg)
    }

    fn build(cfg: RunConfig<T>) -> Result<Self, SolverError> {
        let grid = Grid::new(cfg.window_halfwidth, cfg.dx);
        let n = grid.len();
        let dx = grid.dx();
        let mut table: Vec<T> = (0..n).map(|k| cfg.kernel.density(T::from_usize_exact(k) * dx)).collect();
        // Rescale the sampled kernel so its discrete mass over the window's
        // lag range equals the continuum mass there; the trapezoid rule alone
        // misses it by O(dx²) at a kink and would shift the saturation level.
        let discrete: T = dx * (table[0] + T::lit(2.0) * table[1..].iter().copied().sum::<T>());
        let reach = T::from_usize_exact(n - 1) * dx;
        let target = cfg.kernel.mass() - T::lit(2.0) * cfg.kernel.tail_mass(reach);
        let kernel_scale = if discrete > T::zero() { target / discrete } else { T::one() };
        for w in &mut table {
            *w *= kernel_scale;
        }
        let conv = Convolver::new(table, cfg.convolution);
        let envelope = cfg.envelope.map(|e| grid.nodes().map(|x| e.eval(x)).collect());
        let bound = cfg.solution_bound();
        let margin = cfg.tail_margin();
        Ok(Self {
            grid,
            conv,
            envelope,
            kernel_scale,
            bound,
            margin,
            weighted: vec![T::zero(); n],
            conv_out: vec![T::zero(); n],
            cfg,
        })
    }

    pub fn config(&self) -> &RunConfig<T> {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// Factor applied to the sampled kernel to restore its mass.
    pub fn kernel_scale(&self) -> T {
        self.kernel_scale
    }

    pub fn convolution(&self) -> ConvolutionMethod {
        self.conv.method()
    }

    /// Swaps the convolution path, keeping everything else.
    pub fn with_convolution(mut self, method: ConvolutionMethod) -> Result<Self, SolverError> {
        self.cfg.convolution = method;
        Self::build(self.cfg)
    }

    pub fn initial_state(&self) -> SimState<T> {
        let h0 = self.cfg.h0;
        let u = self.grid.nodes().map(|x| self.cfg.initial.eval(x, h0)).collect();
        SimState { t: T::zero(), g: -h0, h: h0, u }
    }

    fn check_window(&self, t: T, g: T, h: T) -> Result<(), SolverError> {
        let edge = self.grid.halfwidth() - self.margin;
        if h > edge || g < -edge {
            return Err(SolverError::WindowExhausted { t: t.as_f64(), g: g.as_f64(), h: h.as_f64() });
        }
        Ok(())
    }

    /// Quadrature-weighted density w_j u_j; zero off the support.
    fn weigh(&mut self, s: &SimState<T>) -> Option<(usize, usize)> {
        let support = self.grid.support(s.g, s.h);
        self.weighted.iter_mut().for_each(|w| *w = T::zero());
        if let Some((lo, hi)) = support {
            let (wl, wr) = self.grid.weights(s.g, s.h, lo, hi);
            for j in lo..=hi {
                self.weighted[j] = self.grid.dx() * s.u[j];
            }
            self.weighted[lo] = wl * s.u[lo];
            if hi > lo {
                self.weighted[hi] = wr * s.u[hi];
            }
        }
        support
    }

    /// d(Q[u] - u) + u f(t,x,u) at nodes inside (g, h); zero elsewhere.
    pub fn nonlocal_rhs(&mut self, s: &SimState<T>) -> Result<Vec<T>, SolverError> {
        let mut out = vec![T::zero(); self.grid.len()];
        self.rhs_into(s, &mut out)?;
        Ok(out)
    }

    fn rhs_into(&mut self, s: &SimState<T>, out: &mut [T]) -> Result<(), SolverError> {
        self.check_window(s.t, s.g, s.h)?;
        out.iter_mut().for_each(|v| *v = T::zero());
        let Some((lo, hi)) = self.weigh(s) else {
            return Ok(());
        };
        let weighted = std::mem::take(&mut self.weighted);
        self.conv.apply(&weighted, lo, hi, &mut self.conv_out);
        self.weighted = weighted;
        let a = self.cfg.growth.intrinsic().eval(s.t);
        let b = self.cfg.growth.crowding().eval(s.t);
        let d = self.cfg.d;
        for j in lo..=hi {
            let u = s.u[j];
            let a_here = self.envelope.as_ref().map_or(a, |e| a * e[j]);
            out[j] = d * (self.conv_out[j] - u) + u * (a_here - b * u);
        }
        Ok(())
    }

    /// (g', h') from the outward-flux laws.
    pub fn boundary_flux(&self, s: &SimState<T>) -> (T, T) {
        let Some((lo, hi)) = self.grid.support(s.g, s.h) else {
            return (T::zero(), T::zero());
        };
        let (wl, wr) = self.grid.weights(s.g, s.h, lo, hi);
        let mut right = T::zero();
        let mut left = T::zero();
        for j in lo..=hi {
            let u = s.u[j];
            if u == T::zero() {
                continue;
            }
            let w = if j == lo {
                wl
            } else if j == hi {
                wr
            } else {
                self.grid.dx()
            };
            let x = self.grid.x(j);
            right += w * u * self.cfg.kernel.tail_mass(s.h - x);
            left += w * u * self.cfg.kernel.tail_mass(x - s.g);
        }
        (-self.cfg.mu * left, self.cfg.mu * right)
    }

    /// One explicit midpoint step of density and fronts together.
    pub fn step(&mut self, s: &SimState<T>) -> Result<SimState<T>, SolverError> {
        let dt = self.cfg.dt;
        self.advance(s, dt, s.t + dt)
    }

    // Three arrays share one index range; zipping them reads worse.
    #[allow(clippy::needless_range_loop)]
    fn advance(&mut self, s: &SimState<T>, dt: T, t_next: T) -> Result<SimState<T>, SolverError> {
        let half = T::lit(0.5) * dt;
        let n = self.grid.len();
        let support = self.grid.support(s.g, s.h);

        let mut k1 = vec![T::zero(); n];
        self.rhs_into(s, &mut k1)?;
        let (gd1, hd1) = self.boundary_flux(s);
        let mut mid = SimState {
            t: s.t + half,
            g: s.g.min(s.g + half * gd1),
            h: s.h.max(s.h + half * hd1),
            u: vec![T::zero(); n],
        };
        if let Some((lo, hi)) = support {
            for j in lo..=hi {
                mid.u[j] = s.u[j] + half * k1[j];
            }
        }

        let mut k2 = k1;
        self.rhs_into(&mid, &mut k2)?;
        let (gd2, hd2) = self.boundary_flux(&mid);
        let mut next = SimState { t: t_next, g: s.g.min(s.g + dt * gd2), h: s.h.max(s.h + dt * hd2), u: mid.u };
        next.u.iter_mut().for_each(|v| *v = T::zero());
        // Nodes newly covered by (g, h) enter at the boundary value 0.
        if let Some((lo, hi)) = support {
            for j in lo..=hi {
                next.u[j] = s.u[j] + dt * k2[j];
            }
        }
        self.check_bounds(&next)?;
        self.check_window(next.t, next.g, next.h)?;
        Ok(next)
    }

    fn check_bounds(&self, s: &SimState<T>) -> Result<(), SolverError> {
        let upper = self.bound * (T::one() + T::lit(1e-6));
        let lower = T::lit(-1e-10);
        for &v in &s.u {
            if !(v >= lower && v <= upper) {
                return Err(SolverError::StabilityViolation {
                    t: s.t.as_f64(),
                    value: v.as_f64(),
                    bound: self.bound.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// (t, g, h, sup u, ∫u) with the same trapezoid weights as the operator.
    pub fn series_row(&self, s: &SimState<T>) -> SeriesRow<T> {
        let umax = s.u.iter().copied().fold(T::zero(), T::max);
        let mass = match self.grid.support(s.g, s.h) {
            None => T::zero(),
            Some((lo, hi)) => {
                let (wl, wr) = self.grid.weights(s.g, s.h, lo, hi);
                let interior: T = if hi > lo + 1 { s.u[lo + 1..hi].iter().copied().sum() } else { T::zero() };
                let ends = if hi > lo { wl * s.u[lo] + wr * s.u[hi] } else { wl * s.u[lo] };
                self.grid.dx() * interior + ends
            }
        };
        SeriesRow { t: s.t, g: s.g, h: s.h, umax, mass }
    }

    fn snapshot(&self, s: &SimState<T>) -> Snapshot<T> {
        Snapshot { t: s.t, x: self.grid.nodes().collect(), u: s.u.clone() }
    }

    /// Steps to the horizon, recording the series every `record_every` and a
    /// snapshot every `snapshot_every`. Window exhaustion ends the run early
    /// with the reason recorded; a stability violation is an error.
    pub fn run(&mut self) -> Result<RunRecord<T>, SolverError> {
        let started = Instant::now();
        let horizon = self.cfg.horizon;
        let steps = if horizon > T::zero() {
            (horizon / self.cfg.dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1)
        } else {
            0
        };
        let dt = if steps > 0 { horizon / T::from_usize_exact(steps) } else { self.cfg.dt };
        let stride = |every: T| (every / dt).round().to_usize().unwrap_or(1).max(1);
        let record_stride = stride(self.cfg.record_every);
        let snapshot_stride = stride(self.cfg.snapshot_every);

        let mut state = self.initial_state();
        let mut series = vec![self.series_row(&state)];
        let mut snapshots = vec![self.snapshot(&state)];
        let mut termination = Termination::Horizon;
        let mut taken = 0;
        for n in 1..=steps {
            let t_next = if n == steps { horizon } else { dt * T::from_usize_exact(n) };
            match self.advance(&state, dt, t_next) {
                Ok(next) => state = next,
                Err(SolverError::WindowExhausted { t, .. }) => {
                    termination = Termination::WindowExhausted { t };
                    break;
                }
                Err(e) => return Err(e),
            }
            taken = n;
            if n % record_stride == 0 || n == steps {
                series.push(self.series_row(&state));
            }
            if n % snapshot_stride == 0 || n == steps {
                snapshots.push(self.snapshot(&state));
            }
        }
        if series.last().map(|r| r.t) != Some(state.t) {
            series.push(self.series_row(&state));
            snapshots.push(self.snapshot(&state));
        }
        Ok(RunRecord {
            series,
            snapshots,
            config: self.cfg.clone(),
            termination,
            steps: taken,
            dt_used: dt,
            wall_time_secs: started.elapsed().as_secs_f64(),
        })
    }
}

/// Validates `cfg`, builds a solver and runs it.
pub fn run<T: Real>(cfg: &RunConfig<T>) -> Result<RunRecord<T>, SolverError> {
    Solver::new(cfg.clone())?.run()
}
