//! Dispersal kernels: analytic densities, tail masses, half first moments,
//! validators, and smooth compactly supported truncations.
//!
//! Every kernel is even and, for the base families, normalized to unit mass.
//! The tail mass `K̄(z) = ∫_z^∞ κ(s) ds` is what the front laws actually
//! consume: by symmetry `∫_h^∞ κ(x - y) dy = K̄(h - x)`, so the outward flux
//! reduces to a single integral over the occupied interval.

use std::fmt::{self, Debug};

use thiserror::Error;

use crate::quadrature::{integrate, integrate_to_infinity};
use crate::scalar::{ExtReal, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel is not thin-tailed: the half first moment diverges")]
    NotThinTailed,
    #[error("quadrature box {quad_box} too small: tail mass {tail:e} exceeds 1e-10")]
    BoxTooSmall { quad_box: f64, tail: f64 },
}

/// Common interface of base and truncated kernels.
pub trait DispersalKernel<T: Real>: Debug + Send + Sync {
    /// κ(x).
    fn density(&self, x: T) -> T;

    /// K̄(z) = ∫_z^∞ κ(s) ds for z ≥ 0. Negative arguments are reflected:
    /// K̄(-z) = mass - K̄(z).
    fn tail_mass(&self, z: T) -> T;

    /// ∫_0^∞ x κ(x) dx, or `Infinite` when it diverges.
    fn half_first_moment(&self) -> ExtReal<T>;

    /// ∫_ℝ κ. Exactly one for the base families.
    fn mass(&self) -> T;

    /// Whether κ(x) ≤ e^{-α|x|} for large |x| holds for the family.
    fn exponential_tail(&self) -> bool;

    /// Smallest z ≥ 0 with K̄(z) < tol, located by doubling and bisection.
    fn reach(&self, tol: T) -> T {
        let mut hi = T::one();
        let cap = T::lit(1e15);
        while self.tail_mass(hi) >= tol {
            hi *= T::lit(2.0);
            if hi > cap {
                return cap;
            }
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = T::lit(0.5) * (lo + hi);
            if self.tail_mass(mid) < tol {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= T::epsilon() * hi {
                break;
            }
        }
        hi
    }
}

/// Analytic kernel families, each normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec<T> {
    /// (1/(σ√(2π))) exp(-x²/(2σ²)).
    Gaussian { sigma: T },
    /// (β/2) exp(-β|x|).
    Laplace { beta: T },
    /// Biweight (15/(16r)) (1 - (x/r)²)² on |x| < r; C¹ at the support edge.
    CompactBump { radius: T },
    /// ((p-1)/(2s)) (1 + |x|/s)^{-p}; thin-tailed iff p > 2.
    PowerLawTail { exponent: T, scale: T },
}

fn positive<T: Real>(name: &str, v: T) -> Result<T, KernelError> {
    if v.is_finite() && v > T::zero() {
        Ok(v)
    } else {
        Err(KernelError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl<T: Real> KernelSpec<T> {
    pub fn gaussian(sigma: T) -> Result<Self, KernelError> {
        Ok(Self::Gaussian { sigma: positive("sigma", sigma)? })
    }

    pub fn laplace(beta: T) -> Result<Self, KernelError> {
        Ok(Self::Laplace { beta: positive("beta", beta)? })
    }

    pub fn compact_bump(radius: T) -> Result<Self, KernelError> {
        Ok(Self::CompactBump { radius: positive("radius", radius)? })
    }

    pub fn power_law(exponent: T, scale: T) -> Result<Self, KernelError> {
        let scale = positive("scale", scale)?;
        if !(exponent.is_finite() && exponent > T::one()) {
            return Err(KernelError::InvalidParameter(format!(
                "power-law exponent must exceed 1 for integrability, got {exponent}"
            )));
        }
        Ok(Self::PowerLawTail { exponent, scale })
    }

    /// Re-checks the constructor invariants (useful for values built by hand).
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            Self::Gaussian { sigma } => Self::gaussian(sigma).map(|_| ()),
            Self::Laplace { beta } => Self::laplace(beta).map(|_| ()),
            Self::CompactBump { radius } => Self::compact_bump(radius).map(|_| ()),
            Self::PowerLawTail { exponent, scale } => Self::power_law(exponent, scale).map(|_| ()),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Laplace { .. } => "laplace",
            Self::CompactBump { .. } => "compact_bump",
            Self::PowerLawTail { .. } => "power_law",
        }
    }

    pub fn is_thin_tailed(&self) -> bool {
        match *self {
            Self::PowerLawTail { exponent, .. } => exponent > T::lit(2.0),
            _ => true,
        }
    }

    /// ∫_0^a x κ(x) dx in closed form.
    pub fn partial_first_moment(&self, a: T) -> T {
        let a = a.max(T::zero());
        let one = T::one();
        let two = T::lit(2.0);
        match *self {
            Self::Gaussian { sigma } => {
                let q = a / sigma;
                sigma / (two * T::PI()).sqrt() * (one - (-q * q / two).exp())
            }
            Self::Laplace { beta } => {
                let q = beta * a;
                (one - (-q).exp() * (one + q)) / (two * beta)
            }
            Self::CompactBump { radius } => {
                let w = (a / radius).min(one);
                let r = one - w * w;
                T::lit(15.0 / 16.0) * radius * (one - r * r * r) / T::lit(6.0)
            }
            Self::PowerLawTail { exponent: p, scale: s } => {
                let c = (p - one) / (two * s);
                let big = one + a / s;
                // ∫_0^A v (1+v)^{-p} dv = ∫ (1+v)^{1-p} - (1+v)^{-p}
                let first =
                    if (p - two).abs() < T::lit(1e-12) { big.ln() } else { (big.powf(two - p) - one) / (two - p) };
                let second = (big.powf(one - p) - one) / (one - p);
                c * s * s * (first - second)
            }
        }
    }
}

impl<T: Real> DispersalKernel<T> for KernelSpec<T> {
    fn density(&self, x: T) -> T {
        let r = x.abs();
        let one = T::one();
        let two = T::lit(2.0);
        match *self {
            Self::Gaussian { sigma } => {
                let q = r / sigma;
                (-q * q / two).exp() / (sigma * (two * T::PI()).sqrt())
            }
            Self::Laplace { beta } => beta / two * (-beta * r).exp(),
            Self::CompactBump { radius } => {
                if r >= radius {
                    T::zero()
                } else {
                    let w = r / radius;
                    let q = one - w * w;
                    T::lit(15.0 / 16.0) / radius * q * q
                }
            }
            Self::PowerLawTail { exponent: p, scale: s } => (p - one) / (two * s) * (one + r / s).powf(-p),
        }
    }

    fn tail_mass(&self, z: T) -> T {
        if z < T::zero() {
            return self.mass() - self.tail_mass(-z);
        }
        let one = T::one();
        let half = T::lit(0.5);
        match *self {
            Self::Gaussian { sigma } => half * (z / (sigma * T::SQRT_2())).erfc(),
            Self::Laplace { beta } => half * (-beta * z).exp(),
            Self::CompactBump { radius } => {
                if z >= radius {
                    return T::zero();
                }
                let w = z / radius;
                let v = one - w;
                v * v * v * (T::lit(8.0) + T::lit(9.0) * w + T::lit(3.0) * w * w) / T::lit(16.0)
            }
            Self::PowerLawTail { exponent: p, scale: s } => half * (one + z / s).powf(one - p),
        }
    }

    fn half_first_moment(&self) -> ExtReal<T> {
        let two = T::lit(2.0);
        match *self {
            Self::Gaussian { sigma } => ExtReal::Finite(sigma / (two * T::PI()).sqrt()),
            Self::Laplace { beta } => ExtReal::Finite(T::one() / (two * beta)),
            Self::CompactBump { radius } => ExtReal::Finite(T::lit(5.0 / 32.0) * radius),
            Self::PowerLawTail { exponent: p, scale: s } => {
                if p > two {
                    ExtReal::Finite(s / (two * (p - two)))
                } else {
                    ExtReal::Infinite
                }
            }
        }
    }

    fn mass(&self) -> T {
        T::one()
    }

    fn exponential_tail(&self) -> bool {
        !matches!(self, Self::PowerLawTail { .. })
    }
}

/// Smooth compactly supported truncation κₙ = κ·χₙ.
///
/// χₙ(x) = 1 for |x| ≤ n - w, 0 for |x| ≥ n, and the C¹ smoothstep
/// 3s² - 2s³ with s = (n - |x|)/w on the ramp. For a fixed ramp width the
/// family is nested: κₙ ≤ κₙ' ≤ κ whenever n < n'.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedKernel<T> {
    base: KernelSpec<T>,
    cutoff: T,
    width: T,
    mass: T,
    half_moment: T,
}

const RAMP_TOL: f64 = 1e-14;

impl<T: Real> TruncatedKernel<T> {
    pub fn base(&self) -> &KernelSpec<T> {
        &self.base
    }

    pub fn cutoff(&self) -> T {
        self.cutoff
    }

    pub fn width(&self) -> T {
        self.width
    }

    /// χₙ at distance `r` from the origin.
    pub fn cutoff_weight(&self, r: T) -> T {
        let r = r.abs();
        let inner = self.cutoff - self.width;
        if r <= inner {
            T::one()
        } else if r >= self.cutoff {
            T::zero()
        } else {
            let s = (self.cutoff - r) / self.width;
            s * s * (T::lit(3.0) - T::lit(2.0) * s)
        }
    }

    fn ramp_integral(&self, from: T, weight_by_x: bool) -> T {
        let lo = from.max(self.cutoff - self.width);
        if lo >= self.cutoff {
            return T::zero();
        }
        integrate(
            |x: T| {
                let v = self.base.density(x) * self.cutoff_weight(x);
                if weight_by_x {
                    v * x
                } else {
                    v
                }
            },
            lo,
            self.cutoff,
            T::lit(RAMP_TOL),
        )
    }
}

/// Builds κₙ with cutoff `n` and ramp width `width`; requires n > width > 0.
pub fn truncate<T: Real>(k: &KernelSpec<T>, n: T, width: T) -> Result<TruncatedKernel<T>, KernelError> {
    k.validate()?;
    if !(width > T::zero() && n > width && n.is_finite()) {
        return Err(KernelError::InvalidParameter(format!(
            "truncation needs cutoff > width > 0, got cutoff {n}, width {width}"
        )));
    }
    let mut t = TruncatedKernel { base: *k, cutoff: n, width, mass: T::zero(), half_moment: T::zero() };
    let inner = n - width;
    let half_mass = (k.tail_mass(T::zero()) - k.tail_mass(inner)) + t.ramp_integral(inner, false);
    t.mass = T::lit(2.0) * half_mass;
    t.half_moment = k.partial_first_moment(inner) + t.ramp_integral(inner, true);
    Ok(t)
}

impl<T: Real> DispersalKernel<T> for TruncatedKernel<T> {
    fn density(&self, x: T) -> T {
        self.base.density(x) * self.cutoff_weight(x)
    }

    fn tail_mass(&self, z: T) -> T {
        if z < T::zero() {
            return self.mass - self.tail_mass(-z);
        }
        if z >= self.cutoff {
            return T::zero();
        }
        let inner = self.cutoff - self.width;
        let flat = if z < inner { self.base.tail_mass(z) - self.base.tail_mass(inner) } else { T::zero() };
        flat + self.ramp_integral(z, false)
    }

    fn half_first_moment(&self) -> ExtReal<T> {
        ExtReal::Finite(self.half_moment)
    }

    fn mass(&self) -> T {
        self.mass
    }

    fn exponential_tail(&self) -> bool {
        true
    }
}

/// Either a base kernel or one of its truncations.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyKernel<T> {
    Base(KernelSpec<T>),
    Truncated(TruncatedKernel<T>),
}

impl<T: Real> AnyKernel<T> {
    pub fn describe(&self) -> String {
        match self {
            AnyKernel::Base(k) => format!("{k:?}"),
            AnyKernel::Truncated(t) => {
                format!("{:?} truncated at {} (ramp {})", t.base, t.cutoff, t.width)
            }
        }
    }
}

impl<T: Real> From<KernelSpec<T>> for AnyKernel<T> {
    fn from(k: KernelSpec<T>) -> Self {
        AnyKernel::Base(k)
    }
}

impl<T: Real> From<TruncatedKernel<T>> for AnyKernel<T> {
    fn from(k: TruncatedKernel<T>) -> Self {
        AnyKernel::Truncated(k)
    }
}

impl<T: Real> DispersalKernel<T> for AnyKernel<T> {
    fn density(&self, x: T) -> T {
        match self {
            AnyKernel::Base(k) => k.density(x),
            AnyKernel::Truncated(k) => k.density(x),
        }
    }

    fn tail_mass(&self, z: T) -> T {
        match self {
            AnyKernel::Base(k) => k.tail_mass(z),
            AnyKernel::Truncated(k) => k.tail_mass(z),
        }
    }

    fn half_first_moment(&self) -> ExtReal<T> {
        match self {
            AnyKernel::Base(k) => k.half_first_moment(),
            AnyKernel::Truncated(k) => k.half_first_moment(),
        }
    }

    fn mass(&self) -> T {
        match self {
            AnyKernel::Base(k) => k.mass(),
            AnyKernel::Truncated(k) => k.mass(),
        }
    }

    fn exponential_tail(&self) -> bool {
        match self {
            AnyKernel::Base(k) => k.exponential_tail(),
            AnyKernel::Truncated(k) => k.exponential_tail(),
        }
    }
}

/// Residual of the identity ∫_{-∞}^0 ∫_0^∞ κ(x-y) dy dx = ∫_0^∞ x κ(x) dx.
///
/// The left side is a nested 2-D quadrature of the density over
/// `[-quad_box, 0] × [0, quad_box]`; the right side is the analytic half
/// first moment. Returns |LHS - M₁| / M₁.
pub fn thin_tail_identity_check<T: Real, K: DispersalKernel<T> + ?Sized>(k: &K, quad_box: T) -> Result<T, KernelError> {
    let m1 = k.half_first_moment().finite().ok_or(KernelError::NotThinTailed)?;
    let tail = k.tail_mass(quad_box);
    if tail >= T::lit(1e-10) {
        return Err(KernelError::BoxTooSmall { quad_box: quad_box.as_f64(), tail: tail.as_f64() });
    }
    let lhs = double_tail_integral(k, quad_box);
    Ok((lhs - m1).abs() / m1)
}

/// Direct 2-D quadrature of ∫_{-B}^0 ∫_0^B κ(x-y) dy dx.
///
/// Both ranges are clipped to the kernel's reach so that narrow kernels are
/// not missed by the first quadrature panels.
pub fn double_tail_integral<T: Real, K: DispersalKernel<T> + ?Sized>(k: &K, quad_box: T) -> T {
    let inner_tol = T::lit(1e-13);
    let r = k.reach(T::lit(1e-17)).min(quad_box);
    integrate(
        |x: T| integrate(|y: T| k.density(x - y), T::zero(), (r + x).min(quad_box), inner_tol),
        -r,
        T::zero(),
        T::lit(1e-11),
    )
}

/// Outcome of checking the kernel hypotheses on a sampled grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub symmetric: bool,
    pub nonnegative: bool,
    pub unit_mass: bool,
    pub positive_at_zero: bool,
    /// Analytic flag: κ decays at least exponentially.
    pub exponential_tail: bool,
    pub thin_tailed: bool,
    pub symmetry_defect: f64,
    pub min_density: f64,
    pub density_at_zero: f64,
    /// 1 - ∫κ.
    pub mass_defect: f64,
    pub samples: usize,
}

impl ValidationReport {
    pub fn all_h1(&self) -> bool {
        self.symmetric && self.nonnegative && self.unit_mass && self.positive_at_zero
    }

    /// Flat `key = value` block.
    pub fn to_key_value(&self) -> String {
        format!(
            "symmetric = {}\nnonnegative = {}\nunit_mass = {}\npositive_at_zero = {}\n\
             exponential_tail = {}\nthin_tailed = {}\nsymmetry_defect = {:e}\nmin_density = {:e}\n\
             density_at_zero = {:e}\nmass_defect = {:e}\nsamples = {}\n",
            self.symmetric,
            self.nonnegative,
            self.unit_mass,
            self.positive_at_zero,
            self.exponential_tail,
            self.thin_tailed,
            self.symmetry_defect,
            self.min_density,
            self.density_at_zero,
            self.mass_defect,
            self.samples
        )
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_key_value())
    }
}

const MASS_TOL: f64 = 1e-8;

/// Checks symmetry, nonnegativity, unit mass and κ(0) > 0 at `samples`
/// points (at least 100) spread over the kernel's effective reach.
pub fn validate_h1<T: Real, K: DispersalKernel<T> + ?Sized>(k: &K, samples: usize) -> ValidationReport {
    let samples = samples.max(100);
    let reach = k.reach(T::lit(1e-12)).min(T::lit(1e4)).max(T::one());
    let mut symmetry_defect = 0.0_f64;
    let mut min_density = f64::INFINITY;
    for i in 0..samples {
        let x = reach * T::from_usize_exact(i) / T::from_usize_exact(samples - 1);
        let right = k.density(x).as_f64();
        let left = k.density(-x).as_f64();
        symmetry_defect = symmetry_defect.max((right - left).abs());
        min_density = min_density.min(right.min(left));
    }
    let tol = T::lit(1e-13);
    let mass = integrate_to_infinity(|x| k.density(x), T::zero(), tol)
        + integrate_to_infinity(|x| k.density(-x), T::zero(), tol);
    let mass_defect = 1.0 - mass.as_f64();
    let density_at_zero = k.density(T::zero()).as_f64();
    ValidationReport {
        symmetric: symmetry_defect <= 1e-14 * density_at_zero.abs().max(1.0),
        nonnegative: min_density >= 0.0,
        unit_mass: mass_defect.abs() < MASS_TOL,
        positive_at_zero: density_at_zero > 0.0,
        exponential_tail: k.exponential_tail(),
        thin_tailed: k.half_first_moment().is_finite(),
        symmetry_defect,
        min_density,
        density_at_zero,
        mass_defect,
        samples,
    }
}
