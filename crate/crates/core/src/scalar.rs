//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::FftNum;

/// Floating point type the simulator is generic over.
///
/// Implemented for `f32` and `f64`. Everything in the crate is written
/// against this trait; the f64 aliases at the crate root are what the CLI
/// and the acceptance suite use.
pub trait Real:
    'static
    + Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + FftNum
    + Default
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Converts an f64 literal. Panics only if the value is not representable,
    /// which cannot happen for finite literals and the two supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

/// A value that may be `+∞` in a distinguished, non-numeric way.
///
/// Used for half first moments and spreading speeds where divergence is
/// decided analytically and must not be confused with a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> ExtReal<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    /// Float view, mapping the distinguished infinity to `T::infinity()`.
    pub fn to_float(self) -> T {
        self.finite().unwrap_or_else(T::infinity)
    }

    pub fn map(self, f: impl FnOnce(T) -> T) -> Self {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(f(v)),
            ExtReal::Infinite => ExtReal::Infinite,
        }
    }
}

impl<T: Display> Display for ExtReal<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => write!(f, "INFINITE"),
        }
    }
}
