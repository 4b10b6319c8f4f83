//! Numerical laboratory for the nonlocal-dispersal KPP equation with two
//! free boundaries in time almost-periodic media.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the CLI and the acceptance suite use.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ap_ode;
pub mod experiment;
pub mod forcing;
pub mod kernels;
pub mod lyapunov;
pub mod quadrature;
pub mod scalar;
pub mod solver;

pub use scalar::{ExtReal, Real};

pub type Kernel = kernels::KernelSpec<f64>;
pub type Truncated = kernels::TruncatedKernel<f64>;
pub type ActiveKernel = kernels::AnyKernel<f64>;
pub type Signal = forcing::QuasiPeriodicSignal<f64>;
pub type Growth = forcing::GrowthLaw<f64>;
pub type Envelope = forcing::SpatialEnvelope<f64>;
pub type ApTrajectory = ap_ode::ApSolution<f64>;
pub type Config = solver::RunConfig<f64>;
pub type State = solver::SimState<f64>;
pub type Record = solver::RunRecord<f64>;
pub type Lyapunov = lyapunov::LyapunovEstimate<f64>;
pub type Speed = analysis::SpeedEstimate<f64>;
pub type Target = analysis::SpeedTarget<f64>;
