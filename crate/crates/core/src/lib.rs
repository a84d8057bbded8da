//! Weak measurements on 1D grids: weak values through the operator route,
//! the kernel (path-sum) route and the semiclassical route, full system ⊗
//! probe pointer dynamics, propagator inference from weak values, a
//! discrete-mode interferometer model, and the coarse-grained classical
//! limit.
//!
//! Everything numerical is generic over the floating-point scalar through
//! [`Real`]; `f64` aliases for the main types are exported at the crate
//! root. All engines work in natural units by default (`hbar = m = 1`),
//! configurable through [`PhysicalParams`].

pub mod classical_limit;
pub mod coupling;
pub mod error;
mod fft;
pub mod grid;
pub mod interferometer;
pub mod potential;
pub mod propagators;
pub mod scalar;
pub mod semiclassical;
pub mod state;
pub mod weak_values;

pub use error::{Error, Result};
pub use grid::{ConfigFunction, Grid, PhysicalParams};
pub use potential::{Free, Harmonic, Potential, QuarticDoubleWell};
pub use scalar::Real;
pub use state::WaveFunction;

/// Artifact version embedded in CLI outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Working-precision aliases for the main types.
pub type Grid64 = grid::Grid<f64>;
pub type ConfigFunction64 = grid::ConfigFunction<f64>;
pub type PhysicalParams64 = grid::PhysicalParams<f64>;
pub type WaveFunction64 = state::WaveFunction<f64>;
pub type KernelMatrix64 = propagators::KernelMatrix<f64>;
pub type WeakValue64 = weak_values::WeakValue<f64>;
pub type WeakMeasurementSetup64 = weak_values::WeakMeasurementSetup<f64>;
pub type CoupledState64 = coupling::CoupledState<f64>;
pub type ClassicalTrajectory64 = semiclassical::ClassicalTrajectory<f64>;
pub type ModeNetwork64 = interferometer::ModeNetwork<f64>;
pub type ClassicalEnsemble64 = classical_limit::ClassicalEnsemble<f64>;
