//! Crate-wide error type.
//!
//! Physics-layer failures are loud and structured: near-orthogonal
//! postselections, caustics, clipped supports and budget violations all
//! carry the numbers that triggered them.

use num_complex::Complex;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grids do not match")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("sigma = {sigma:.6e} unresolvable on grid (dx = {dx:.6e}, need sigma >= {min_sigma:.6e})")]
    UnresolvableSigma { sigma: f64, dx: f64, min_sigma: f64 },

    #[error("wavepacket support clipped: need 5 sigma of margin (x0 = {x0:.6}, sigma = {sigma:.6}, grid [{x_min:.6}, {x_max:.6}])")]
    SupportClipped { x0: f64, sigma: f64, x_min: f64, x_max: f64 },

    #[error("state is not normalized: norm^2 = {norm_sq:.12}")]
    NotNormalized { norm_sq: f64 },

    #[error("zero-duration kernel is a delta function and has no pointwise value")]
    ZeroDuration,

    #[error("focal point: omega*dt = {omega_dt:.9} is within {tol:.3e} of a multiple of pi")]
    CausticTime { omega_dt: f64, tol: f64 },

    #[error("support escaped grid: edge amplitude {edge_ratio:.3e} of peak exceeds {tol:.3e}")]
    SupportEscaped { edge_ratio: f64, tol: f64 },

    #[error("potential step too large: max |V| dt / hbar = {max_phase:.3e} exceeds {limit:.3e}; increase n_steps")]
    StepTooLarge { max_phase: f64, limit: f64 },

    #[error("path-sum budget exceeded: {terms} intermediate-point terms > {budget}")]
    BudgetExceeded { terms: u128, budget: u128 },

    #[error("denominator underflow: |{denominator}| below floor {floor:.3e} (numerator {numerator})")]
    DenominatorUnderflow {
        numerator: Complex<f64>,
        denominator: Complex<f64>,
        floor: f64,
    },

    #[error("node at coupling point: |psi({q:.6})| = {amplitude:.3e} below floor {floor:.3e}")]
    NodeAtCouplingPoint { q: f64, amplitude: f64, floor: f64 },

    #[error("postselection failed: success probability {probability:.3e} below floor {floor:.3e}")]
    PostselectionFailed { probability: f64, floor: f64 },

    #[error("caustic: |dx_f/dp_i| = {monodromy:.3e} below {tol:.3e} (conjugate point near t = {conjugate_time:.6})")]
    CausticTrajectory {
        monodromy: f64,
        tol: f64,
        conjugate_time: f64,
    },

    #[error("no classical trajectory found: {0}")]
    NoTrajectories(String),

    #[error("empty postselection: accepted weight fraction {accepted_fraction:.3e} below floor {floor:.3e}")]
    EmptyPostselection {
        accepted_fraction: f64,
        floor: f64,
    },

    #[error("vanishing factor in reconstruction: {0}")]
    VanishingFactor(String),

    #[error("integrator step rejected: non-finite state at t = {t:.6} (q = {q:.6e})")]
    StepRejected { t: f64, q: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
