//! Floating-point scalar abstraction.

use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftNum;

/// Scalar type the numerical core is generic over: `f32` or `f64`.
///
/// `FftNum` brings `Send + Sync + FromPrimitive` and makes the type usable
/// with the spectral kinetic steps.
pub trait Real: Float + FloatConst + NumAssign + Sum<Self> + FftNum {
    /// Convert an `f64` literal (lossy for `f32`).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// View as `f64` for diagnostics and error payloads.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// The imaginary unit.
pub fn im<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

/// `exp(i * phase)`.
pub fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Complex number with zero imaginary part.
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}
