//! Analytic potentials with derivatives, for the trajectory engines, plus
//! grid sampling for the wave engines.

use crate::error::Result;
use crate::grid::{ConfigFunction, Grid};
use crate::scalar::Real;

/// Smooth potential with analytic first and second derivatives.
pub trait Potential<T: Real>: Sync {
    fn value(&self, q: T) -> T;
    fn gradient(&self, q: T) -> T;
    fn curvature(&self, q: T) -> T;

    fn sample(&self, grid: Grid<T>) -> Result<ConfigFunction<T>> {
        ConfigFunction::from_fn(grid, |q| self.value(q))
    }
}

/// `V = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Free;

impl<T: Real> Potential<T> for Free {
    fn value(&self, _q: T) -> T {
        T::zero()
    }
    fn gradient(&self, _q: T) -> T {
        T::zero()
    }
    fn curvature(&self, _q: T) -> T {
        T::zero()
    }
}

/// `V = m omega^2 q^2 / 2`.
#[derive(Clone, Copy, Debug)]
pub struct Harmonic<T> {
    pub mass: T,
    pub omega: T,
}

impl<T: Real> Harmonic<T> {
    pub fn new(mass: T, omega: T) -> Self {
        Self { mass, omega }
    }
}

impl<T: Real> Potential<T> for Harmonic<T> {
    fn value(&self, q: T) -> T {
        T::lit(0.5) * self.mass * self.omega * self.omega * q * q
    }
    fn gradient(&self, q: T) -> T {
        self.mass * self.omega * self.omega * q
    }
    fn curvature(&self, _q: T) -> T {
        self.mass * self.omega * self.omega
    }
}

/// Double well `V = a q^4 - b q^2` with minima at `q = +-sqrt(b / 2a)`.
#[derive(Clone, Copy, Debug)]
pub struct QuarticDoubleWell<T> {
    pub quartic: T,
    pub quadratic: T,
}

impl<T: Real> QuarticDoubleWell<T> {
    pub fn new(quartic: T, quadratic: T) -> Self {
        Self { quartic, quadratic }
    }
}

impl<T: Real> Potential<T> for QuarticDoubleWell<T> {
    fn value(&self, q: T) -> T {
        let q2 = q * q;
        self.quartic * q2 * q2 - self.quadratic * q2
    }
    fn gradient(&self, q: T) -> T {
        T::lit(4.0) * self.quartic * q * q * q - T::lit(2.0) * self.quadratic * q
    }
    fn curvature(&self, q: T) -> T {
        T::lit(12.0) * self.quartic * q * q - T::lit(2.0) * self.quadratic
    }
}
