//! Uniform spatial grids, configuration-space functions and physical
//! constants shared by every engine.
//!
//! Grids are uniform by construction; the spectral kinetic steps and the
//! kernel contractions rely on it. Integrals are plain Riemann sums with a
//! `dx` weight, treating amplitudes as `<x|psi>` samples, so kernel
//! contractions carry an explicit `dx` factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform 1D grid over `[x_min, x_max]` with `n_points` samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    x_min: T,
    x_max: T,
    n_points: usize,
    dx: T,
}

impl<T: Real> Grid<T> {
    /// Build a grid; `n_points >= 8` and `x_max > x_min` are required.
    /// Powers of two keep the spectral transforms fast.
    pub fn new(x_min: T, x_max: T, n_points: usize) -> Result<Self> {
        if n_points < 8 {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points}, need at least 8"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "bad extent [{}, {}]",
                x_min.as_f64(),
                x_max.as_f64()
            )));
        }
        let dx = (x_max - x_min) / T::from_usize(n_points - 1).expect("grid size");
        if !(dx > T::zero()) {
            return Err(Error::InvalidGrid("dx is not positive".into()));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
            dx,
        })
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }

    pub fn x_max(&self) -> T {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    /// Position of sample `i`.
    pub fn position(&self, i: usize) -> T {
        self.x_min + self.dx * T::from_usize(i).expect("grid index")
    }

    /// Iterator over all sample positions.
    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n_points).map(move |i| self.position(i))
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: T) -> usize {
        let rel = (x - self.x_min) / self.dx;
        let i = rel.round().to_f64().unwrap_or(0.0).max(0.0) as usize;
        i.min(self.n_points - 1)
    }

    /// Angular wavenumbers in FFT ordering: `2 pi j / (N dx)` with
    /// `j = 0, 1, .., N/2-1, -N/2, .., -1`.
    pub fn wavenumbers(&self) -> Vec<T> {
        let n = self.n_points;
        let period = self.dx * T::from_usize(n).expect("grid size");
        let dk = T::lit(2.0) * T::PI() / period;
        (0..n)
            .map(|j| {
                let j_signed = if j < n.div_ceil(2) {
                    j as isize
                } else {
                    j as isize - n as isize
                };
                dk * T::from_isize(j_signed).expect("wavenumber index")
            })
            .collect()
    }
}

/// Physical constants: `hbar`, the system mass `m` and the probe mass `M`.
/// Defaults to natural units, all ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams<T> {
    pub hbar: T,
    pub mass: T,
    pub probe_mass: T,
}

impl<T: Real> Default for PhysicalParams<T> {
    fn default() -> Self {
        Self {
            hbar: T::one(),
            mass: T::one(),
            probe_mass: T::one(),
        }
    }
}

impl<T: Real> PhysicalParams<T> {
    pub fn new(hbar: T, mass: T, probe_mass: T) -> Result<Self> {
        let p = Self {
            hbar,
            mass,
            probe_mass,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("probe_mass", self.probe_mass),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {}",
                    v.as_f64()
                )));
            }
        }
        Ok(())
    }
}

/// Real-valued function sampled on a grid: observables `A(q)`, potentials
/// `V(q)` and interaction profiles `f(q, Q_w)` all live here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigFunction<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> ConfigFunction<T> {
    pub fn from_fn(grid: Grid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values: Vec<T> = grid.points().map(&f).collect();
        Self::from_values(grid, values)
    }

    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite sample {} in configuration function",
                bad.as_f64()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid<T>, value: T) -> Result<Self> {
        Self::from_values(grid, vec![value; grid.n_points()])
    }

    pub fn zero(grid: Grid<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.n_points()],
        }
    }

    pub fn grid(&self) -> Grid<T> {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value_at(&self, i: usize) -> T {
        self.values[i]
    }

    /// Linear interpolation, clamped to the grid ends.
    pub fn interp(&self, x: T) -> T {
        let n = self.grid.n_points();
        let rel = (x - self.grid.x_min()) / self.grid.dx();
        if rel <= T::zero() {
            return self.values[0];
        }
        let last = T::from_usize(n - 1).expect("grid size");
        if rel >= last {
            return self.values[n - 1];
        }
        let i = rel.floor().to_usize().unwrap_or(0).min(n - 2);
        let frac = rel - T::from_usize(i).expect("grid index");
        self.values[i] * (T::one() - frac) + self.values[i + 1] * frac
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Riemann integral `sum f dx`.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.dx()
    }

    /// Pointwise product with another function on the same grid.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .collect();
        Self::from_values(self.grid, values)
    }
}
