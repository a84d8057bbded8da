//! Uncoupled propagators: exact free and harmonic kernels, split-step
//! (Strang) numerical propagation, dense kernel matrices and a brute-force
//! lattice path sum used as an oracle.
//!
//! Kernel matrices follow the row = destination, column = source convention
//! and carry an explicit `dx` on contraction: `psi_out = K psi dx`. Sampled
//! analytic kernels are unitary on the resolved (band-limited, localized)
//! subspace; matrices built from the spectral propagator are unitary on the
//! whole grid.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::grid::{ConfigFunction, Grid, PhysicalParams};
use crate::scalar::{cis, re, Real};
use crate::state::{WaveFunction, EDGE_MARGIN, EDGE_TOL};

/// Free-particle kernel
/// `sqrt(m / (2 pi i hbar dt)) exp(i m (x2 - x1)^2 / (2 hbar dt))`.
///
/// The modulus is position-independent; `dt = 0` is rejected because the
/// delta-function limit has no pointwise value.
pub fn free_kernel<T: Real>(
    x2: T,
    x1: T,
    dt: T,
    params: &PhysicalParams<T>,
) -> Result<Complex<T>> {
    if dt == T::zero() {
        return Err(Error::ZeroDuration);
    }
    let two_pi = T::lit(2.0) * T::PI();
    // 1 / sqrt(2 pi i hbar dt / m); principal branch gives exp(-i pi/4)
    // for dt > 0 and its conjugate for dt < 0.
    let prefactor = Complex::new(T::zero(), two_pi * params.hbar * dt / params.mass)
        .sqrt()
        .inv();
    let d = x2 - x1;
    let phase = params.mass * d * d / (T::lit(2.0) * params.hbar * dt);
    Ok(prefactor * cis(phase))
}

/// Distance from `theta` to the nearest multiple of pi (caustics of the
/// harmonic kernel).
fn caustic_distance<T: Real>(theta: T) -> T {
    let pi = T::PI();
    let m = (theta / pi).round();
    (theta - m * pi).abs()
}

/// Harmonic-oscillator kernel with the correct branch across caustics:
/// `sqrt(m w / (2 pi hbar |sin w dt|)) exp(i [m w ((x1^2 + x2^2) cos w dt
/// - 2 x1 x2) / (2 hbar sin w dt) - pi/4 - n pi/2])` with
/// `n = floor(w dt / pi)`.
///
/// Reduces to the free kernel as `omega -> 0`. Times with `w dt` at a
/// multiple of pi are focal points and are rejected.
pub fn harmonic_kernel<T: Real>(
    x2: T,
    x1: T,
    dt: T,
    omega: T,
    params: &PhysicalParams<T>,
) -> Result<Complex<T>> {
    if dt == T::zero() {
        return Err(Error::ZeroDuration);
    }
    if dt < T::zero() {
        // time reversal: K(-dt) = conj(K(dt)) for a real Hamiltonian
        return Ok(harmonic_kernel(x2, x1, -dt, omega, params)?.conj());
    }
    let theta = omega * dt;
    let caustic_tol = T::lit(1e-9);
    if theta >= T::PI() - caustic_tol && caustic_distance(theta) < caustic_tol {
        return Err(Error::CausticTime {
            omega_dt: theta.as_f64(),
            tol: caustic_tol.as_f64(),
        });
    }
    let sin = theta.sin();
    let cos = theta.cos();
    let two = T::lit(2.0);
    let two_pi = two * T::PI();
    let modulus = (params.mass * omega / (two_pi * params.hbar * sin.abs())).sqrt();
    let caustics_crossed = (theta / T::PI()).floor();
    let phase = params.mass * omega * ((x1 * x1 + x2 * x2) * cos - two * x1 * x2)
        / (two * params.hbar * sin)
        - T::FRAC_PI_4()
        - T::FRAC_PI_2() * caustics_crossed;
    Ok(cis(phase).scale(modulus))
}

/// Options for the split-step propagator.
#[derive(Clone, Copy, Debug)]
pub struct TrotterOptions {
    /// Enforce the boundary-decay rule after every step.
    pub check_support: bool,
    /// Relative edge-amplitude tolerance for the support check.
    pub support_tol: f64,
    /// Enforce `max |V| dt / hbar < potential_phase_limit` per step.
    pub enforce_step_bound: bool,
    /// Per-step potential phase bound.
    pub potential_phase_limit: f64,
}

impl Default for TrotterOptions {
    fn default() -> Self {
        Self {
            check_support: true,
            support_tol: EDGE_TOL,
            enforce_step_bound: true,
            potential_phase_limit: 0.1,
        }
    }
}

impl TrotterOptions {
    /// No support check and no step bound; used internally for kernel-column
    /// sources whose support legitimately fills the grid.
    pub fn unchecked() -> Self {
        Self {
            check_support: false,
            enforce_step_bound: false,
            ..Self::default()
        }
    }
}

/// Strang-split propagation of `psi` under `V` for `t_span` in `n_steps`
/// steps: half potential phase, spectral kinetic step, half potential
/// phase. Norm-preserving to machine precision and second-order in `dt`.
pub fn trotter_propagate<T: Real>(
    psi: &WaveFunction<T>,
    potential: &ConfigFunction<T>,
    t_span: T,
    n_steps: usize,
    params: &PhysicalParams<T>,
) -> Result<WaveFunction<T>> {
    trotter_propagate_with(
        psi,
        potential,
        t_span,
        n_steps,
        params,
        &TrotterOptions::default(),
    )
}

/// [`trotter_propagate`] with explicit [`TrotterOptions`].
pub fn trotter_propagate_with<T: Real>(
    psi: &WaveFunction<T>,
    potential: &ConfigFunction<T>,
    t_span: T,
    n_steps: usize,
    params: &PhysicalParams<T>,
    options: &TrotterOptions,
) -> Result<WaveFunction<T>> {
    if psi.grid() != potential.grid() {
        return Err(Error::GridMismatch);
    }
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be positive".into()));
    }
    let grid = psi.grid();
    let dt = t_span / T::from_usize(n_steps).expect("step count");
    let v_max = potential
        .values()
        .iter()
        .fold(T::zero(), |m, v| m.max(v.abs()));
    let max_phase = (v_max * dt.abs() / params.hbar).as_f64();
    if options.enforce_step_bound && max_phase >= options.potential_phase_limit {
        return Err(Error::StepTooLarge {
            max_phase,
            limit: options.potential_phase_limit,
        });
    }

    let half = T::lit(0.5);
    let half_v: Vec<Complex<T>> = potential
        .values()
        .iter()
        .map(|&v| cis(-half * v * dt / params.hbar))
        .collect();
    let kinetic: Vec<Complex<T>> = grid
        .wavenumbers()
        .iter()
        .map(|&k| cis(-params.hbar * k * k * dt / (T::lit(2.0) * params.mass)))
        .collect();

    let mut fft = FftPair::new(grid.n_points());
    let mut state = psi.clone();
    for _ in 0..n_steps {
        let buf = state.amplitudes_mut();
        for (a, h) in buf.iter_mut().zip(&half_v) {
            *a *= h;
        }
        fft.forward(buf);
        for (a, k) in buf.iter_mut().zip(&kinetic) {
            *a *= k;
        }
        fft.inverse(buf);
        for (a, h) in buf.iter_mut().zip(&half_v) {
            *a *= h;
        }
        if options.check_support {
            state.check_boundary_decay(options.support_tol, EDGE_MARGIN)?;
        }
    }
    Ok(state)
}

/// Dense position-basis kernel matrix `K(x_to; x_from)` between two times.
#[derive(Clone, Debug)]
pub struct KernelMatrix<T> {
    grid: Grid<T>,
    t_from: T,
    t_to: T,
    /// Row-major `n x n`: `entries[i_to * n + i_from]`.
    entries: Vec<Complex<T>>,
}

impl<T: Real> KernelMatrix<T> {
    /// Build from a kernel function `f(x_to, x_from)`; rows in parallel.
    pub fn from_fn(
        grid: Grid<T>,
        t_from: T,
        t_to: T,
        f: impl Fn(T, T) -> Result<Complex<T>> + Sync,
    ) -> Result<Self> {
        let n = grid.n_points();
        let entries: Result<Vec<Complex<T>>> = (0..n)
            .into_par_iter()
            .map(|i_to| {
                let x_to = grid.position(i_to);
                (0..n)
                    .map(|i_from| f(x_to, grid.position(i_from)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<Vec<_>>>>()
            .map(|rows| rows.into_iter().flatten().collect());
        Ok(Self {
            grid,
            t_from,
            t_to,
            entries: entries?,
        })
    }

    /// Exact free-particle kernel matrix.
    pub fn free(grid: Grid<T>, t_from: T, t_to: T, params: &PhysicalParams<T>) -> Result<Self> {
        let dt = t_to - t_from;
        Self::from_fn(grid, t_from, t_to, |x2, x1| free_kernel(x2, x1, dt, params))
    }

    /// Exact harmonic-oscillator kernel matrix.
    pub fn harmonic(
        grid: Grid<T>,
        t_from: T,
        t_to: T,
        omega: T,
        params: &PhysicalParams<T>,
    ) -> Result<Self> {
        let dt = t_to - t_from;
        Self::from_fn(grid, t_from, t_to, |x2, x1| {
            harmonic_kernel(x2, x1, dt, omega, params)
        })
    }

    /// Kernel matrix of the split-step propagator itself, built by evolving
    /// delta-function columns. Exactly unitary on the grid.
    pub fn from_trotter(
        grid: Grid<T>,
        potential: &ConfigFunction<T>,
        t_from: T,
        t_to: T,
        n_steps: usize,
        params: &PhysicalParams<T>,
    ) -> Result<Self> {
        let n = grid.n_points();
        let inv_dx = grid.dx().recip();
        let columns: Result<Vec<Vec<Complex<T>>>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); n];
                amplitudes[j] = re(inv_dx);
                let source = WaveFunction::from_amplitudes(grid, amplitudes)?;
                let evolved = trotter_propagate_with(
                    &source,
                    potential,
                    t_to - t_from,
                    n_steps,
                    params,
                    &TrotterOptions::unchecked(),
                )?;
                Ok(evolved.amplitudes().to_vec())
            })
            .collect();
        let columns = columns?;
        let mut entries = vec![Complex::new(T::zero(), T::zero()); n * n];
        for (j, col) in columns.iter().enumerate() {
            for (i, &a) in col.iter().enumerate() {
                entries[i * n + j] = a;
            }
        }
        Ok(Self {
            grid,
            t_from,
            t_to,
            entries,
        })
    }

    pub fn grid(&self) -> Grid<T> {
        self.grid
    }

    pub fn t_from(&self) -> T {
        self.t_from
    }

    pub fn t_to(&self) -> T {
        self.t_to
    }

    pub fn entry(&self, i_to: usize, i_from: usize) -> Complex<T> {
        self.entries[i_to * self.grid.n_points() + i_from]
    }

    /// Forward contraction `psi_out(x2) = sum K(x2, x1) psi(x1) dx`.
    pub fn apply(&self, psi: &WaveFunction<T>) -> Result<WaveFunction<T>> {
        if psi.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.n_points();
        let dx = self.grid.dx();
        let amp = psi.amplitudes();
        let out: Vec<Complex<T>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &self.entries[i * n..(i + 1) * n];
                row.iter()
                    .zip(amp)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (k, a)| {
                        acc + k * a
                    })
                    .scale(dx)
            })
            .collect();
        WaveFunction::from_amplitudes(self.grid, out)
    }

    /// Adjoint contraction `phi_out(x1) = sum conj(K(x2, x1)) phi(x2) dx`,
    /// i.e. backward propagation of a postselected state.
    pub fn apply_adjoint(&self, phi: &WaveFunction<T>) -> Result<WaveFunction<T>> {
        if phi.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.n_points();
        let dx = self.grid.dx();
        let amp = phi.amplitudes();
        let out: Vec<Complex<T>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for i in 0..n {
                    acc = acc + self.entries[i * n + j].conj() * amp[i];
                }
                acc.scale(dx)
            })
            .collect();
        WaveFunction::from_amplitudes(self.grid, out)
    }

    /// Chapman-Kolmogorov composition `self * earlier * dx`; `earlier` must
    /// end where `self` starts.
    pub fn compose(&self, earlier: &Self) -> Result<Self> {
        if self.grid != earlier.grid {
            return Err(Error::GridMismatch);
        }
        if (self.t_from - earlier.t_to).abs().as_f64() > 1e-12 {
            return Err(Error::InvalidParameter(
                "kernel times do not chain".into(),
            ));
        }
        let n = self.grid.n_points();
        let dx = self.grid.dx();
        let entries: Vec<Complex<T>> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let row = &self.entries[i * n..(i + 1) * n];
                (0..n)
                    .map(|j| {
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for (k, rk) in row.iter().enumerate() {
                            acc = acc + rk * earlier.entries[k * n + j];
                        }
                        acc.scale(dx)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self {
            grid: self.grid,
            t_from: earlier.t_from,
            t_to: self.t_to,
            entries,
        })
    }

    /// `max |(K dx)^dagger (K dx) - I|`: zero for an on-grid unitary.
    pub fn unitarity_defect(&self) -> T {
        let n = self.grid.n_points();
        let dx2 = self.grid.dx() * self.grid.dx();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut worst = T::zero();
                for j in 0..n {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for k in 0..n {
                        acc = acc + self.entries[k * n + i].conj() * self.entries[k * n + j];
                    }
                    let expected = if i == j { T::one() } else { T::zero() };
                    worst = worst.max((acc.scale(dx2) - re(expected)).norm());
                }
                worst
            })
            .reduce(T::zero, T::max)
    }

    /// Export as CSV rows `x2,x1,re,im` for plotting.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let n = self.grid.n_points();
        let mut out = String::new();
        out.push_str("x2,x1,re,im\n");
        for i in 0..n {
            for j in 0..n {
                let k = self.entries[i * n + j];
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    self.grid.position(i).as_f64(),
                    self.grid.position(j).as_f64(),
                    k.re.as_f64(),
                    k.im.as_f64()
                );
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Short-time step kernel used by the lattice path sum: exact free kernel
/// times the midpoint potential phase
/// `exp(-i V((x_a + x_b)/2) dt / hbar)`.
pub fn step_kernel<T: Real>(
    x_b: T,
    x_a: T,
    dt: T,
    potential: &ConfigFunction<T>,
    params: &PhysicalParams<T>,
) -> Result<Complex<T>> {
    let free = free_kernel(x_b, x_a, dt, params)?;
    let v_mid = potential.interp((x_a + x_b) * T::lit(0.5));
    Ok(free * cis(-v_mid * dt / params.hbar))
}

/// The step kernel as a matrix, so `lattice_path_sum` can be checked
/// against explicit matrix powers.
pub fn step_kernel_matrix<T: Real>(
    grid: Grid<T>,
    potential: &ConfigFunction<T>,
    dt: T,
    params: &PhysicalParams<T>,
) -> Result<KernelMatrix<T>> {
    KernelMatrix::from_fn(grid, T::zero(), dt, |x2, x1| {
        step_kernel(x2, x1, dt, potential, params)
    })
}

/// Default budget for the lattice path sum.
pub const PATH_SUM_BUDGET: u128 = 1 << 24;

/// Literal discretized sum over all lattice paths from grid point `i_from`
/// to `i_to` in `n_steps` short-time steps, each intermediate point summed
/// over the whole grid with a `dx` measure.
///
/// Equal, by construction, to the corresponding entry of the `n_steps`-fold
/// product of [`step_kernel_matrix`]; kept as an independent brute-force
/// oracle. `n_steps <= 4`, and the number of intermediate-point terms is
/// capped by `budget`.
pub fn lattice_path_sum<T: Real>(
    grid: Grid<T>,
    potential: &ConfigFunction<T>,
    i_to: usize,
    i_from: usize,
    n_steps: usize,
    dt_step: T,
    params: &PhysicalParams<T>,
    budget: u128,
) -> Result<Complex<T>> {
    if n_steps == 0 || n_steps > 4 {
        return Err(Error::InvalidParameter(format!(
            "n_steps = {n_steps}, path sum supports 1..=4 steps"
        )));
    }
    if potential.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.n_points() as u128;
    let terms = n.pow(n_steps as u32 - 1);
    if terms > budget {
        return Err(Error::BudgetExceeded { terms, budget });
    }

    let n_pts = grid.n_points();
    let x_from = grid.position(i_from);
    let x_to = grid.position(i_to);
    let dx = grid.dx();

    // wave of partial amplitudes from x_from through k intermediate points
    let mut partial: Vec<Complex<T>> = (0..n_pts)
        .map(|i| step_kernel(grid.position(i), x_from, dt_step, potential, params))
        .collect::<Result<Vec<_>>>()?;
    for _ in 2..n_steps {
        let mut next = vec![Complex::new(T::zero(), T::zero()); n_pts];
        for (i, slot) in next.iter_mut().enumerate() {
            let x_i = grid.position(i);
            let mut acc = Complex::new(T::zero(), T::zero());
            for (j, amp) in partial.iter().enumerate() {
                acc = acc + step_kernel(x_i, grid.position(j), dt_step, potential, params)? * amp;
            }
            *slot = acc.scale(dx);
        }
        partial = next;
    }

    if n_steps == 1 {
        return step_kernel(x_to, x_from, dt_step, potential, params);
    }
    let mut acc = Complex::new(T::zero(), T::zero());
    for (j, amp) in partial.iter().enumerate() {
        acc = acc + step_kernel(x_to, grid.position(j), dt_step, potential, params)? * amp;
    }
    Ok(acc.scale(dx))
}

/// Free-particle Gaussian width law `sigma(t)^2 = sigma0^2 +
/// (hbar t / (2 m sigma0))^2`; exposed for tests and the CLI.
pub fn gaussian_spread_variance<T: Real>(sigma0: T, t: T, params: &PhysicalParams<T>) -> T {
    let drift = params.hbar * t / (T::lit(2.0) * params.mass * sigma0);
    sigma0 * sigma0 + drift * drift
}
