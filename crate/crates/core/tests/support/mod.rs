//! Independent oracles shared by the integration suites: a dense
//! matrix-evolution engine built on an explicit DFT Hamiltonian and a
//! Hermitian eigendecomposition, and closed-form free Gaussian evolution.
//! Nothing here touches the split-step or kernel code paths.
//!
//! Shared across several test binaries, each of which uses a subset.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use pathweak::{ConfigFunction64, Grid64, PhysicalParams64, WaveFunction64};

/// Dense spectral Hamiltonian `H = W^H diag(hbar^2 k^2 / 2m) W + diag(V)`
/// with `W` the unitary DFT matrix, matching the grid's periodic kinetic
/// term entry by entry.
pub fn dense_hamiltonian(
    grid: Grid64,
    potential: &ConfigFunction64,
    params: &PhysicalParams64,
) -> DMatrix<C64> {
    let n = grid.n_points();
    let ks = grid.wavenumbers();
    let mut h = DMatrix::<C64>::zeros(n, n);
    // kinetic part: (W^H D W)_{jl} = (1/N) sum_k d_k exp(2 pi i k (j - l) / N)
    for j in 0..n {
        for l in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &kk) in ks.iter().enumerate() {
                let d = params.hbar * params.hbar * kk * kk / (2.0 * params.mass);
                let phase =
                    2.0 * std::f64::consts::PI * (k as f64) * ((j as f64) - (l as f64)) / n as f64;
                acc += C64::from_polar(d / n as f64, phase);
            }
            h[(j, l)] = acc;
        }
    }
    for j in 0..n {
        h[(j, j)] += C64::new(potential.value_at(j), 0.0);
    }
    h
}

/// Evolution by Hermitian eigendecomposition: `psi(t) = V e^{-i E t / hbar}
/// V^H psi(0)`. Independent of any time-stepping scheme.
pub struct DenseEvolver {
    grid: Grid64,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
    hbar: f64,
}

impl DenseEvolver {
    pub fn new(grid: Grid64, potential: &ConfigFunction64, params: &PhysicalParams64) -> Self {
        let h = dense_hamiltonian(grid, potential, params);
        let eig = h.symmetric_eigen();
        Self {
            grid,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
            hbar: params.hbar,
        }
    }

    pub fn evolve(&self, psi: &WaveFunction64, t: f64) -> WaveFunction64 {
        let v = nalgebra::DVector::from_iterator(
            self.grid.n_points(),
            psi.amplitudes().iter().copied(),
        );
        let coeffs = self.eigenvectors.adjoint() * v;
        let rotated = nalgebra::DVector::from_iterator(
            self.grid.n_points(),
            coeffs
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, &e)| c * C64::from_polar(1.0, -e * t / self.hbar)),
        );
        let out = &self.eigenvectors * rotated;
        WaveFunction64::from_amplitudes(self.grid, out.iter().copied().collect())
            .expect("dense evolution output")
    }
}

/// Closed-form free evolution of a Gaussian
/// `psi_0 ~ exp(-(x - x0)^2 / (4 s^2) + i p0 x / hbar)`:
/// `psi(x, t) = (2 pi s^2)^(-1/4) a^(-1/2)
///   exp(-(x - x0 - p0 t / m)^2 / (4 s^2 a) + i (p0 x - p0^2 t / 2m) / hbar)`
/// with `a = 1 + i hbar t / (2 m s^2)`. Valid for negative `t` as well.
pub fn free_gaussian_at(x: f64, t: f64, x0: f64, p0: f64, sigma: f64) -> C64 {
    let a = C64::new(1.0, t / (2.0 * sigma * sigma));
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
    let center = x0 + p0 * t;
    let d = x - center;
    let gauss = (-C64::new(d * d / (4.0 * sigma * sigma), 0.0) / a).exp();
    let phase = C64::from_polar(1.0, p0 * x - 0.5 * p0 * p0 * t);
    C64::new(norm, 0.0) / a.sqrt() * gauss * phase
}

/// Quadratic extrapolation of `f(g) -> f(0)` through three samples.
pub fn extrapolate_to_zero(gs: [f64; 3], fs: [f64; 3]) -> f64 {
    // Lagrange polynomial at g = 0
    let [g0, g1, g2] = gs;
    let [f0, f1, f2] = fs;
    f0 * (g1 * g2) / ((g0 - g1) * (g0 - g2))
        + f1 * (g0 * g2) / ((g1 - g0) * (g1 - g2))
        + f2 * (g0 * g1) / ((g2 - g0) * (g2 - g1))
}
