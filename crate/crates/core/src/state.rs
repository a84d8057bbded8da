//! Wavefunctions on uniform grids: Gaussian packets, inner products,
//! expectation values and the boundary-decay guard.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::grid::{ConfigFunction, Grid};
use crate::scalar::{cis, Real};

/// Tolerance for treating a state as normalized.
pub const NORM_TOL: f64 = 1e-8;

/// Number of grid points on each edge inspected by the boundary-decay rule.
pub const EDGE_MARGIN: usize = 5;

/// Default relative edge-amplitude tolerance for the boundary-decay rule.
pub const EDGE_TOL: f64 = 1e-8;

/// Complex amplitudes sampled on a uniform grid, interpreted as `<x|psi>`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction<T> {
    grid: Grid<T>,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> WaveFunction<T> {
    pub fn from_amplitudes(grid: Grid<T>, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite amplitude in wavefunction".into(),
            ));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn from_fn(grid: Grid<T>, f: impl Fn(T) -> Complex<T>) -> Result<Self> {
        let amplitudes = grid.points().map(f).collect();
        Self::from_amplitudes(grid, amplitudes)
    }

    pub fn grid(&self) -> Grid<T> {
        self.grid
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amplitudes
    }

    pub fn amplitude_at(&self, i: usize) -> Complex<T> {
        self.amplitudes[i]
    }

    /// `sum |psi|^2 dx`.
    pub fn norm_sq(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<T>() * self.grid.dx()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sq().as_f64() - 1.0).abs() < tol
    }

    /// Rescale to unit norm.
    pub fn normalized(mut self) -> Result<Self> {
        let n2 = self.norm_sq();
        if !(n2 > T::zero()) || !n2.is_finite() {
            return Err(Error::NotNormalized {
                norm_sq: n2.as_f64(),
            });
        }
        let scale = n2.sqrt().recip();
        for a in &mut self.amplitudes {
            *a = a.scale(scale);
        }
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex<T>) -> Self {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
        self
    }

    /// Pointwise multiplication by a real configuration-space function.
    pub fn multiplied_by(&self, f: &ConfigFunction<T>) -> Result<Self> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .zip(f.values())
            .map(|(&a, &v)| a.scale(v))
            .collect();
        Self::from_amplitudes(self.grid, amplitudes)
    }

    /// Position expectation `<q>`, normalized by the state norm.
    pub fn position_expectation(&self) -> T {
        let num = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| self.grid.position(i) * a.norm_sqr())
            .sum::<T>();
        let den = self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<T>();
        num / den
    }

    /// Position variance `<q^2> - <q>^2`, normalized by the state norm.
    pub fn position_variance(&self) -> T {
        let mean = self.position_expectation();
        let num = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let d = self.grid.position(i) - mean;
                d * d * a.norm_sqr()
            })
            .sum::<T>();
        let den = self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<T>();
        num / den
    }

    /// Momentum expectation `<p>` through the spectral derivative,
    /// normalized by the state norm.
    pub fn momentum_expectation(&self, hbar: T) -> T {
        let mut fft = FftPair::new(self.grid.n_points());
        let mut buf = self.amplitudes.clone();
        fft.forward(&mut buf);
        let ks = self.grid.wavenumbers();
        let mut num = T::zero();
        let mut den = T::zero();
        for (a, &k) in buf.iter().zip(&ks) {
            let w = a.norm_sqr();
            num += hbar * k * w;
            den += w;
        }
        num / den
    }

    /// Boundary-decay rule: the relative amplitude within `margin` points of
    /// each edge must stay below `tol` of the peak amplitude.
    pub fn check_boundary_decay(&self, tol: f64, margin: usize) -> Result<()> {
        let n = self.grid.n_points();
        let peak = self
            .amplitudes
            .iter()
            .map(|a| a.norm())
            .fold(T::zero(), T::max);
        if !(peak > T::zero()) {
            return Ok(());
        }
        let mut worst = T::zero();
        for i in (0..margin.min(n)).chain(n.saturating_sub(margin)..n) {
            worst = worst.max(self.amplitudes[i].norm());
        }
        let ratio = (worst / peak).as_f64();
        if ratio > tol {
            return Err(Error::SupportEscaped {
                edge_ratio: ratio,
                tol,
            });
        }
        Ok(())
    }
}

/// Normalized Gaussian wavepacket
/// `psi(x) ~ exp(-(x - x0)^2 / (4 sigma^2) + i p0 x / hbar)`.
///
/// Rejects packets the grid cannot resolve (`sigma < 4 dx`) or hold
/// (`5 sigma` of support must fit inside the grid on both sides).
pub fn gaussian_wavepacket<T: Real>(
    grid: Grid<T>,
    x0: T,
    p0: T,
    sigma: T,
    hbar: T,
) -> Result<WaveFunction<T>> {
    let min_sigma = grid.dx() * T::lit(4.0);
    if sigma < min_sigma {
        return Err(Error::UnresolvableSigma {
            sigma: sigma.as_f64(),
            dx: grid.dx().as_f64(),
            min_sigma: min_sigma.as_f64(),
        });
    }
    let reach = sigma * T::lit(5.0);
    if x0 - reach < grid.x_min() || x0 + reach > grid.x_max() {
        return Err(Error::SupportClipped {
            x0: x0.as_f64(),
            sigma: sigma.as_f64(),
            x_min: grid.x_min().as_f64(),
            x_max: grid.x_max().as_f64(),
        });
    }
    let quarter = T::lit(0.25);
    let wf = WaveFunction::from_fn(grid, |x| {
        let d = x - x0;
        let envelope = (-quarter * d * d / (sigma * sigma)).exp();
        cis(p0 * x / hbar).scale(envelope)
    })?;
    wf.normalized()
}

/// `<bra|ket> = sum conj(bra) ket dx`. Conjugate-symmetric and sesquilinear.
pub fn inner_product<T: Real>(
    bra: &WaveFunction<T>,
    ket: &WaveFunction<T>,
) -> Result<Complex<T>> {
    if bra.grid() != ket.grid() {
        return Err(Error::GridMismatch);
    }
    let sum = bra
        .amplitudes()
        .iter()
        .zip(ket.amplitudes())
        .map(|(b, k)| b.conj() * k)
        .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z);
    Ok(sum * Complex::new(bra.grid().dx(), T::zero()))
}

/// Expectation value of a multiplicative observable in a normalized state.
pub fn expectation<T: Real>(psi: &WaveFunction<T>, observable: &ConfigFunction<T>) -> Result<T> {
    if psi.grid() != observable.grid() {
        return Err(Error::GridMismatch);
    }
    if !psi.is_normalized(NORM_TOL) {
        return Err(Error::NotNormalized {
            norm_sq: psi.norm_sq().as_f64(),
        });
    }
    Ok(psi
        .amplitudes()
        .iter()
        .zip(observable.values())
        .map(|(a, &v)| v * a.norm_sqr())
        .sum::<T>()
        * psi.grid().dx())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> Grid<f64> {
        Grid::new(-20.0, 20.0, 512).unwrap()
    }

    #[test]
    fn gaussian_is_normalized_and_centered() {
        let psi = gaussian_wavepacket(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-10);
        assert!(psi.position_expectation().abs() < 1e-10);
    }

    #[test]
    fn gaussian_momentum_expectation_is_p0() {
        let psi = gaussian_wavepacket(grid(), 0.0, 2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(psi.momentum_expectation(1.0), 2.0, epsilon = 1e-8);
    }

    #[test]
    fn gaussian_rejects_unresolvable_sigma() {
        let err = gaussian_wavepacket(grid(), 0.0, 0.0, 0.1, 1.0).unwrap_err();
        assert!(matches!(err, Error::UnresolvableSigma { .. }));
    }

    #[test]
    fn gaussian_rejects_clipped_support() {
        let err = gaussian_wavepacket(grid(), 18.0, 0.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::SupportClipped { .. }));
    }

    #[test]
    fn self_overlap_is_one() {
        let psi = gaussian_wavepacket(grid(), 1.0, 0.5, 1.2, 1.0).unwrap();
        let z = inner_product(&psi, &psi).unwrap();
        assert!((z.re - 1.0).abs() < 1e-10);
        assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn distant_gaussians_are_orthogonal() {
        let a = gaussian_wavepacket(grid(), -10.0, 0.0, 0.5, 1.0).unwrap();
        let b = gaussian_wavepacket(grid(), 10.0, 0.0, 0.5, 1.0).unwrap();
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-12);
    }

    #[test]
    fn gaussian_overlap_matches_analytic_formula() {
        // unit-width Gaussians at distance d overlap as exp(-d^2 / 8)
        let a = gaussian_wavepacket(grid(), -1.0, 0.0, 1.0, 1.0).unwrap();
        let b = gaussian_wavepacket(grid(), 1.0, 0.0, 1.0, 1.0).unwrap();
        let z = inner_product(&a, &b).unwrap();
        assert_relative_eq!(z.re, (-0.5_f64).exp(), epsilon = 1e-8);
        assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn inner_product_rejects_grid_mismatch() {
        let a = gaussian_wavepacket(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        let other = Grid::new(-20.0, 20.0, 256).unwrap();
        let b = gaussian_wavepacket(other, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            inner_product(&a, &b),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn expectation_of_identity_is_one() {
        let psi = gaussian_wavepacket(grid(), 0.5, 1.0, 1.0, 1.0).unwrap();
        let one = ConfigFunction::constant(grid(), 1.0).unwrap();
        assert_relative_eq!(expectation(&psi, &one).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn expectation_of_position_respects_parity() {
        let psi = gaussian_wavepacket(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        let q = ConfigFunction::from_fn(grid(), |x| x).unwrap();
        assert!(expectation(&psi, &q).unwrap().abs() < 1e-10);
    }

    #[test]
    fn expectation_of_q_squared_is_sigma_squared() {
        let psi = gaussian_wavepacket(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        let q2 = ConfigFunction::from_fn(grid(), |x| x * x).unwrap();
        assert_relative_eq!(expectation(&psi, &q2).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn expectation_rejects_unnormalized_state() {
        let psi = gaussian_wavepacket(grid(), 0.0, 0.0, 1.0, 1.0)
            .unwrap()
            .scaled(Complex::new(2.0, 0.0));
        let q = ConfigFunction::from_fn(grid(), |x| x).unwrap();
        assert!(matches!(
            expectation(&psi, &q),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn boundary_check_flags_edge_support() {
        let psi = gaussian_wavepacket(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(psi.check_boundary_decay(EDGE_TOL, EDGE_MARGIN).is_ok());
        let flat = WaveFunction::from_fn(grid(), |_| Complex::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            flat.check_boundary_decay(EDGE_TOL, EDGE_MARGIN),
            Err(Error::SupportEscaped { .. })
        ));
    }

    #[test]
    fn inner_product_is_sesquilinear() {
        use proptest::prelude::*;
        let g = Grid::new(-10.0, 10.0, 32).unwrap();
        let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig {
            cases: 64,
            ..ProptestConfig::default()
        });
        let amp = proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 32);
        runner
            .run(
                &(amp.clone(), amp.clone(), amp, -2.0..2.0f64, -2.0..2.0f64),
                |(a, b, c, re, im)| {
                    let wf = |v: &Vec<(f64, f64)>| {
                        WaveFunction::from_amplitudes(
                            g,
                            v.iter().map(|&(x, y)| Complex::new(x, y)).collect(),
                        )
                        .unwrap()
                    };
                    let (fa, fb, fc) = (wf(&a), wf(&b), wf(&c));
                    let alpha = Complex::new(re, im);
                    let ab = inner_product(&fa, &fb).unwrap();
                    // conjugate symmetry
                    let ba = inner_product(&fb, &fa).unwrap();
                    prop_assert!((ab - ba.conj()).norm() < 1e-12);
                    // linearity in the ket
                    let combo = WaveFunction::from_amplitudes(
                        g,
                        fb.amplitudes()
                            .iter()
                            .zip(fc.amplitudes())
                            .map(|(x, y)| x + alpha * y)
                            .collect(),
                    )
                    .unwrap();
                    let lhs = inner_product(&fa, &combo).unwrap();
                    let rhs = ab + alpha * inner_product(&fa, &fc).unwrap();
                    let scale = lhs.norm().max(1.0);
                    prop_assert!((lhs - rhs).norm() / scale < 1e-12);
                    Ok(())
                },
            )
            .unwrap();
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid::<f32>::new(-20.0, 20.0, 256).unwrap();
        let psi = gaussian_wavepacket(g, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-5);
        assert!((psi.momentum_expectation(1.0) - 1.0).abs() < 1e-3);
    }
}
