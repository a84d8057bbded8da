//! Coupled system + probe dynamics under
//! `H = H_s + H_p + g(t) A(q) f(q, Q_w) P`, the first-order perturbative
//! two-body kernel, probe postselection and pointer-shift readout.
//!
//! The interaction is diagonal in `q` and linear in the probe momentum, so
//! its exact effect is a `q`-conditional probe translation, applied in the
//! probe spectral basis. The rectangular coupling window `g(t)` is
//! integrated exactly over each substep, so step boundaries need not align
//! with the window edges.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::grid::{ConfigFunction, Grid, PhysicalParams};
use crate::propagators::KernelMatrix;
use crate::scalar::{cis, Real};
use crate::state::{inner_product, WaveFunction, EDGE_MARGIN, EDGE_TOL};
use crate::weak_values::InteractionProfile;

/// Weakness bound for the first-order kernel:
/// `|g| max|A f| p_typ / hbar` should stay below this for the expansion to
/// be trustworthy.
pub const WEAKNESS_LIMIT: f64 = 0.3;

/// Two-degree-of-freedom state on the system (`q`) x probe (`X`) grid.
#[derive(Clone, Debug)]
pub struct CoupledState<T> {
    system_grid: Grid<T>,
    probe_grid: Grid<T>,
    /// Row-major: `amplitudes[iq * n_probe + ix]`.
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> CoupledState<T> {
    /// Product state `psi(q) phi(X)`.
    pub fn product(system: &WaveFunction<T>, probe: &WaveFunction<T>) -> Self {
        let nq = system.grid().n_points();
        let nx = probe.grid().n_points();
        let mut amplitudes = Vec::with_capacity(nq * nx);
        for iq in 0..nq {
            let s = system.amplitude_at(iq);
            for ix in 0..nx {
                amplitudes.push(s * probe.amplitude_at(ix));
            }
        }
        Self {
            system_grid: system.grid(),
            probe_grid: probe.grid(),
            amplitudes,
        }
    }

    pub fn system_grid(&self) -> Grid<T> {
        self.system_grid
    }

    pub fn probe_grid(&self) -> Grid<T> {
        self.probe_grid
    }

    pub fn amplitude(&self, iq: usize, ix: usize) -> Complex<T> {
        self.amplitudes[iq * self.probe_grid.n_points() + ix]
    }

    /// Total `sum |amp|^2 dq dX`.
    pub fn norm_sq(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<T>()
            * self.system_grid.dx()
            * self.probe_grid.dx()
    }

    /// `|psi|^2` marginal over the system coordinate.
    pub fn system_marginal(&self) -> Vec<T> {
        let nx = self.probe_grid.n_points();
        self.amplitudes
            .chunks(nx)
            .map(|row| row.iter().map(|a| a.norm_sqr()).sum::<T>() * self.probe_grid.dx())
            .collect()
    }

    /// `|phi|^2` marginal over the probe coordinate.
    pub fn probe_marginal(&self) -> Vec<T> {
        let nx = self.probe_grid.n_points();
        let mut out = vec![T::zero(); nx];
        for row in self.amplitudes.chunks(nx) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.norm_sqr();
            }
        }
        let dq = self.system_grid.dx();
        for o in &mut out {
            *o *= dq;
        }
        out
    }

    /// Purity of the reduced probe state; 1 for an unentangled probe.
    pub fn probe_purity(&self) -> T {
        let nq = self.system_grid.n_points();
        let nx = self.probe_grid.n_points();
        let dq = self.system_grid.dx();
        let dx = self.probe_grid.dx();
        // rho(X, X') = sum_q conj(Psi(q, X)) Psi(q, X') dq
        let rho: Vec<Complex<T>> = (0..nx)
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..nx)
                    .map(|j| {
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for iq in 0..nq {
                            acc = acc
                                + self.amplitudes[iq * nx + i].conj()
                                    * self.amplitudes[iq * nx + j];
                        }
                        acc.scale(dq)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let trace: T = (0..nx).map(|i| rho[i * nx + i].re).sum::<T>() * dx;
        let trace_sq: T = rho.iter().map(|r| r.norm_sqr()).sum::<T>() * dx * dx;
        trace_sq / (trace * trace)
    }

    /// Overlap with a product bra: `<bra_sys bra_probe | Psi>`.
    pub fn project(
        &self,
        bra_sys: &WaveFunction<T>,
        bra_probe: &WaveFunction<T>,
    ) -> Result<Complex<T>> {
        if bra_sys.grid() != self.system_grid || bra_probe.grid() != self.probe_grid {
            return Err(Error::GridMismatch);
        }
        let nx = self.probe_grid.n_points();
        let mut acc = Complex::new(T::zero(), T::zero());
        for (iq, row) in self.amplitudes.chunks(nx).enumerate() {
            let s = bra_sys.amplitude_at(iq).conj();
            let mut inner = Complex::new(T::zero(), T::zero());
            for (ix, a) in row.iter().enumerate() {
                inner = inner + bra_probe.amplitude_at(ix).conj() * a;
            }
            acc = acc + s * inner;
        }
        Ok(acc.scale(self.system_grid.dx() * self.probe_grid.dx()))
    }
}

/// Rectangular coupling window: `g(t) = g_total / tau` on
/// `[t_center - tau/2, t_center + tau/2]`.
#[derive(Clone, Copy, Debug)]
pub struct CouplingWindow<T> {
    pub g_total: T,
    pub tau: T,
    pub t_center: T,
    pub profile: InteractionProfile<T>,
}

impl<T: Real> CouplingWindow<T> {
    pub fn validate(&self, t_from: T, t_to: T) -> Result<()> {
        if !(self.tau > T::zero()) {
            return Err(Error::InvalidParameter("tau must be positive".into()));
        }
        let lo = self.t_center - self.tau * T::lit(0.5);
        let hi = self.t_center + self.tau * T::lit(0.5);
        if lo < t_from || hi > t_to {
            return Err(Error::InvalidParameter(
                "coupling window sticks out of the evolution interval".into(),
            ));
        }
        Ok(())
    }

    /// `int g(t) dt` over `[t0, t1]`, exact for the rectangular window.
    pub fn integrated(&self, t0: T, t1: T) -> T {
        let lo = (self.t_center - self.tau * T::lit(0.5)).max(t0);
        let hi = (self.t_center + self.tau * T::lit(0.5)).min(t1);
        if hi <= lo {
            return T::zero();
        }
        self.g_total / self.tau * (hi - lo)
    }
}

/// Options for [`coupled_evolve`].
#[derive(Clone, Copy, Debug)]
pub struct CoupledEvolveOptions {
    /// Drop the probe kinetic term (infinitely heavy probe); the default.
    /// The probe position is then a parameter, not a dynamical variable.
    pub frozen_probe: bool,
    pub check_support: bool,
    pub support_tol: f64,
}

impl Default for CoupledEvolveOptions {
    fn default() -> Self {
        Self {
            frozen_probe: true,
            check_support: true,
            support_tol: EDGE_TOL,
        }
    }
}

fn check_marginal_decay<T: Real>(marginal: &[T], tol: f64) -> Result<()> {
    let peak = marginal.iter().copied().fold(T::zero(), T::max);
    if !(peak > T::zero()) {
        return Ok(());
    }
    let n = marginal.len();
    let mut worst = T::zero();
    for i in (0..EDGE_MARGIN.min(n)).chain(n.saturating_sub(EDGE_MARGIN)..n) {
        worst = worst.max(marginal[i]);
    }
    // marginals are |psi|^2, so take the square root for an amplitude ratio
    let ratio = (worst / peak).sqrt().as_f64();
    if ratio > tol {
        return Err(Error::SupportEscaped {
            edge_ratio: ratio,
            tol,
        });
    }
    Ok(())
}

/// Strang-split evolution of the coupled state from `t_from` to `t_to`:
/// per step, half of (system potential + interaction + probe kinetic) in
/// the probe spectral basis, a full system kinetic step in the system
/// spectral basis, then the second half. All factors within a half-step
/// commute, so the splitting stays second order. Unitary to machine
/// precision.
#[allow(clippy::too_many_arguments)]
pub fn coupled_evolve<T: Real>(
    initial: &CoupledState<T>,
    potential: &ConfigFunction<T>,
    observable: &ConfigFunction<T>,
    window: &CouplingWindow<T>,
    t_from: T,
    t_to: T,
    n_steps: usize,
    params: &PhysicalParams<T>,
    options: &CoupledEvolveOptions,
) -> Result<CoupledState<T>> {
    if potential.grid() != initial.system_grid || observable.grid() != initial.system_grid {
        return Err(Error::GridMismatch);
    }
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be positive".into()));
    }
    window.validate(t_from, t_to)?;
    let coupling_shape = observable.product(&window.profile.sample(initial.system_grid)?)?;

    let nq = initial.system_grid.n_points();
    let nx = initial.probe_grid.n_points();
    let dt = (t_to - t_from) / T::from_usize(n_steps).expect("step count");
    let half = T::lit(0.5);

    let kx: Vec<T> = initial.probe_grid.wavenumbers();
    let sys_kinetic: Vec<Complex<T>> = initial
        .system_grid
        .wavenumbers()
        .iter()
        .map(|&k| cis(-params.hbar * k * k * dt / (T::lit(2.0) * params.mass)))
        .collect();
    // half of the probe kinetic phase per row pass (two passes per step)
    let probe_kinetic_half: Vec<Complex<T>> = kx
        .iter()
        .map(|&k| {
            if options.frozen_probe {
                Complex::new(T::one(), T::zero())
            } else {
                cis(-params.hbar * k * k * dt / (T::lit(4.0) * params.probe_mass))
            }
        })
        .collect();
    let half_v: Vec<Complex<T>> = potential
        .values()
        .iter()
        .map(|&v| cis(-half * v * dt / params.hbar))
        .collect();

    let probe_fft = FftPair::<T>::new(nx);
    let sys_fft = FftPair::<T>::new(nq);

    let mut state = initial.clone();
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); nq * nx];

    for step in 0..n_steps {
        let t0 = t_from + dt * T::from_usize(step).expect("step index");
        let t_mid = t0 + half * dt;
        let t1 = t0 + dt;
        // exp(-i (int g dt) A f P / hbar) with P = hbar k: the spectral
        // phase is (int g dt) A f k, a translation by (int g dt) A f
        let w_a = window.integrated(t0, t_mid);
        let w_b = window.integrated(t_mid, t1);

        row_pass(
            &mut state.amplitudes,
            nx,
            &probe_fft,
            &coupling_shape,
            &half_v,
            &kx,
            &probe_kinetic_half,
            w_a,
        );

        transpose(&state.amplitudes, &mut scratch, nq, nx);
        scratch.par_chunks_mut(nq).for_each_init(
            || sys_fft.clone(),
            |fft, col| {
                fft.forward(col);
                for (a, k) in col.iter_mut().zip(&sys_kinetic) {
                    *a *= k;
                }
                fft.inverse(col);
            },
        );
        transpose(&scratch, &mut state.amplitudes, nx, nq);

        row_pass(
            &mut state.amplitudes,
            nx,
            &probe_fft,
            &coupling_shape,
            &half_v,
            &kx,
            &probe_kinetic_half,
            w_b,
        );

        if options.check_support {
            check_marginal_decay(&state.system_marginal(), options.support_tol)?;
            check_marginal_decay(&state.probe_marginal(), options.support_tol)?;
        }
    }
    Ok(state)
}

/// Probe-basis half step: potential phase, interaction translation with
/// time-integrated weight `weight = int g dt / hbar`, and half a probe
/// kinetic step, all diagonal in (q, k_X).
#[allow(clippy::too_many_arguments)]
fn row_pass<T: Real>(
    amplitudes: &mut [Complex<T>],
    nx: usize,
    fft_proto: &FftPair<T>,
    coupling_shape: &ConfigFunction<T>,
    half_v: &[Complex<T>],
    kx: &[T],
    probe_kinetic_half: &[Complex<T>],
    weight: T,
) {
    amplitudes
        .par_chunks_mut(nx)
        .enumerate()
        .for_each_init(
            || fft_proto.clone(),
            |fft, (iq, row)| {
                fft.forward(row);
                let shape = coupling_shape.value_at(iq);
                let v_phase = half_v[iq];
                for (a, (&k, pk)) in row.iter_mut().zip(kx.iter().zip(probe_kinetic_half)) {
                    *a *= cis(-weight * shape * k) * pk * v_phase;
                }
                fft.inverse(row);
            },
        );
}

fn transpose<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Contract the postselected system state out of the coupled state:
/// `phi(X) = sum_q conj(b_f(q)) Psi(q, X) dq`, unnormalized. The success
/// probability is the squared norm of the result; below `floor` the
/// postselection is reported as failed.
pub fn postselect_probe<T: Real>(
    state: &CoupledState<T>,
    postselection: &WaveFunction<T>,
    floor: f64,
) -> Result<WaveFunction<T>> {
    if postselection.grid() != state.system_grid {
        return Err(Error::GridMismatch);
    }
    let nx = state.probe_grid.n_points();
    let dq = state.system_grid.dx();
    let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); nx];
    for (iq, row) in state.amplitudes.chunks(nx).enumerate() {
        let b = postselection.amplitude_at(iq).conj();
        for (out, a) in amplitudes.iter_mut().zip(row) {
            *out = *out + b * a;
        }
    }
    for a in &mut amplitudes {
        *a = a.scale(dq);
    }
    let probe = WaveFunction::from_amplitudes(state.probe_grid, amplitudes)?;
    let probability = probe.norm_sq().as_f64();
    if probability < floor {
        return Err(Error::PostselectionFailed { probability, floor });
    }
    Ok(probe)
}

/// Pointer mean conditioned on an incoherent configuration filter
/// `0 <= b(q) <= 1` (a region postselection, not a pure-state
/// projection):
/// `<X>_cond = sum b(q) |Psi(q, X)|^2 X / sum b(q) |Psi(q, X)|^2`.
/// Returns the conditional mean and the accepted probability.
pub fn region_conditioned_pointer_mean<T: Real>(
    state: &CoupledState<T>,
    acceptance: &ConfigFunction<T>,
    floor: f64,
) -> Result<(T, T)> {
    if acceptance.grid() != state.system_grid {
        return Err(Error::GridMismatch);
    }
    let nx = state.probe_grid.n_points();
    let mut weight = T::zero();
    let mut mean = T::zero();
    for (iq, row) in state.amplitudes.chunks(nx).enumerate() {
        let b = acceptance.value_at(iq);
        if b == T::zero() {
            continue;
        }
        for (ix, a) in row.iter().enumerate() {
            let w = b * a.norm_sqr();
            weight += w;
            mean += w * state.probe_grid.position(ix);
        }
    }
    let dq_dx = state.system_grid.dx() * state.probe_grid.dx();
    let probability = (weight * dq_dx).as_f64();
    if probability < floor {
        return Err(Error::PostselectionFailed {
            probability,
            floor,
        });
    }
    Ok((mean / weight, weight * dq_dx))
}

/// Difference of position expectations (each normalized internally).
pub fn pointer_mean_shift<T: Real>(before: &WaveFunction<T>, after: &WaveFunction<T>) -> Result<T> {
    if before.grid() != after.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(after.position_expectation() - before.position_expectation())
}

/// Difference of momentum expectations; reported alongside the position
/// shift for diagnostics.
pub fn pointer_momentum_shift<T: Real>(
    before: &WaveFunction<T>,
    after: &WaveFunction<T>,
    hbar: T,
) -> Result<T> {
    if before.grid() != after.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(after.momentum_expectation(hbar) - before.momentum_expectation(hbar))
}

/// First-order result carrying the weakness diagnostic
/// `|g| max|A f| p_typ / hbar`; above [`WEAKNESS_LIMIT`] the expansion is
/// suspect.
#[derive(Clone, Copy, Debug)]
pub struct PerturbativeElement<T> {
    pub value: Complex<T>,
    pub weakness: f64,
}

impl<T> PerturbativeElement<T> {
    pub fn is_weak(&self) -> bool {
        self.weakness < WEAKNESS_LIMIT
    }
}

/// First-order two-body kernel
/// `K_p K_s + (-i g / hbar) [P K_p] W`, where
/// `W(x2, x1) = int K_s(x2; q) A(q) f(q, Q_w) K_s(q; x1) dq` is the
/// interaction-weighted system kernel assembled from uncoupled kernel
/// matrices. The probe momentum is the band-limited spectral operator;
/// frozen-probe mode replaces `K_p` with the identity.
pub struct PerturbativeKernel<T> {
    system_full: KernelMatrix<T>,
    /// `W` entries, row-major on the system grid.
    weighted: Vec<Complex<T>>,
    probe_grid: Grid<T>,
    /// First row of the circulant discrete momentum operator
    /// `P = F^-1 diag(hbar k) F`.
    momentum_row: Vec<Complex<T>>,
    /// Free probe kernel over the full span; `None` in frozen-probe mode.
    probe_kernel: Option<KernelMatrix<T>>,
    coupling: T,
    max_coupling_shape: T,
    hbar: T,
}

impl<T: Real> PerturbativeKernel<T> {
    /// Assemble from uncoupled system kernels around the interaction time:
    /// `early` spans `t_i -> t_w`, `late` spans `t_w -> t_f`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        early: &KernelMatrix<T>,
        late: &KernelMatrix<T>,
        observable: &ConfigFunction<T>,
        profile: &InteractionProfile<T>,
        coupling: T,
        probe_grid: Grid<T>,
        params: &PhysicalParams<T>,
        frozen_probe: bool,
    ) -> Result<Self> {
        let grid = early.grid();
        if late.grid() != grid || observable.grid() != grid {
            return Err(Error::GridMismatch);
        }
        if (late.t_from() - early.t_to()).abs().as_f64() > 1e-9 {
            return Err(Error::InvalidParameter(
                "system kernels do not chain at the interaction time".into(),
            ));
        }
        let shape = observable.product(&profile.sample(grid)?)?;
        let n = grid.n_points();
        let dq = grid.dx();
        // W = late . diag(A f) . early . dq
        let weighted: Vec<Complex<T>> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..n)
                    .map(|j| {
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for q in 0..n {
                            acc = acc
                                + late.entry(i, q).scale(shape.value_at(q)) * early.entry(q, j);
                        }
                        acc.scale(dq)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let system_full = late.compose(early)?;

        // circulant momentum operator: first row is the inverse FFT of the
        // hbar k sequence
        let nx = probe_grid.n_points();
        let mut momentum_row: Vec<Complex<T>> = probe_grid
            .wavenumbers()
            .iter()
            .map(|&k| Complex::new(params.hbar * k, T::zero()))
            .collect();
        let mut fft = FftPair::new(nx);
        fft.inverse(&mut momentum_row);

        let probe_kernel = if frozen_probe {
            None
        } else {
            let probe_params = PhysicalParams {
                hbar: params.hbar,
                mass: params.probe_mass,
                probe_mass: params.probe_mass,
            };
            Some(KernelMatrix::free(
                probe_grid,
                early.t_from(),
                late.t_to(),
                &probe_params,
            )?)
        };

        let max_coupling_shape = shape.values().iter().fold(T::zero(), |m, v| m.max(v.abs()));
        Ok(Self {
            system_full,
            weighted,
            probe_grid,
            momentum_row,
            probe_kernel,
            coupling,
            max_coupling_shape,
            hbar: params.hbar,
        })
    }

    fn n_sys(&self) -> usize {
        self.system_full.grid().n_points()
    }

    /// Discrete momentum operator entry `P[i, l]` (a linear map, no `dX`
    /// measure).
    fn momentum_entry(&self, i: usize, l: usize) -> Complex<T> {
        let nx = self.probe_grid.n_points();
        self.momentum_row[(i + nx - l) % nx]
    }

    /// Pointwise kernel entry `K_int(x2, X2; x1, X1)`. Probe-side deltas
    /// in frozen mode carry the `1/dX` weight of a grid delta.
    pub fn entry(&self, i_x2: usize, i_probe2: usize, i_x1: usize, i_probe1: usize) -> Complex<T> {
        let n = self.n_sys();
        let dx_probe = self.probe_grid.dx();
        let ks = self.system_full.entry(i_x2, i_x1);
        let w = self.weighted[i_x2 * n + i_x1];
        let (kp, pkp) = match &self.probe_kernel {
            None => {
                let delta = if i_probe2 == i_probe1 {
                    dx_probe.recip()
                } else {
                    T::zero()
                };
                (
                    Complex::new(delta, T::zero()),
                    self.momentum_entry(i_probe2, i_probe1)
                        .scale(dx_probe.recip()),
                )
            }
            Some(kpm) => {
                let nx = self.probe_grid.n_points();
                let mut acc = Complex::new(T::zero(), T::zero());
                for m in 0..nx {
                    acc = acc + self.momentum_entry(i_probe2, m) * kpm.entry(m, i_probe1);
                }
                (kpm.entry(i_probe2, i_probe1), acc)
            }
        };
        let first_order = Complex::new(T::zero(), -self.coupling / self.hbar) * pkp * w;
        kp * ks + first_order
    }

    /// Matrix element `<bra_sys bra_probe| K_int |ket_sys ket_probe>` with
    /// all grid measures included, plus the weakness diagnostic evaluated
    /// on the probe ket.
    pub fn matrix_element(
        &self,
        bra_sys: &WaveFunction<T>,
        bra_probe: &WaveFunction<T>,
        ket_sys: &WaveFunction<T>,
        ket_probe: &WaveFunction<T>,
    ) -> Result<PerturbativeElement<T>> {
        if bra_sys.grid() != self.system_full.grid()
            || ket_sys.grid() != self.system_full.grid()
            || bra_probe.grid() != self.probe_grid
            || ket_probe.grid() != self.probe_grid
        {
            return Err(Error::GridMismatch);
        }
        let transition = inner_product(bra_sys, &self.system_full.apply(ket_sys)?)?;
        let n = self.n_sys();
        let dq = bra_sys.grid().dx();
        let mut weighted_transition = Complex::new(T::zero(), T::zero());
        for i in 0..n {
            let b = bra_sys.amplitude_at(i).conj();
            let mut inner = Complex::new(T::zero(), T::zero());
            for j in 0..n {
                inner = inner + self.weighted[i * n + j] * ket_sys.amplitude_at(j);
            }
            weighted_transition = weighted_transition + b * inner.scale(dq);
        }
        weighted_transition = weighted_transition.scale(dq);

        let (probe_zeroth, probe_first) = match &self.probe_kernel {
            None => {
                let zeroth = inner_product(bra_probe, ket_probe)?;
                let first = inner_product(bra_probe, &self.apply_momentum(ket_probe)?)?;
                (zeroth, first)
            }
            Some(kpm) => {
                let moved = kpm.apply(ket_probe)?;
                let zeroth = inner_product(bra_probe, &moved)?;
                let first = inner_product(bra_probe, &self.apply_momentum(&moved)?)?;
                (zeroth, first)
            }
        };

        let first_order = Complex::new(T::zero(), -self.coupling / self.hbar)
            * probe_first
            * weighted_transition;
        let value = probe_zeroth * transition + first_order;

        let p_typ = probe_momentum_spread(ket_probe, self.hbar);
        let weakness =
            (self.coupling.abs() * self.max_coupling_shape * p_typ / self.hbar).as_f64();
        Ok(PerturbativeElement { value, weakness })
    }

    fn apply_momentum(&self, phi: &WaveFunction<T>) -> Result<WaveFunction<T>> {
        let nx = self.probe_grid.n_points();
        let mut buf = phi.amplitudes().to_vec();
        let mut fft = FftPair::new(nx);
        fft.forward(&mut buf);
        for (a, &k) in buf.iter_mut().zip(self.probe_grid.wavenumbers().iter()) {
            *a = a.scale(self.hbar * k);
        }
        fft.inverse(&mut buf);
        WaveFunction::from_amplitudes(self.probe_grid, buf)
    }
}

/// RMS momentum of a probe state, used in the weakness diagnostic.
pub fn probe_momentum_spread<T: Real>(phi: &WaveFunction<T>, hbar: T) -> T {
    let nx = phi.grid().n_points();
    let mut buf = phi.amplitudes().to_vec();
    let mut fft = FftPair::new(nx);
    fft.forward(&mut buf);
    let ks = phi.grid().wavenumbers();
    let mut num = T::zero();
    let mut den = T::zero();
    for (a, &k) in buf.iter().zip(&ks) {
        let w = a.norm_sqr();
        num += hbar * hbar * k * k * w;
        den += w;
    }
    (num / den).sqrt()
}

/// Outcome of a full weak-measurement pipeline run.
#[derive(Clone, Copy, Debug)]
pub struct PointerOutcome<T> {
    pub shift: T,
    pub momentum_shift: T,
    pub success_probability: T,
}

/// Full pipeline: product state, coupled evolution across `[t_i, t_f]`,
/// postselection, pointer readout against the initial probe.
#[allow(clippy::too_many_arguments)]
pub fn pointer_pipeline<T: Real>(
    preselection: &WaveFunction<T>,
    probe: &WaveFunction<T>,
    postselection: &WaveFunction<T>,
    potential: &ConfigFunction<T>,
    observable: &ConfigFunction<T>,
    window: &CouplingWindow<T>,
    t_initial: T,
    t_final: T,
    n_steps: usize,
    params: &PhysicalParams<T>,
    options: &CoupledEvolveOptions,
    floor: f64,
) -> Result<PointerOutcome<T>> {
    let initial = CoupledState::product(preselection, probe);
    let evolved = coupled_evolve(
        &initial,
        potential,
        observable,
        window,
        t_initial,
        t_final,
        n_steps,
        params,
        options,
    )?;
    let conditioned = postselect_probe(&evolved, postselection, floor)?;
    Ok(PointerOutcome {
        shift: pointer_mean_shift(probe, &conditioned)?,
        momentum_shift: pointer_momentum_shift(probe, &conditioned, params.hbar)?,
        success_probability: conditioned.norm_sq(),
    })
}
