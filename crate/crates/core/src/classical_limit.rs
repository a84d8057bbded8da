//! Coarse-grained classical limit: weighted phase-space ensembles under
//! Hamiltonian flow, the per-sample probe kick, conditional pointer shifts
//! under backward-domain postselection (realized by forward filtering),
//! and the coarse-grained coherence diagnostic.
//!
//! The conditional shift is a convex combination of `g A f` values over
//! the accepted region, so it can never leave their range - the
//! no-anomaly property the tests pin down.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ConfigFunction;
use crate::grid::PhysicalParams;
use crate::potential::Potential;
use crate::scalar::Real;
use crate::state::WaveFunction;
use crate::weak_values::InteractionProfile;

/// One weighted phase-space sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSample<T> {
    pub q: T,
    pub p: T,
    pub w: T,
}

/// Weighted phase-space samples tagged with their time.
#[derive(Clone, Debug)]
pub struct ClassicalEnsemble<T> {
    samples: Vec<PhaseSample<T>>,
    pub time: T,
}

impl<T: Real> ClassicalEnsemble<T> {
    /// Build from samples; weights must be non-negative and are
    /// renormalized to unit total.
    pub fn new(mut samples: Vec<PhaseSample<T>>, time: T) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("empty ensemble".into()));
        }
        let mut total = T::zero();
        for s in &samples {
            if !(s.w >= T::zero()) || !s.q.is_finite() || !s.p.is_finite() {
                return Err(Error::InvalidParameter(
                    "ensemble needs finite samples with non-negative weights".into(),
                ));
            }
            total += s.w;
        }
        if !(total > T::zero()) {
            return Err(Error::InvalidParameter("zero total weight".into()));
        }
        for s in &mut samples {
            s.w = s.w / total;
        }
        Ok(Self { samples, time })
    }

    /// Monte-Carlo Gaussian ensemble with equal weights.
    pub fn gaussian(
        rng: &mut impl Rng,
        n: usize,
        q0: T,
        p0: T,
        sigma_q: T,
        sigma_p: T,
        time: T,
    ) -> Result<Self> {
        let normal = Normal::new(0.0f64, 1.0).expect("unit normal");
        let w = T::one() / T::from_usize(n).expect("sample count");
        let samples = (0..n)
            .map(|_| PhaseSample {
                q: q0 + sigma_q * T::lit(normal.sample(rng)),
                p: p0 + sigma_p * T::lit(normal.sample(rng)),
                w,
            })
            .collect();
        Self::new(samples, time)
    }

    /// Deterministic Gaussian quadrature ensemble on an `nq x np` phase
    /// grid covering `n_sigma` standard deviations.
    pub fn gaussian_grid(
        nq: usize,
        np: usize,
        q0: T,
        p0: T,
        sigma_q: T,
        sigma_p: T,
        n_sigma: T,
        time: T,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(nq * np);
        let half = T::lit(0.5);
        for i in 0..nq {
            let uq = (T::from_usize(i).expect("index") / T::from_usize(nq - 1).expect("count")
                - half)
                * T::lit(2.0)
                * n_sigma;
            for j in 0..np {
                let up = (T::from_usize(j).expect("index")
                    / T::from_usize(np - 1).expect("count")
                    - half)
                    * T::lit(2.0)
                    * n_sigma;
                let w = (-half * (uq * uq + up * up)).exp();
                samples.push(PhaseSample {
                    q: q0 + sigma_q * uq,
                    p: p0 + sigma_p * up,
                    w,
                });
            }
        }
        Self::new(samples, time)
    }

    pub fn samples(&self) -> &[PhaseSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.samples.iter().map(|s| s.w).sum()
    }

    /// Weighted mean of a sample function.
    pub fn mean_of(&self, f: impl Fn(&PhaseSample<T>) -> T) -> T {
        self.samples.iter().map(|s| s.w * f(s)).sum()
    }

    /// Write `q,p,w` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("q,p,w\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{}",
                s.q.as_f64(),
                s.p.as_f64(),
                s.w.as_f64()
            );
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Read an ensemble from `q,p,w` rows (header optional).
    pub fn read_csv(path: impl AsRef<Path>, time: T) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut samples = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('q') || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::InvalidParameter(format!(
                    "bad ensemble row: {line}"
                )));
            }
            let parse = |s: &str| -> Result<T> {
                s.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::InvalidParameter(format!("bad number {s}: {e}")))
            };
            samples.push(PhaseSample {
                q: parse(fields[0])?,
                p: parse(fields[1])?,
                w: parse(fields[2])?,
            });
        }
        Self::new(samples, time)
    }
}

/// Advance every sample under Hamilton's equations with fixed-step
/// velocity Verlet; weights ride along unchanged.
pub fn liouville_evolve<T: Real>(
    ensemble: &ClassicalEnsemble<T>,
    potential: &dyn Potential<T>,
    t_to: T,
    n_steps: usize,
    params: &PhysicalParams<T>,
) -> Result<ClassicalEnsemble<T>> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be positive".into()));
    }
    let t_span = t_to - ensemble.time;
    let dt = t_span / T::from_usize(n_steps).expect("step count");
    let half = T::lit(0.5);
    let m = params.mass;

    let evolved: Result<Vec<PhaseSample<T>>> = ensemble
        .samples
        .par_iter()
        .map(|s| {
            let mut q = s.q;
            let mut p = s.p;
            for step in 0..n_steps {
                let p_half = p - half * dt * potential.gradient(q);
                q = q + dt * p_half / m;
                p = p_half - half * dt * potential.gradient(q);
                if !q.is_finite() || !p.is_finite() {
                    let t = ensemble.time + dt * T::from_usize(step + 1).expect("step");
                    return Err(Error::StepRejected {
                        t: t.as_f64(),
                        q: q.as_f64(),
                    });
                }
            }
            Ok(PhaseSample { q, p, w: s.w })
        })
        .collect();
    Ok(ClassicalEnsemble {
        samples: evolved?,
        time: t_to,
    })
}

/// Evaluate the interaction profile at a continuous position: the contact
/// limit is a cell of width `cell_width` (the grid spacing of the coupled
/// observable) and height `1/cell_width`; finite widths are the analytic
/// normalized Gaussian.
pub fn profile_density<T: Real>(profile: &InteractionProfile<T>, q: T, cell_width: T) -> T {
    if profile.is_contact() {
        if (q - profile.center).abs() <= cell_width * T::lit(0.5) {
            cell_width.recip()
        } else {
            T::zero()
        }
    } else {
        let d = (q - profile.center) / profile.width;
        let norm = profile.width * (T::lit(2.0) * T::PI()).sqrt();
        (-T::lit(0.5) * d * d).exp() / norm
    }
}

/// Probe kick picked up by one sample at the interaction time:
/// `Delta Q = g A(q) f(q, Q_w)`, with `A` interpolated linearly on its
/// grid and the contact profile carrying the documented `1/dq` cell
/// normalization.
pub fn classical_probe_kick<T: Real>(
    q: T,
    observable: &ConfigFunction<T>,
    profile: &InteractionProfile<T>,
    coupling: T,
) -> T {
    coupling * observable.interp(q) * profile_density(profile, q, observable.grid().dx())
}

/// Which transported configurations count as postselected: interval
/// membership of `b(q)` at the final time.
#[derive(Clone, Debug)]
pub enum DomainFunction<T> {
    /// `b(q) = q`.
    Position,
    /// `b(q)` sampled on a grid, linearly interpolated.
    Config(ConfigFunction<T>),
}

#[derive(Clone, Debug)]
pub struct PostselectionDomain<T> {
    pub b: DomainFunction<T>,
    pub lo: T,
    pub hi: T,
}

impl<T: Real> PostselectionDomain<T> {
    pub fn position_interval(lo: T, hi: T) -> Self {
        Self {
            b: DomainFunction::Position,
            lo,
            hi,
        }
    }

    pub fn accepts(&self, q: T) -> bool {
        let value = match &self.b {
            DomainFunction::Position => q,
            DomainFunction::Config(f) => f.interp(q),
        };
        value >= self.lo && value <= self.hi
    }
}

/// Conditional pointer shift with its acceptance statistics.
#[derive(Clone, Copy, Debug)]
pub struct ConditionalShift<T> {
    /// Weighted mean of `g A f` over accepted samples.
    pub shift: T,
    /// Accepted weight fraction.
    pub accepted_fraction: T,
    /// Standard error of the weighted mean.
    pub std_error: T,
    pub n_accepted: usize,
    /// Smallest and largest kick among accepted samples: the shift is a
    /// convex combination, so it lies between them.
    pub kick_min: T,
    pub kick_max: T,
}

/// Average probe kick conditioned on postselection: kicks are evaluated
/// at the interaction time, every sample is transported to the final time
/// under the potential, and only samples whose transported configuration
/// lands in the acceptance domain contribute. Forward filtering realizes
/// the backward-domain construction exactly.
#[allow(clippy::too_many_arguments)]
pub fn conditional_pointer_shift<T: Real>(
    ensemble_at_interaction: &ClassicalEnsemble<T>,
    observable: &ConfigFunction<T>,
    profile: &InteractionProfile<T>,
    coupling: T,
    domain: &PostselectionDomain<T>,
    potential: &dyn Potential<T>,
    t_final: T,
    n_steps: usize,
    params: &PhysicalParams<T>,
    floor: f64,
) -> Result<ConditionalShift<T>> {
    let kicks: Vec<T> = ensemble_at_interaction
        .samples
        .par_iter()
        .map(|s| classical_probe_kick(s.q, observable, profile, coupling))
        .collect();
    let transported = liouville_evolve(
        ensemble_at_interaction,
        potential,
        t_final,
        n_steps,
        params,
    )?;

    let mut accepted_weight = T::zero();
    let mut mean_acc = T::zero();
    let mut n_accepted = 0usize;
    let mut kick_min = T::infinity();
    let mut kick_max = T::neg_infinity();
    for (sample, &kick) in transported.samples.iter().zip(&kicks) {
        if !domain.accepts(sample.q) {
            continue;
        }
        accepted_weight += sample.w;
        mean_acc += sample.w * kick;
        n_accepted += 1;
        kick_min = kick_min.min(kick);
        kick_max = kick_max.max(kick);
    }
    if accepted_weight.as_f64() < floor {
        return Err(Error::EmptyPostselection {
            accepted_fraction: accepted_weight.as_f64(),
            floor,
        });
    }
    let shift = mean_acc / accepted_weight;
    let mut var_acc = T::zero();
    for (sample, &kick) in transported.samples.iter().zip(&kicks) {
        if !domain.accepts(sample.q) {
            continue;
        }
        let d = kick - shift;
        var_acc += sample.w * sample.w * d * d;
    }
    Ok(ConditionalShift {
        shift,
        accepted_fraction: accepted_weight,
        std_error: var_acc.sqrt() / accepted_weight,
        n_accepted,
        kick_min,
        kick_max,
    })
}

/// Coarse-grained off-diagonal coherence of
/// `rho(x, x') = psi(x) conj(psi(x'))`, written in mean and separation
/// coordinates `u = (x + x')/2`, `s = x - x'` and averaged over `u` with
/// Gaussian windows of width `scale`. Interference coherences oscillate
/// in `u` at frequencies that grow as `hbar` drops and are averaged away;
/// population terms are not. Returns the fraction of the windowed mass
/// sitting at separations `|s| > scale`.
pub fn coherence_decay<T: Real>(psi: &WaveFunction<T>, scale: T) -> Result<T> {
    let grid = psi.grid();
    let n = grid.n_points();
    let dx = grid.dx();
    let per_box = ((scale / dx).round().as_f64() as usize).max(1);
    if n / per_box < 3 {
        return Err(Error::InvalidParameter(
            "coarse-graining scale leaves fewer than 3 windows".into(),
        ));
    }
    let stride = (per_box / 2).max(1);
    let half_window = 4 * per_box;
    let inv_two_s2 = (T::lit(2.0) * scale * scale).recip();

    let amps = psi.amplitudes();
    let mut near = T::zero();
    let mut far = T::zero();
    for d in 0..n {
        // product sequence at separation s = d dx, indexed by the left end
        let mut mass_d = T::zero();
        let mut any = false;
        for center in (0..n).step_by(stride) {
            let lo = center.saturating_sub(half_window).max(d);
            let hi = (center + half_window).min(n - 1);
            if lo > hi {
                continue;
            }
            let u_c = grid.position(center);
            let mut acc = num_complex::Complex::new(T::zero(), T::zero());
            for i in lo..=hi {
                // u for the pair (i, i - d)
                let u = grid.position(i) - T::from_usize(d).expect("offset") * dx * T::lit(0.5);
                let du = u - u_c;
                let w = (-du * du * inv_two_s2).exp();
                acc = acc + (amps[i] * amps[i - d].conj()).scale(w);
            }
            mass_d += acc.norm();
            any = true;
        }
        if !any {
            continue;
        }
        let s = T::from_usize(d).expect("offset") * dx;
        if s > scale {
            far += mass_d;
        } else {
            near += mass_d;
        }
        // early exit once separations are far outside the support
        if d > 0 && mass_d == T::zero() && s > scale * T::lit(4.0) {
            break;
        }
    }
    let total = near + far;
    if !(total > T::zero()) {
        return Err(Error::InvalidParameter("empty state".into()));
    }
    Ok(far / total)
}
