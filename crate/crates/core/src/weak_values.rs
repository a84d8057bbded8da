//! Weak values of multiplicative observables between pre- and postselected
//! states, through two routes:
//!
//! * the operator route: sandwich the observable between split-step
//!   evolutions,
//! * the kernel route: contract `A(q) f(q, Q_w)` against forward- and
//!   backward-propagated states built from dense kernel matrices.
//!
//! With a contact profile and a diagonal observable the two routes compute
//! the same number, and the transition-amplitude ratio `T_w / T` is exposed
//! directly. Knowing the wavefunction at the coupling and readout points,
//! the propagator itself can be recovered from a measured weak value.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ConfigFunction, Grid, PhysicalParams};
use crate::propagators::{trotter_propagate_with, KernelMatrix, TrotterOptions};
use crate::scalar::Real;
use crate::state::{inner_product, WaveFunction};

/// Default floor below which the postselection overlap is treated as
/// orthogonal and weak values refuse to evaluate.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

/// Interaction range profile `f(q, Q_w)`, normalized to unit integral.
///
/// `width = 0` is the contact limit, realized on a grid as a single cell of
/// height `1/dx`; positive widths are normalized Gaussian bumps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionProfile<T> {
    pub center: T,
    pub width: T,
}

impl<T: Real> InteractionProfile<T> {
    pub fn contact(center: T) -> Self {
        Self {
            center,
            width: T::zero(),
        }
    }

    pub fn gaussian(center: T, width: T) -> Self {
        Self { center, width }
    }

    pub fn is_contact(&self) -> bool {
        self.width == T::zero()
    }

    /// Sample onto a grid; the samples sum to `1/dx`, i.e. the profile
    /// integrates to one under the Riemann rule.
    pub fn sample(&self, grid: Grid<T>) -> Result<ConfigFunction<T>> {
        if self.center < grid.x_min() || self.center > grid.x_max() {
            return Err(Error::InvalidParameter(format!(
                "profile center {} outside grid",
                self.center.as_f64()
            )));
        }
        if self.is_contact() {
            let mut values = vec![T::zero(); grid.n_points()];
            values[grid.nearest_index(self.center)] = grid.dx().recip();
            return ConfigFunction::from_values(grid, values);
        }
        if self.width < grid.dx() {
            return Err(Error::InvalidParameter(format!(
                "profile width {} below dx = {}; use width = 0 for the contact limit",
                self.width.as_f64(),
                grid.dx().as_f64()
            )));
        }
        let half = T::lit(0.5);
        let raw: Vec<T> = grid
            .points()
            .map(|q| {
                let d = (q - self.center) / self.width;
                (-half * d * d).exp()
            })
            .collect();
        let total: T = raw.iter().copied().sum::<T>() * grid.dx();
        ConfigFunction::from_values(grid, raw.into_iter().map(|v| v / total).collect())
    }
}

/// A weak value together with the transition amplitudes it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakValue<T> {
    pub value: Complex<T>,
    pub numerator: Complex<T>,
    pub denominator: Complex<T>,
}

impl<T: Real> WeakValue<T> {
    fn from_ratio(numerator: Complex<T>, denominator: Complex<T>, floor: f64) -> Result<Self> {
        if denominator.norm().as_f64() < floor {
            return Err(Error::DenominatorUnderflow {
                numerator: Complex::new(numerator.re.as_f64(), numerator.im.as_f64()),
                denominator: Complex::new(denominator.re.as_f64(), denominator.im.as_f64()),
                floor,
            });
        }
        Ok(Self {
            value: numerator / denominator,
            numerator,
            denominator,
        })
    }
}

/// Pre/postselection, coupling data and evolution budget for a weak
/// measurement of a multiplicative observable.
#[derive(Clone, Debug)]
pub struct WeakMeasurementSetup<T> {
    /// Preselected state at `t_initial`.
    pub preselection: WaveFunction<T>,
    /// Postselected state at `t_final`.
    pub postselection: WaveFunction<T>,
    pub t_initial: T,
    pub t_interaction: T,
    pub t_final: T,
    /// The measured configuration-space observable `A(q)`.
    pub observable: ConfigFunction<T>,
    /// Interaction range profile `f(q, Q_w)`.
    pub profile: InteractionProfile<T>,
    /// Effective coupling `g` (time-integrated).
    pub coupling: T,
    /// System potential `V(q)`.
    pub potential: ConfigFunction<T>,
    pub params: PhysicalParams<T>,
    /// Orthogonality floor for the postselection overlap.
    pub floor: f64,
    /// Total split-step count across `[t_initial, t_final]`, split
    /// proportionally between the two segments.
    pub evolution_steps: usize,
}

impl<T: Real> WeakMeasurementSetup<T> {
    /// Validate grids, time ordering and the profile location.
    pub fn validate(&self) -> Result<()> {
        let grid = self.preselection.grid();
        if self.postselection.grid() != grid
            || self.observable.grid() != grid
            || self.potential.grid() != grid
        {
            return Err(Error::GridMismatch);
        }
        if !(self.t_initial < self.t_interaction && self.t_interaction < self.t_final) {
            return Err(Error::InvalidParameter(
                "need t_initial < t_interaction < t_final".into(),
            ));
        }
        if self.evolution_steps < 2 {
            return Err(Error::InvalidParameter(
                "evolution_steps must be at least 2".into(),
            ));
        }
        if !self.coupling.is_finite() {
            return Err(Error::InvalidParameter("coupling must be finite".into()));
        }
        self.params.validate()?;
        self.profile.sample(grid).map(|_| ())
    }

    pub fn grid(&self) -> Grid<T> {
        self.preselection.grid()
    }

    /// Step counts for the early (`t_i -> t_w`) and late (`t_w -> t_f`)
    /// segments, proportional to their durations.
    pub fn segment_steps(&self) -> (usize, usize) {
        let total = self.t_final - self.t_initial;
        let early = self.t_interaction - self.t_initial;
        let frac = (early / total).as_f64();
        let n1 = ((self.evolution_steps as f64) * frac).round().max(1.0) as usize;
        let n2 = self.evolution_steps.saturating_sub(n1).max(1);
        (n1, n2)
    }

    /// The effective multiplicative coupling term `A(q) f(q, Q_w)` sampled
    /// on the grid.
    pub fn coupling_observable(&self) -> Result<ConfigFunction<T>> {
        self.observable.product(&self.profile.sample(self.grid())?)
    }

    /// The contact-equivalent diagonal operator `A(Q_w) |Q_w><Q_w| / dx`,
    /// i.e. the observable for which the operator route reproduces the
    /// kernel route of a contact-profile setup.
    pub fn contact_equivalent_observable(&self) -> Result<ConfigFunction<T>> {
        if !self.profile.is_contact() {
            return Err(Error::InvalidParameter(
                "contact-equivalent observable needs a contact profile".into(),
            ));
        }
        let grid = self.grid();
        let cell = grid.nearest_index(self.profile.center);
        let mut values = vec![T::zero(); grid.n_points()];
        values[cell] = self.observable.value_at(cell) / grid.dx();
        ConfigFunction::from_values(grid, values)
    }
}

/// Weak value through the operator route:
/// `<post| U(t_f, t_w) A U(t_w, t_i) |pre> / <post| U(t_f, t_i) |pre>`,
/// with both evolutions realized by split-step propagation and `A` applied
/// as a multiplicative operator at the interaction time.
///
/// The interaction profile plays no role here; couple it in by measuring
/// [`WeakMeasurementSetup::contact_equivalent_observable`] or the sampled
/// `A(q) f(q, Q_w)` product directly.
pub fn weak_value_operator<T: Real>(setup: &WeakMeasurementSetup<T>) -> Result<WeakValue<T>> {
    weak_value_operator_of(setup, &setup.observable)
}

/// Operator-route weak value of an arbitrary multiplicative observable in
/// the same pre/postselection geometry.
pub fn weak_value_operator_of<T: Real>(
    setup: &WeakMeasurementSetup<T>,
    observable: &ConfigFunction<T>,
) -> Result<WeakValue<T>> {
    setup.validate()?;
    if observable.grid() != setup.grid() {
        return Err(Error::GridMismatch);
    }
    let (n1, n2) = setup.segment_steps();
    let span1 = setup.t_interaction - setup.t_initial;
    let span2 = setup.t_final - setup.t_interaction;

    let at_interaction = trotter_propagate_with(
        &setup.preselection,
        &setup.potential,
        span1,
        n1,
        &setup.params,
        &TrotterOptions::default(),
    )?;

    // the A-weighted branch can legitimately fill the grid (e.g. a contact
    // spike), so only the step bound is enforced on it
    let weighted = at_interaction.multiplied_by(observable)?;
    let weighted_final = trotter_propagate_with(
        &weighted,
        &setup.potential,
        span2,
        n2,
        &setup.params,
        &TrotterOptions {
            check_support: false,
            ..TrotterOptions::default()
        },
    )?;
    let plain_final = trotter_propagate_with(
        &at_interaction,
        &setup.potential,
        span2,
        n2,
        &setup.params,
        &TrotterOptions::default(),
    )?;

    let numerator = inner_product(&setup.postselection, &weighted_final)?;
    let denominator = inner_product(&setup.postselection, &plain_final)?;
    WeakValue::from_ratio(numerator, denominator, setup.floor)
}

fn check_kernel_times<T: Real>(
    setup: &WeakMeasurementSetup<T>,
    early: &KernelMatrix<T>,
    late: &KernelMatrix<T>,
) -> Result<()> {
    if early.grid() != setup.grid() || late.grid() != setup.grid() {
        return Err(Error::GridMismatch);
    }
    let tol = 1e-9;
    let chain = [
        (early.t_from(), setup.t_initial),
        (early.t_to(), setup.t_interaction),
        (late.t_from(), setup.t_interaction),
        (late.t_to(), setup.t_final),
    ];
    for (have, want) in chain {
        if (have - want).abs().as_f64() > tol {
            return Err(Error::InvalidParameter(format!(
                "kernel matrix time {} does not match setup time {}",
                have.as_f64(),
                want.as_f64()
            )));
        }
    }
    Ok(())
}

/// Weak value through the kernel route: the `A(q) f(q, Q_w)`-weighted sum
/// over paths from the preselected to the postselected region over the
/// unweighted sum,
/// `int A f conj(back(q)) fwd(q) dq / int conj(back(q)) fwd(q) dq`,
/// where `fwd` is the preselection propagated to the interaction time with
/// `early` and `back` is the postselection propagated backward with `late`.
pub fn weak_value_path<T: Real>(
    setup: &WeakMeasurementSetup<T>,
    early: &KernelMatrix<T>,
    late: &KernelMatrix<T>,
) -> Result<WeakValue<T>> {
    setup.validate()?;
    check_kernel_times(setup, early, late)?;
    let forward = early.apply(&setup.preselection)?;
    let backward = late.apply_adjoint(&setup.postselection)?;
    let weight = setup.coupling_observable()?;
    let dx = setup.grid().dx();

    let mut numerator = Complex::new(T::zero(), T::zero());
    let mut denominator = Complex::new(T::zero(), T::zero());
    for ((b, f), &w) in backward
        .amplitudes()
        .iter()
        .zip(forward.amplitudes())
        .zip(weight.values())
    {
        let overlap = b.conj() * f;
        denominator = denominator + overlap;
        numerator = numerator + overlap.scale(w);
    }
    WeakValue::from_ratio(numerator.scale(dx), denominator.scale(dx), setup.floor)
}

/// Transition-amplitude ratio `T_w / T` for a contact profile: the
/// amplitude carried by paths passing through `Q_w` at the interaction
/// time over the amplitude carried by all paths. Satisfies
/// `sum_over_Q_w ratio dx = 1`.
pub fn transition_ratio<T: Real>(
    setup: &WeakMeasurementSetup<T>,
    early: &KernelMatrix<T>,
    late: &KernelMatrix<T>,
) -> Result<Complex<T>> {
    setup.validate()?;
    check_kernel_times(setup, early, late)?;
    if !setup.profile.is_contact() {
        return Err(Error::InvalidParameter(
            "transition ratio is defined for contact profiles".into(),
        ));
    }
    let forward = early.apply(&setup.preselection)?;
    let backward = late.apply_adjoint(&setup.postselection)?;
    let cell = setup.grid().nearest_index(setup.profile.center);

    let through = backward.amplitude_at(cell).conj() * forward.amplitude_at(cell);
    let total = inner_product(&backward, &forward)?;
    if total.norm().as_f64() < setup.floor {
        return Err(Error::DenominatorUnderflow {
            numerator: Complex::new(through.re.as_f64(), through.im.as_f64()),
            denominator: Complex::new(total.re.as_f64(), total.im.as_f64()),
            floor: setup.floor,
        });
    }
    Ok(through / total)
}

/// Recover the propagator `K(x_f, t_f; Q_w, t_w)` from a weak value
/// measured with a narrow (one grid cell) position postselection at `x_f`
/// and a contact coupling at `Q_w`, given the wavefunction at both times:
/// `K = A_w psi(x_f, t_f) / (A(Q_w) psi(Q_w, t_w))`.
pub fn infer_propagator<T: Real>(
    psi_at_interaction: &WaveFunction<T>,
    psi_at_final: &WaveFunction<T>,
    weak_value: Complex<T>,
    a_at_coupling: T,
    coupling_point: T,
    readout_point: T,
    floor: f64,
) -> Result<Complex<T>> {
    if psi_at_interaction.grid() != psi_at_final.grid() {
        return Err(Error::GridMismatch);
    }
    if a_at_coupling == T::zero() {
        return Err(Error::InvalidParameter(
            "A(Q_w) = 0 carries no propagator information".into(),
        ));
    }
    let grid = psi_at_interaction.grid();
    let at_coupling = psi_at_interaction.amplitude_at(grid.nearest_index(coupling_point));
    if at_coupling.norm().as_f64() < floor {
        return Err(Error::NodeAtCouplingPoint {
            q: coupling_point.as_f64(),
            amplitude: at_coupling.norm().as_f64(),
            floor,
        });
    }
    let at_readout = psi_at_final.amplitude_at(grid.nearest_index(readout_point));
    Ok(weak_value * at_readout / (at_coupling.scale(a_at_coupling)))
}

/// One-cell position filter at `x_f`, the postselection used for
/// propagator inference.
pub fn position_filter<T: Real>(grid: Grid<T>, x_f: T) -> Result<WaveFunction<T>> {
    let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); grid.n_points()];
    amplitudes[grid.nearest_index(x_f)] = Complex::new(grid.dx().recip(), T::zero());
    WaveFunction::from_amplitudes(grid, amplitudes)
}

/// The committed anomalous configuration on a `[-24, 24]` grid: a free
/// particle prepared in two converging packets with opposite phases,
/// postselected on a displaced Gaussian, measured through a contact
/// coupling inside an indicator-window observable (so `A(q)` lies in
/// `[0, 1]` everywhere). The parameters were frozen from a scan against a
/// closed-form evolution oracle; `Re(A_w)` lands near `-1.43`, far below
/// the range of `A`.
pub fn anomalous_fixture_with<T: Real>(n_points: usize) -> WeakMeasurementSetup<T> {
    let grid = Grid::new(T::lit(-24.0), T::lit(24.0), n_points).expect("fixture grid");
    let (offset, momentum, sigma) = (T::lit(2.0), T::lit(1.25), T::one());
    let quarter = T::lit(0.25);
    let preselection = WaveFunction::from_fn(grid, |x| {
        let left = x + offset;
        let right = x - offset;
        let lobe = |d: T, p: T| {
            crate::scalar::cis(p * x).scale((-quarter * d * d / (sigma * sigma)).exp())
        };
        lobe(left, momentum) - lobe(right, -momentum)
    })
    .expect("fixture preselection")
    .normalized()
    .expect("normalizable");
    let postselection = crate::state::gaussian_wavepacket(
        grid,
        T::lit(0.5),
        T::zero(),
        T::one(),
        T::one(),
    )
    .expect("fixture postselection");
    let window = |x: T| {
        if x >= T::lit(-1.6) && x <= T::zero() {
            T::one()
        } else {
            T::zero()
        }
    };
    WeakMeasurementSetup {
        preselection,
        postselection,
        t_initial: T::zero(),
        t_interaction: T::lit(2.0),
        t_final: T::lit(4.0),
        observable: ConfigFunction::from_fn(grid, window).expect("fixture observable"),
        profile: InteractionProfile::contact(T::lit(-0.7984344422700609)),
        coupling: T::lit(0.02),
        potential: ConfigFunction::zero(grid),
        params: PhysicalParams::default(),
        floor: DENOMINATOR_FLOOR,
        evolution_steps: 2048,
    }
}

/// [`anomalous_fixture_with`] at the committed 512-point resolution.
pub fn anomalous_fixture<T: Real>() -> WeakMeasurementSetup<T> {
    anomalous_fixture_with(512)
}
