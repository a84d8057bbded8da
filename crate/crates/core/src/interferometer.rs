//! Discrete-mode model of the three-path nested interferometer: staged
//! beamsplitter/phase networks, weak values of site projectors, and the
//! three-way classification of vanishing weak values.
//!
//! Beamsplitters are real rotation matrices
//! `|a> -> cos(theta) |a> + sin(theta) |b>`,
//! `|b> -> -sin(theta) |a> + cos(theta) |b>`,
//! with all phases carried by explicit phase stages.

use std::collections::BTreeMap;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, Real};

/// Default magnitude below which an amplitude counts as zero.
pub const ZERO_TOL: f64 = 1e-10;

/// Upper edge of the ambiguity band: an amplitude inside
/// `[ZERO_TOL, AMBIGUITY_BAND)` is close enough to zero to flag the
/// classification as ambiguous.
pub const AMBIGUITY_BAND: f64 = 1e-8;

/// One unitary stage of the network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Stage<T> {
    /// Rotation-matrix beamsplitter on the ordered mode pair `(a, b)`.
    Beamsplitter { a: usize, b: usize, theta: T },
    /// Phase `exp(i phi)` on a single mode.
    PhaseShift { mode: usize, phi: T },
}

/// A site where a weak probe couples: the given mode at the interface
/// after `after_stage` stages have acted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SitePosition {
    pub after_stage: usize,
    pub mode: usize,
}

/// Ordered stages acting on a fixed number of modes, with labelled sites.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeNetwork<T> {
    n_modes: usize,
    stages: Vec<Stage<T>>,
    sites: BTreeMap<String, SitePosition>,
}

impl<T: Real> ModeNetwork<T> {
    pub fn new(n_modes: usize, stages: Vec<Stage<T>>) -> Result<Self> {
        if n_modes < 2 {
            return Err(Error::InvalidParameter("need at least two modes".into()));
        }
        for stage in &stages {
            let ok = match *stage {
                Stage::Beamsplitter { a, b, theta } => {
                    a < n_modes && b < n_modes && a != b && theta.is_finite()
                }
                Stage::PhaseShift { mode, phi } => mode < n_modes && phi.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "bad stage {stage:?} for {n_modes} modes"
                )));
            }
        }
        Ok(Self {
            n_modes,
            stages,
            sites: BTreeMap::new(),
        })
    }

    pub fn with_site(mut self, label: &str, after_stage: usize, mode: usize) -> Result<Self> {
        if after_stage > self.stages.len() || mode >= self.n_modes {
            return Err(Error::InvalidParameter(format!("site {label} out of range")));
        }
        self.sites
            .insert(label.to_string(), SitePosition { after_stage, mode });
        Ok(self)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn stages(&self) -> &[Stage<T>] {
        &self.stages
    }

    pub fn sites(&self) -> &BTreeMap<String, SitePosition> {
        &self.sites
    }

    pub fn site(&self, label: &str) -> Result<SitePosition> {
        self.sites
            .get(label)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("unknown site label {label}")))
    }

    fn apply_stage(&self, stage: &Stage<T>, state: &mut [Complex<T>]) {
        match *stage {
            Stage::Beamsplitter { a, b, theta } => {
                let (sin, cos) = theta.sin_cos();
                let va = state[a];
                let vb = state[b];
                state[a] = va.scale(cos) - vb.scale(sin);
                state[b] = va.scale(sin) + vb.scale(cos);
            }
            Stage::PhaseShift { mode, phi } => {
                state[mode] = state[mode] * cis(phi);
            }
        }
    }

    /// Propagate an input mode vector through stages `[from, to)`.
    pub fn propagate(
        &self,
        input: &[Complex<T>],
        from: usize,
        to: usize,
    ) -> Result<Vec<Complex<T>>> {
        if input.len() != self.n_modes {
            return Err(Error::GridMismatch);
        }
        if from > to || to > self.stages.len() {
            return Err(Error::InvalidParameter("bad stage range".into()));
        }
        let mut state = input.to_vec();
        for stage in &self.stages[from..to] {
            self.apply_stage(stage, &mut state);
        }
        Ok(state)
    }

    /// End-to-end transfer matrix; `columns[j]` is the image of mode `j`.
    pub fn transfer_matrix(&self) -> Vec<Vec<Complex<T>>> {
        let n = self.n_modes;
        (0..n)
            .map(|j| {
                let mut basis = vec![Complex::new(T::zero(), T::zero()); n];
                basis[j] = Complex::new(T::one(), T::zero());
                self.propagate(&basis, 0, self.stages.len()).expect("valid")
            })
            .collect()
    }

    /// `max |U'U - I|` over the end-to-end transfer matrix.
    pub fn unitarity_defect(&self) -> T {
        let cols = self.transfer_matrix();
        let n = self.n_modes;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in 0..n {
                    acc = acc + cols[i][k].conj() * cols[j][k];
                }
                let expected = if i == j { T::one() } else { T::zero() };
                worst = worst.max((acc - Complex::new(expected, T::zero())).norm());
            }
        }
        worst
    }
}

/// The nested Mach-Zehnder of the three-path geometry: an outer splitter
/// feeding rail 0 (outer path, site `A`) and rail 1 (inner entrance, site
/// `E`); an inner interferometer over rails 1 and 2 (sites `B`, `C`,
/// recombining toward `F` on rail 1 and the dump `G` on rail 2); and a
/// final splitter mixing rails 0 and 1 toward the detector rail (site `D`
/// on rail 0).
pub fn build_nested_mz<T: Real>(
    thetas: [T; 4],
    phi_b: T,
    phi_c: T,
    phi_outer: T,
) -> Result<ModeNetwork<T>> {
    let stages = vec![
        Stage::Beamsplitter {
            a: 0,
            b: 1,
            theta: thetas[0],
        },
        Stage::Beamsplitter {
            a: 1,
            b: 2,
            theta: thetas[1],
        },
        Stage::PhaseShift {
            mode: 0,
            phi: phi_outer,
        },
        Stage::PhaseShift { mode: 1, phi: phi_b },
        Stage::PhaseShift { mode: 2, phi: phi_c },
        Stage::Beamsplitter {
            a: 1,
            b: 2,
            theta: thetas[2],
        },
        Stage::Beamsplitter {
            a: 0,
            b: 1,
            theta: thetas[3],
        },
    ];
    ModeNetwork::new(3, stages)?
        .with_site("A", 5, 0)?
        .with_site("E", 1, 1)?
        .with_site("B", 5, 1)?
        .with_site("C", 5, 2)?
        .with_site("F", 6, 1)?
        .with_site("G", 6, 2)?
        .with_site("D", 7, 0)
}

/// Weak value of a site projector, with the auxiliary amplitudes needed
/// to classify a vanishing value.
#[derive(Clone, Debug)]
pub struct SiteWeakValue<T> {
    pub site: String,
    pub value: Complex<T>,
    /// Amplitude on the site mode just before the coupling.
    pub wavefunction_amp: Complex<T>,
    /// `<b_f| U_after |site> (U_before psi)_site`: paths through the site
    /// propagated onto the postselection.
    pub partial_overlap: Complex<T>,
    /// `<b_f| U_total |psi>`.
    pub total_overlap: Complex<T>,
}

/// Weak value of the projector `|site><site|` inserted at the site
/// interface: `<b_f| U_after P U_before |psi> / <b_f| U_total |psi>`.
pub fn projector_weak_value<T: Real>(
    network: &ModeNetwork<T>,
    site_label: &str,
    preselection: &[Complex<T>],
    postselection: &[Complex<T>],
    floor: f64,
) -> Result<SiteWeakValue<T>> {
    let site = network.site(site_label)?;
    let n_stages = network.stages().len();
    let before = network.propagate(preselection, 0, site.after_stage)?;
    let wavefunction_amp = before[site.mode];

    let mut projected = vec![Complex::new(T::zero(), T::zero()); network.n_modes()];
    projected[site.mode] = wavefunction_amp;
    let after = network.propagate(&projected, site.after_stage, n_stages)?;
    let full = network.propagate(preselection, 0, n_stages)?;

    let bra_dot = |state: &[Complex<T>]| {
        postselection
            .iter()
            .zip(state)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (b, s)| {
                acc + b.conj() * s
            })
    };
    let partial_overlap = bra_dot(&after);
    let total_overlap = bra_dot(&full);
    if total_overlap.norm().as_f64() < floor {
        return Err(Error::DenominatorUnderflow {
            numerator: Complex::new(partial_overlap.re.as_f64(), partial_overlap.im.as_f64()),
            denominator: Complex::new(total_overlap.re.as_f64(), total_overlap.im.as_f64()),
            floor,
        });
    }
    Ok(SiteWeakValue {
        site: site_label.to_string(),
        value: partial_overlap / total_overlap,
        wavefunction_amp,
        partial_overlap,
        total_overlap,
    })
}

/// Why a weak value vanishes (or does not).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VanishingClass {
    /// The coupled classical value `A` is zero at the site.
    ClassicalAbsence,
    /// The wavefunction itself vanishes at the site.
    DestructiveInterference,
    /// The state propagated through the site is orthogonal to the
    /// postselection.
    PostselectionOrthogonality,
    NonVanishing,
}

/// A classification plus an ambiguity flag, raised when another criterion
/// sits inside the declared near-zero band.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub class: VanishingClass,
    pub ambiguous: bool,
}

/// Classify a vanishing weak value: classical absence (`A = 0` at the
/// site), destructive interference (no wavefunction on the site), or
/// postselection orthogonality (the state propagated through the site is
/// orthogonal to the postselection), checked in that order against
/// `zero_tol`. Any other criterion inside `[zero_tol, band)` - or, for a
/// non-vanishing value, any criterion there - raises the ambiguity flag.
pub fn classify_vanishing<T: Real>(
    swv: &SiteWeakValue<T>,
    a_at_site: T,
    zero_tol: f64,
    band: f64,
) -> Classification {
    let a_mag = a_at_site.abs().as_f64();
    let psi_mag = swv.wavefunction_amp.norm().as_f64();
    let partial_mag = swv.partial_overlap.norm().as_f64();
    let in_band = |m: f64| m >= zero_tol && m < band;

    if a_mag < zero_tol {
        return Classification {
            class: VanishingClass::ClassicalAbsence,
            ambiguous: in_band(psi_mag) || in_band(partial_mag),
        };
    }
    if psi_mag < zero_tol {
        return Classification {
            class: VanishingClass::DestructiveInterference,
            ambiguous: in_band(a_mag) || in_band(partial_mag),
        };
    }
    if partial_mag < zero_tol {
        return Classification {
            class: VanishingClass::PostselectionOrthogonality,
            ambiguous: in_band(a_mag) || in_band(psi_mag),
        };
    }
    Classification {
        class: VanishingClass::NonVanishing,
        ambiguous: in_band(a_mag) || in_band(psi_mag) || in_band(partial_mag),
    }
}

/// A network plus the pre/postselection pair that drives it.
pub struct NestedMzFixture<T> {
    pub network: ModeNetwork<T>,
    pub preselection: Vec<Complex<T>>,
    pub postselection: Vec<Complex<T>>,
}

/// The committed three-path fixture: quarter-wave splitters, the inner
/// loop tuned bright toward `F` (`phi_C - phi_B = pi`, dark toward the
/// dump), input on rail 0, and a postselection mixing the image of the
/// outer rail with the dump rail. The projector weak values then vanish
/// on `E` and `F` through postselection orthogonality while the
/// wavefunction on both stays finite, and the inner arms carry opposite
/// weak values `+-1/sqrt(2)` with unit weak value on the outer path.
pub fn nested_mz_fixture<T: Real>() -> NestedMzFixture<T> {
    let quarter = T::FRAC_PI_4();
    let network = build_nested_mz(
        [quarter, quarter, quarter, quarter],
        T::zero(),
        T::PI(),
        T::zero(),
    )
    .expect("fixture network");
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let preselection = vec![one, zero, zero];
    // b_f = u BS4|e0> + w |e2> with (u, w) = (1/sqrt(3), sqrt(2/3)):
    // orthogonal to BS4|e1> by construction, and seeing the dump rail
    let u = T::lit(1.0 / 3.0).sqrt();
    let w = T::lit(2.0 / 3.0).sqrt();
    let (sin, cos) = quarter.sin_cos();
    let postselection = vec![
        Complex::new(u * cos, T::zero()),
        Complex::new(u * sin, T::zero()),
        Complex::new(w, T::zero()),
    ];
    NestedMzFixture {
        network,
        preselection,
        postselection,
    }
}
