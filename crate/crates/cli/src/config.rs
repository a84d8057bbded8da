//! Scenario configuration schemas. Every struct rejects unknown keys so a
//! typo fails validation instead of silently running something else.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use pathweak::interferometer::{build_nested_mz, ModeNetwork, Stage};
use pathweak::state::gaussian_wavepacket;
use pathweak::weak_values::InteractionProfile;
use pathweak::{
    ConfigFunction64, Error, Free, Grid64, Harmonic, PhysicalParams64, Potential,
    QuarticDoubleWell, WaveFunction64,
};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid64> {
        Grid64::new(self.x_min, self.x_max, self.n_points)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub probe_mass: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            probe_mass: 1.0,
        }
    }
}

impl ParamsSpec {
    pub fn build(&self) -> Result<PhysicalParams64> {
        PhysicalParams64::new(self.hbar, self.mass, self.probe_mass)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Free,
    Harmonic { omega: f64 },
    QuarticDoubleWell { quartic: f64, quadratic: f64 },
}

impl PotentialSpec {
    pub fn analytic(&self, params: &PhysicalParams64) -> Box<dyn Potential<f64>> {
        match *self {
            PotentialSpec::Free => Box::new(Free),
            PotentialSpec::Harmonic { omega } => Box::new(Harmonic::new(params.mass, omega)),
            PotentialSpec::QuarticDoubleWell { quartic, quadratic } => {
                Box::new(QuarticDoubleWell::new(quartic, quadratic))
            }
        }
    }

    pub fn sample(&self, grid: Grid64, params: &PhysicalParams64) -> Result<ConfigFunction64> {
        self.analytic(params).sample(grid)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub center: f64,
    #[serde(default)]
    pub momentum: f64,
    pub width: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LobeSpec {
    pub center: f64,
    #[serde(default)]
    pub momentum: f64,
    pub width: f64,
    #[serde(default = "one")]
    pub amplitude_re: f64,
    #[serde(default)]
    pub amplitude_im: f64,
}

/// A pure state: a single Gaussian packet or a normalized superposition
/// of Gaussian lobes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Gaussian(PacketSpec),
    Superposition { lobes: Vec<LobeSpec> },
}

impl StateSpec {
    pub fn build(&self, grid: Grid64, hbar: f64) -> Result<WaveFunction64> {
        match self {
            StateSpec::Gaussian(p) => {
                gaussian_wavepacket(grid, p.center, p.momentum, p.width, hbar)
            }
            StateSpec::Superposition { lobes } => {
                if lobes.is_empty() {
                    return Err(Error::InvalidParameter("empty superposition".into()));
                }
                let wf = WaveFunction64::from_fn(grid, |x| {
                    lobes
                        .iter()
                        .map(|l| {
                            let d = x - l.center;
                            let envelope = (-d * d / (4.0 * l.width * l.width)).exp();
                            C64::new(l.amplitude_re, l.amplitude_im)
                                * C64::from_polar(envelope, l.momentum * x / hbar)
                        })
                        .sum()
                })?;
                wf.normalized()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Position,
    Constant { value: f64 },
    IndicatorWindow { lo: f64, hi: f64 },
}

impl ObservableSpec {
    pub fn build(&self, grid: Grid64) -> Result<ConfigFunction64> {
        match *self {
            ObservableSpec::Position => ConfigFunction64::from_fn(grid, |x| x),
            ObservableSpec::Constant { value } => ConfigFunction64::constant(grid, value),
            ObservableSpec::IndicatorWindow { lo, hi } => {
                ConfigFunction64::from_fn(grid, |x| if x >= lo && x <= hi { 1.0 } else { 0.0 })
            }
        }
    }

}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub center: f64,
    /// 0 selects the contact (single grid cell) limit.
    #[serde(default)]
    pub width: f64,
}

impl ProfileSpec {
    pub fn build(&self) -> InteractionProfile<f64> {
        if self.width == 0.0 {
            InteractionProfile::contact(self.center)
        } else {
            InteractionProfile::gaussian(self.center, self.width)
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesSpec {
    pub t_initial: f64,
    pub t_interaction: f64,
    pub t_final: f64,
}

// ---- per-scenario configurations ----

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub initial: PacketSpec,
    pub t_span: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub params: ParamsSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakValueRoute {
    Operator,
    Path,
    Both,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakValueConfig {
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub preselection: StateSpec,
    pub postselection: StateSpec,
    pub observable: ObservableSpec,
    pub profile: ProfileSpec,
    pub times: TimesSpec,
    pub route: WeakValueRoute,
    pub evolution_steps: usize,
    #[serde(default)]
    pub params: ParamsSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerConfig {
    pub grid: GridSpec,
    pub probe_grid: GridSpec,
    pub potential: PotentialSpec,
    pub preselection: StateSpec,
    pub postselection: StateSpec,
    pub observable: ObservableSpec,
    pub profile: ProfileSpec,
    pub probe: PacketSpec,
    pub times: TimesSpec,
    pub g_total: f64,
    pub tau: f64,
    pub n_steps: usize,
    #[serde(default = "default_true")]
    pub frozen_probe: bool,
    /// Compute the kernel-route reference weak value (free and harmonic
    /// potentials only).
    #[serde(default = "default_true")]
    pub reference: bool,
    #[serde(default)]
    pub params: ParamsSpec,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferPropagatorConfig {
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub preselection: StateSpec,
    pub times: TimesSpec,
    pub coupling_points: Vec<f64>,
    pub readout_points: Vec<f64>,
    pub evolution_steps: usize,
    #[serde(default)]
    pub params: ParamsSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    NestedMachZehnder {
        thetas: [f64; 4],
        phi_b: f64,
        phi_c: f64,
        phi_outer: f64,
    },
    Custom {
        n_modes: usize,
        stages: Vec<Stage<f64>>,
        sites: std::collections::BTreeMap<String, (usize, usize)>,
    },
}

impl NetworkSpec {
    pub fn build(&self) -> Result<ModeNetwork<f64>> {
        match self {
            NetworkSpec::NestedMachZehnder {
                thetas,
                phi_b,
                phi_c,
                phi_outer,
            } => build_nested_mz(*thetas, *phi_b, *phi_c, *phi_outer),
            NetworkSpec::Custom {
                n_modes,
                stages,
                sites,
            } => {
                let mut network = ModeNetwork::new(*n_modes, stages.clone())?;
                for (label, &(after_stage, mode)) in sites {
                    network = network.with_site(label, after_stage, mode)?;
                }
                Ok(network)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ComplexSpec {
    pub fn build(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerConfig {
    pub network: NetworkSpec,
    pub preselection: Vec<ComplexSpec>,
    pub postselection: Vec<ComplexSpec>,
    /// Sites to report on; all labelled sites when omitted.
    #[serde(default)]
    pub sites: Option<Vec<String>>,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    1e-12
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiclassicalConfig {
    pub potential: PotentialSpec,
    pub x_initial: f64,
    pub x_final: f64,
    pub t_span: f64,
    pub seed_bracket: (f64, f64),
    pub seed_count: usize,
    pub bvp_steps: usize,
    /// Compare against the closed-form kernel (free and harmonic only).
    #[serde(default)]
    pub compare_exact: bool,
    #[serde(default)]
    pub params: ParamsSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScarConfig {
    pub grid: GridSpec,
    pub omega: f64,
    pub packet: PacketSpec,
    /// Interaction time along the orbit; the committed fixture uses
    /// asin(1 / 2 pi), where the single-path reduction is exact.
    pub t_probe: f64,
    pub bvp_steps: usize,
    pub evolution_steps: usize,
    #[serde(default)]
    pub params: ParamsSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub n_samples: usize,
    pub ensemble: PacketAndSpread,
    pub observable: ObservableSpec,
    pub profile: ProfileSpec,
    pub coupling: f64,
    pub domain: DomainSpec,
    pub t_final: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub params: ParamsSpec,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketAndSpread {
    pub q0: f64,
    pub p0: f64,
    pub sigma_q: f64,
    pub sigma_p: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: f64,
    pub hi: f64,
}
