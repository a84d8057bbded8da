//! Scenario runners: build the physics objects from a validated config,
//! run the engines, and return JSON-ready results plus an optional CSV
//! body for array-shaped data.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use pathweak::classical_limit::{conditional_pointer_shift, ClassicalEnsemble, PostselectionDomain};
use pathweak::coupling::{pointer_pipeline, CoupledEvolveOptions, CouplingWindow};
use pathweak::interferometer::{classify_vanishing, projector_weak_value, AMBIGUITY_BAND, ZERO_TOL};
use pathweak::propagators::{free_kernel, harmonic_kernel, trotter_propagate, KernelMatrix};
use pathweak::semiclassical::{momentum_scan_seeds, solve_bvp, BvpConfig, PeriodicOrbitSpec};
use pathweak::state::{gaussian_wavepacket, inner_product};
use pathweak::weak_values::{
    infer_propagator, position_filter, weak_value_operator_of, weak_value_path,
    WeakMeasurementSetup, DENOMINATOR_FLOOR,
};
use pathweak::{ConfigFunction64, Error, Grid64, Harmonic, KernelMatrix64, PhysicalParams64};

use crate::config::*;

pub struct ScenarioOutput {
    pub results: Value,
    /// CSV body for `--format csv`; scalar-only scenarios have none.
    pub csv: Option<String>,
}

fn complex_json(z: C64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

/// Kernel matrices for the two legs of a weak-measurement geometry;
/// closed forms exist for the free and harmonic potentials.
fn kernel_pair(
    grid: Grid64,
    times: &TimesSpec,
    potential: &PotentialSpec,
    params: &PhysicalParams64,
) -> Result<(KernelMatrix64, KernelMatrix64)> {
    match *potential {
        PotentialSpec::Free => Ok((
            KernelMatrix::free(grid, times.t_initial, times.t_interaction, params)?,
            KernelMatrix::free(grid, times.t_interaction, times.t_final, params)?,
        )),
        PotentialSpec::Harmonic { omega } => Ok((
            KernelMatrix::harmonic(grid, times.t_initial, times.t_interaction, omega, params)?,
            KernelMatrix::harmonic(grid, times.t_interaction, times.t_final, omega, params)?,
        )),
        PotentialSpec::QuarticDoubleWell { .. } => Err(Error::InvalidParameter(
            "the kernel route needs a closed-form kernel (free or harmonic potential)".into(),
        )),
    }
}

fn weak_setup(config: &WeakValueConfig) -> Result<WeakMeasurementSetup<f64>> {
    let grid = config.grid.build()?;
    let params = config.params.build()?;
    Ok(WeakMeasurementSetup {
        preselection: config.preselection.build(grid, params.hbar)?,
        postselection: config.postselection.build(grid, params.hbar)?,
        t_initial: config.times.t_initial,
        t_interaction: config.times.t_interaction,
        t_final: config.times.t_final,
        observable: config.observable.build(grid)?,
        profile: config.profile.build(),
        coupling: 0.0,
        potential: config.potential.sample(grid, &params)?,
        params,
        floor: DENOMINATOR_FLOOR,
        evolution_steps: config.evolution_steps,
    })
}

pub fn run_propagate(config: &PropagateConfig) -> Result<ScenarioOutput> {
    let grid = config.grid.build()?;
    let params = config.params.build()?;
    let v = config.potential.sample(grid, &params)?;
    let psi = gaussian_wavepacket(
        grid,
        config.initial.center,
        config.initial.momentum,
        config.initial.width,
        params.hbar,
    )?;
    let out = trotter_propagate(&psi, &v, config.t_span, config.n_steps, &params)?;
    let results = json!({
        "norm_sq": out.norm_sq(),
        "position_mean": out.position_expectation(),
        "position_variance": out.position_variance(),
        "momentum_mean": out.momentum_expectation(params.hbar),
    });
    let mut csv = String::from("x,re,im,density\n");
    for (i, x) in grid.points().enumerate() {
        let a = out.amplitude_at(i);
        csv.push_str(&format!("{},{},{},{}\n", x, a.re, a.im, a.norm_sqr()));
    }
    Ok(ScenarioOutput {
        results,
        csv: Some(csv),
    })
}

pub fn run_weak_value(config: &WeakValueConfig) -> Result<ScenarioOutput> {
    let setup = weak_setup(config)?;
    let mut results = serde_json::Map::new();
    if config.route == WeakValueRoute::Operator || config.route == WeakValueRoute::Both {
        // measure the coupled observable A(q) f(q, Q_w) (the
        // contact-equivalent diagonal operator in the contact limit), so
        // the operator and kernel routes report the same quantity
        let observable = if setup.profile.is_contact() {
            setup.contact_equivalent_observable()?
        } else {
            setup.coupling_observable()?
        };
        let wv = weak_value_operator_of(&setup, &observable)?;
        results.insert(
            "operator".into(),
            json!({
                "value": complex_json(wv.value),
                "numerator": complex_json(wv.numerator),
                "denominator": complex_json(wv.denominator),
            }),
        );
    }
    if config.route == WeakValueRoute::Path || config.route == WeakValueRoute::Both {
        let (early, late) = kernel_pair(setup.grid(), &config.times, &config.potential, &setup.params)?;
        let wv = weak_value_path(&setup, &early, &late)?;
        results.insert(
            "path".into(),
            json!({
                "value": complex_json(wv.value),
                "numerator": complex_json(wv.numerator),
                "denominator": complex_json(wv.denominator),
            }),
        );
    }
    Ok(ScenarioOutput {
        results: Value::Object(results),
        csv: None,
    })
}

pub fn run_pointer(config: &PointerConfig) -> Result<ScenarioOutput> {
    let grid = config.grid.build()?;
    let probe_grid = config.probe_grid.build()?;
    let params = config.params.build()?;
    let preselection = config.preselection.build(grid, params.hbar)?;
    let postselection = config.postselection.build(grid, params.hbar)?;
    let observable = config.observable.build(grid)?;
    let potential = config.potential.sample(grid, &params)?;
    let profile = config.profile.build();
    let probe = gaussian_wavepacket(
        probe_grid,
        config.probe.center,
        config.probe.momentum,
        config.probe.width,
        params.hbar,
    )?;
    let window = CouplingWindow {
        g_total: config.g_total,
        tau: config.tau,
        t_center: config.times.t_interaction,
        profile,
    };
    let outcome = pointer_pipeline(
        &preselection,
        &probe,
        &postselection,
        &potential,
        &observable,
        &window,
        config.times.t_initial,
        config.times.t_final,
        config.n_steps,
        &params,
        &CoupledEvolveOptions {
            frozen_probe: config.frozen_probe,
            // contact couplings scatter a grid-filling O(g) wave; the
            // support rule is checked on the uncoupled states instead
            check_support: !profile.is_contact(),
            ..CoupledEvolveOptions::default()
        },
        1e-12,
    )?;

    let reference = if config.reference {
        let setup = WeakMeasurementSetup {
            preselection: preselection.clone(),
            postselection: postselection.clone(),
            t_initial: config.times.t_initial,
            t_interaction: config.times.t_interaction,
            t_final: config.times.t_final,
            observable: observable.clone(),
            profile,
            coupling: config.g_total,
            potential: potential.clone(),
            params,
            floor: DENOMINATOR_FLOOR,
            evolution_steps: config.n_steps.max(2),
        };
        let (early, late) = kernel_pair(grid, &config.times, &config.potential, &params)?;
        Some(weak_value_path(&setup, &early, &late)?.value)
    } else {
        None
    };

    let results = json!({
        "g": config.g_total,
        "tau": config.tau,
        "q_w": config.profile.center,
        "shift": outcome.shift,
        "momentum_shift": outcome.momentum_shift,
        "success_probability": outcome.success_probability,
        "shift_over_g": outcome.shift / config.g_total,
        "reference_weak_value": reference.map(complex_json),
    });
    Ok(ScenarioOutput {
        results,
        csv: None,
    })
}

pub fn run_infer_propagator(config: &InferPropagatorConfig) -> Result<ScenarioOutput> {
    let grid = config.grid.build()?;
    let params = config.params.build()?;
    let preselection = config.preselection.build(grid, params.hbar)?;
    let potential = config.potential.sample(grid, &params)?;
    let (early, late) = kernel_pair(grid, &config.times, &config.potential, &params)?;
    let span_early = config.times.t_interaction - config.times.t_initial;
    let span_late = config.times.t_final - config.times.t_interaction;
    let steps_early = ((config.evolution_steps as f64)
        * (span_early / (span_early + span_late)))
        .round()
        .max(1.0) as usize;
    let psi_tw = trotter_propagate(&preselection, &potential, span_early, steps_early, &params)?;
    let psi_tf = trotter_propagate(
        &preselection,
        &potential,
        span_early + span_late,
        config.evolution_steps,
        &params,
    )?;

    let base = WeakMeasurementSetup {
        preselection,
        postselection: position_filter(grid, config.readout_points[0])?,
        t_initial: config.times.t_initial,
        t_interaction: config.times.t_interaction,
        t_final: config.times.t_final,
        observable: ConfigFunction64::constant(grid, 1.0)?,
        profile: pathweak::weak_values::InteractionProfile::contact(0.0),
        coupling: 0.0,
        potential,
        params,
        floor: DENOMINATOR_FLOOR,
        evolution_steps: config.evolution_steps,
    };

    let mut csv = String::from("q_w,x_f,re_inferred,im_inferred,re_exact,im_exact,rel_error\n");
    let mut worst: f64 = 0.0;
    for &q_w in &config.coupling_points {
        for &x_f in &config.readout_points {
            let mut setup = base.clone();
            setup.profile = pathweak::weak_values::InteractionProfile::contact(q_w);
            setup.postselection = position_filter(grid, x_f)?;
            let wv = weak_value_path(&setup, &early, &late)?;
            let inferred = infer_propagator(&psi_tw, &psi_tf, wv.value, 1.0, q_w, x_f, 1e-10)?;
            let exact = match config.potential {
                PotentialSpec::Free => free_kernel(
                    grid.position(grid.nearest_index(x_f)),
                    grid.position(grid.nearest_index(q_w)),
                    span_late,
                    &params,
                )?,
                PotentialSpec::Harmonic { omega } => harmonic_kernel(
                    grid.position(grid.nearest_index(x_f)),
                    grid.position(grid.nearest_index(q_w)),
                    span_late,
                    omega,
                    &params,
                )?,
                PotentialSpec::QuarticDoubleWell { .. } => unreachable!("kernel_pair rejected it"),
            };
            let rel = (inferred - exact).norm() / exact.norm();
            worst = worst.max(rel);
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                q_w, x_f, inferred.re, inferred.im, exact.re, exact.im, rel
            ));
        }
    }
    let results = json!({
        "scan_size": [config.coupling_points.len(), config.readout_points.len()],
        "max_rel_error": worst,
    });
    Ok(ScenarioOutput {
        results,
        csv: Some(csv),
    })
}

pub fn run_interferometer(config: &InterferometerConfig) -> Result<ScenarioOutput> {
    let network = config.network.build()?;
    let pre: Vec<C64> = config.preselection.iter().map(|c| c.build()).collect();
    let post: Vec<C64> = config.postselection.iter().map(|c| c.build()).collect();
    let labels: Vec<String> = match &config.sites {
        Some(list) => list.clone(),
        None => network.sites().keys().cloned().collect(),
    };
    let mut sites = serde_json::Map::new();
    for label in &labels {
        let swv = projector_weak_value(&network, label, &pre, &post, config.floor)?;
        let class = classify_vanishing(&swv, 1.0, ZERO_TOL, AMBIGUITY_BAND);
        sites.insert(
            label.clone(),
            json!({
                "re": swv.value.re,
                "im": swv.value.im,
                "wavefunction_amp": swv.wavefunction_amp.norm(),
                "classification": format!("{:?}", class.class),
                "ambiguous": class.ambiguous,
            }),
        );
    }
    let results = json!({
        "unitarity_defect": network.unitarity_defect(),
        "sites": Value::Object(sites),
    });
    Ok(ScenarioOutput {
        results,
        csv: None,
    })
}

pub fn run_semiclassical(config: &SemiclassicalConfig) -> Result<ScenarioOutput> {
    let params = config.params.build()?;
    let potential = config.potential.analytic(&params);
    let seeds = momentum_scan_seeds(config.seed_bracket.0, config.seed_bracket.1, config.seed_count);
    let bvp = BvpConfig {
        n_steps: config.bvp_steps,
        ..BvpConfig::default()
    };
    let outcome = solve_bvp(
        config.x_initial,
        config.x_final,
        0.0,
        config.t_span,
        potential.as_ref(),
        &params,
        &seeds,
        &bvp,
    )?;
    if outcome.trajectories.is_empty() {
        return Err(Error::NoTrajectories(format!(
            "{} seeds, {} failures",
            config.seed_count,
            outcome.failures.len()
        )));
    }
    let mut kernel = C64::new(0.0, 0.0);
    let mut trajectories = Vec::new();
    let mut csv = String::from("trajectory,t,q,p\n");
    for (k, t) in outcome.trajectories.iter().enumerate() {
        kernel += t.kernel_term(&params)?;
        trajectories.push(json!({
            "p_initial": t.p_initial,
            "p_final": t.p_final,
            "action": t.action,
            "maslov": t.maslov,
            "monodromy": t.monodromy,
        }));
        for &(time, q, p) in &t.samples {
            csv.push_str(&format!("{k},{time},{q},{p}\n"));
        }
    }
    let exact = if config.compare_exact {
        match config.potential {
            PotentialSpec::Free => Some(free_kernel(
                config.x_final,
                config.x_initial,
                config.t_span,
                &params,
            )?),
            PotentialSpec::Harmonic { omega } => Some(harmonic_kernel(
                config.x_final,
                config.x_initial,
                config.t_span,
                omega,
                &params,
            )?),
            PotentialSpec::QuarticDoubleWell { .. } => None,
        }
    } else {
        None
    };
    let results = json!({
        "kernel": complex_json(kernel),
        "n_trajectories": outcome.trajectories.len(),
        "n_seed_failures": outcome.failures.len(),
        "trajectories": trajectories,
        "exact": exact.map(complex_json),
        "rel_error": exact.map(|e| (kernel - e).norm() / e.norm()),
    });
    Ok(ScenarioOutput {
        results,
        csv: Some(csv),
    })
}

pub fn run_scar(config: &ScarConfig) -> Result<ScenarioOutput> {
    let grid = config.grid.build()?;
    let params = config.params.build()?;
    let well = Harmonic::new(params.mass, config.omega);
    let period = 2.0 * std::f64::consts::PI / config.omega;
    let packet = gaussian_wavepacket(
        grid,
        config.packet.center,
        config.packet.momentum,
        config.packet.width,
        params.hbar,
    )?;
    let orbit = PeriodicOrbitSpec::solve(
        &well,
        &params,
        config.packet.center,
        config.packet.momentum,
        config.t_probe,
        period,
        &BvpConfig {
            n_steps: config.bvp_steps,
            ..BvpConfig::default()
        },
    )?;
    let v = ConfigFunction64::from_fn(grid, |x| {
        0.5 * params.mass * config.omega * config.omega * x * x
    })?;
    let setup = WeakMeasurementSetup {
        preselection: packet.clone(),
        postselection: packet.clone(),
        t_initial: 0.0,
        t_interaction: config.t_probe,
        t_final: period,
        observable: ConfigFunction64::constant(grid, 1.0)?,
        profile: pathweak::weak_values::InteractionProfile::contact(orbit.probe_point),
        coupling: 0.01,
        potential: v.clone(),
        params,
        floor: DENOMINATOR_FLOOR,
        evolution_steps: config.evolution_steps,
    };
    let early = KernelMatrix::harmonic(grid, 0.0, config.t_probe, config.omega, &params)?;
    let late = KernelMatrix::harmonic(grid, config.t_probe, period, config.omega, &params)?;
    let wv = weak_value_path(&setup, &early, &late)?;
    let reconstructed = pathweak::semiclassical::scar_autocorrelation(
        wv.value,
        &orbit,
        1.0,
        packet.amplitude_at(grid.nearest_index(config.packet.center)),
        params.hbar,
    )?;
    let evolved = trotter_propagate(&packet, &v, period, config.evolution_steps, &params)?;
    let direct = inner_product(&packet, &evolved)?;
    let results = json!({
        "weak_value": complex_json(wv.value),
        "reconstructed_autocorrelation": complex_json(reconstructed),
        "direct_autocorrelation": complex_json(direct),
        "rel_error": (reconstructed - direct).norm() / direct.norm(),
        "orbit": {
            "probe_point": orbit.probe_point,
            "action": orbit.action,
            "amp_to_probe": complex_json(orbit.amp_to_probe),
            "amp_back": complex_json(orbit.amp_back),
        },
    });
    Ok(ScenarioOutput {
        results,
        csv: None,
    })
}

pub fn run_classical(config: &ClassicalConfig, seed: u64) -> Result<ScenarioOutput> {
    let grid = config.grid.build()?;
    let params = config.params.build()?;
    let potential = config.potential.analytic(&params);
    let observable = config.observable.build(grid)?;
    let profile = config.profile.build();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ensemble = ClassicalEnsemble::gaussian(
        &mut rng,
        config.n_samples,
        config.ensemble.q0,
        config.ensemble.p0,
        config.ensemble.sigma_q,
        config.ensemble.sigma_p,
        0.0,
    )?;
    let domain = PostselectionDomain::position_interval(config.domain.lo, config.domain.hi);
    let shift = conditional_pointer_shift(
        &ensemble,
        &observable,
        &profile,
        config.coupling,
        &domain,
        potential.as_ref(),
        config.t_final,
        config.n_steps,
        &params,
        1e-9,
    )?;
    let results = json!({
        "shift": shift.shift,
        "shift_over_g": shift.shift / config.coupling,
        "accepted_fraction": shift.accepted_fraction,
        "std_error": shift.std_error,
        "n_accepted": shift.n_accepted,
        "kick_min": shift.kick_min,
        "kick_max": shift.kick_max,
        "n_samples": config.n_samples,
    });
    Ok(ScenarioOutput {
        results,
        csv: None,
    })
}
