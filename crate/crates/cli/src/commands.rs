use anyhow::Result;
use serde::Serialize;
use tdr_core::linalg::{inf_norm, spectral_radius};
use tdr_core::optimize::{maximize_capacity, random_mask_study_with, scan_to_csv, surface_scan, MaskStudy, OptimizationResult};
use tdr_core::readout::gaussian_signal;
use tdr_core::reservoir::{layers_to_csv, run_continuous_biased, run_discrete_biased};
use tdr_core::varmodel::{char_poly_spectral_radius, connectivity};
use tdr_core::{Certificate, Equilibrium, Kernel, LyapunovMethod, NeuronLayer, SimModel};

use crate::config::{ConfigError, ExperimentConfig, SimInput};

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct EquilibriaReport {
    kernel: Kernel,
    interval: [f64; 2],
    equilibria: Vec<Equilibrium>,
    operating_point: Option<f64>,
}

pub fn equilibria(cfg: &ExperimentConfig) -> Result<String> {
    let (lo, hi) = cfg.kernel.equilibrium_search_interval();
    let equilibria = cfg.kernel.find_equilibria(lo, hi);
    let operating_point = cfg.operating_point.select(&equilibria).map(|k| equilibria[k].x0);
    json(&EquilibriaReport {
        kernel: cfg.kernel,
        interval: [lo, hi],
        equilibria,
        operating_point,
    })
}

#[derive(Serialize)]
struct StabilityReport {
    x0: f64,
    derivative: f64,
    certificate: Certificate,
    lower_neighbour: Option<f64>,
    upper_neighbour: Option<f64>,
    inf_norm: f64,
    norm_bound_stable: bool,
    spectral_radius: f64,
    char_poly_spectral_radius: Option<f64>,
}

pub fn stability(cfg: &ExperimentConfig) -> Result<String> {
    let setup = cfg.setup()?;
    let op = setup.operating_equilibrium()?;
    let a = connectivity(&setup.reservoir, &setup.kernel, op.x0())?;
    let phi = setup.reservoir.gain() * op.equilibrium.derivative;
    let norm = inf_norm(&a);
    json(&StabilityReport {
        x0: op.x0(),
        derivative: op.equilibrium.derivative,
        certificate: op.equilibrium.certificate,
        lower_neighbour: op.lower_neighbour,
        upper_neighbour: op.upper_neighbour,
        inf_norm: norm,
        norm_bound_stable: tdr_core::varmodel::norm_bound_stable(&setup.reservoir, &setup.kernel, op.x0())?,
        spectral_radius: spectral_radius(&a),
        char_poly_spectral_radius: char_poly_spectral_radius(&setup.reservoir, phi).ok(),
    })
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<String> {
    let spec = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| ConfigError("the simulate command needs a simulate fragment".into()))?;
    let setup = cfg.setup()?;
    let x0 = setup.operating_equilibrium()?.x0();
    let signal = match spec.input {
        SimInput::Zero => vec![0.0; spec.steps],
        SimInput::Gaussian => gaussian_signal(spec.steps, setup.sigma_z, cfg.mc.seed)?,
    };
    let (r, k, m, b) = (&setup.reservoir, &setup.kernel, &setup.mask, setup.input_bias);
    let init = NeuronLayer::constant(0, r.n, x0);
    let rest = match spec.model {
        SimModel::Discrete => run_discrete_biased(r, k, m, &signal, b, &init)?,
        SimModel::Continuous => run_continuous_biased(r, k, m, &signal, b, x0)?,
        SimModel::Linearized => {
            return Err(ConfigError("simulate supports the discrete and continuous models".into()).into())
        }
    };
    let mut layers = vec![init];
    layers.extend(rest);
    Ok(layers_to_csv(&layers))
}

pub fn capacity(cfg: &ExperimentConfig) -> Result<String> {
    let setup = cfg.setup()?;
    json(&setup.theoretical(LyapunovMethod::Auto)?)
}

pub fn surface(cfg: &ExperimentConfig) -> Result<String> {
    let spec = cfg.scan_spec(cfg.setup()?)?;
    Ok(scan_to_csv(&surface_scan(&spec)?))
}

#[derive(Serialize)]
struct OptimizeReport {
    #[serde(flatten)]
    result: OptimizationResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask_study: Option<MaskStudy>,
}

pub fn optimize(cfg: &ExperimentConfig) -> Result<String> {
    let o = cfg
        .optimize
        .as_ref()
        .ok_or_else(|| ConfigError("the optimize command needs an optimize fragment".into()))?;
    let base = cfg.base_setup()?;
    let free = o.free();
    let result = maximize_capacity(&base, &free, &o.options())?;
    let mask_study = match &cfg.mask_study {
        Some(spec) => {
            let best = free.write(&base, &result.x_opt)?;
            Some(random_mask_study_with(
                &best,
                spec.n_masks,
                (spec.low, spec.high),
                spec.seed,
                &cfg.study_metric(spec),
            )?)
        }
        None => None,
    };
    json(&OptimizeReport { result, mask_study })
}

pub fn mc(cfg: &ExperimentConfig) -> Result<String> {
    let setup = cfg.setup()?;
    let mut out = String::from("seed,model,nmse\n");
    for r in 0..cfg.mc.repeats as u64 {
        let mut settings = cfg.mc.settings();
        settings.seed = cfg.mc.seed.wrapping_add(r);
        for model in &cfg.mc.models {
            let (o, _) = setup.monte_carlo(*model, &settings)?;
            out.push_str(&format!("{},{},{:.16e}\n", settings.seed, model.name(), o.nmse));
        }
    }
    Ok(out)
}
