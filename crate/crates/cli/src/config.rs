//! Experiment documents and bundled presets.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tdr_core::optimize::{
    maximize_capacity, Axis, FreeParameters, MaskMetric, OptimizeOptions, ScanModel, ScanParam, ScanSpec,
};
use tdr_core::readout::{DEFAULT_LAMBDA, DEFAULT_SIGMA_Z};
use tdr_core::varmodel::DEFAULT_TAYLOR_ORDER;
use tdr_core::{InputMask, Kernel, McSettings, MemoryTask, OperatingPoint, ReservoirConfig, Setup, SimModel};

/// A problem with the experiment document itself (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub const PRESETS: &[(&str, &str)] = &[
    ("fig2", include_str!("../presets/fig2.json")),
    ("fig3", include_str!("../presets/fig3.json")),
    ("fig4", include_str!("../presets/fig4.json")),
    ("fig5", include_str!("../presets/fig5.json")),
    ("figE1", include_str!("../presets/figE1.json")),
    ("figE2", include_str!("../presets/figE2.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSpec {
    Values(Vec<f64>),
    Random { seed: u64, low: f64, high: f64 },
    /// Taken from a capacity maximization over the `optimize` fragment.
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    #[serde(default = "default_sigma")]
    pub sigma_z: f64,
    #[serde(default)]
    pub distribution: Distribution,
    /// Constant offset added to every neuron input.
    #[serde(default)]
    pub bias: f64,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA_Z
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_order() -> usize {
    DEFAULT_TAYLOR_ORDER
}

impl Default for InputSpec {
    fn default() -> Self {
        Self {
            sigma_z: DEFAULT_SIGMA_Z,
            distribution: Distribution::Gaussian,
            bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSpec {
    pub t_train: usize,
    pub t_test: usize,
    pub washout: usize,
    pub seed: u64,
    pub models: Vec<SimModel>,
    /// Consecutive seeds run by the `mc` command.
    pub repeats: usize,
}

impl Default for McSpec {
    fn default() -> Self {
        let d = McSettings::default();
        Self {
            t_train: d.t_train,
            t_test: d.t_test,
            washout: d.washout,
            seed: d.seed,
            models: vec![SimModel::Discrete],
            repeats: 1,
        }
    }
}

impl McSpec {
    pub fn settings(&self) -> McSettings {
        McSettings {
            t_train: self.t_train,
            t_test: self.t_test,
            washout: self.washout,
            seed: self.seed,
            ..McSettings::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimInput {
    Zero,
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_sim_model")]
    pub model: SimModel,
    pub steps: usize,
    #[serde(default)]
    pub input: SimInput,
}

fn default_sim_model() -> SimModel {
    SimModel::Discrete
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanFragment {
    pub axis1: Axis,
    #[serde(default)]
    pub axis2: Option<Axis>,
    #[serde(default = "default_scan_models")]
    pub models: Vec<ScanModel>,
}

fn default_scan_models() -> Vec<ScanModel> {
    vec![ScanModel::Theoretical]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBound {
    pub param: ScanParam,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeFragment {
    #[serde(default)]
    pub params: Vec<ParamBound>,
    /// Bounds for every mask entry; omit to keep the mask fixed.
    #[serde(default)]
    pub mask: Option<[f64; 2]>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_guard")]
    pub stability_guard: bool,
}

fn default_restarts() -> usize {
    OptimizeOptions::default().restarts
}

fn default_budget() -> usize {
    OptimizeOptions::default().budget
}

fn default_tolerance() -> f64 {
    OptimizeOptions::default().tolerance
}

fn default_guard() -> bool {
    true
}

impl OptimizeFragment {
    pub fn free(&self) -> FreeParameters {
        FreeParameters {
            params: self.params.iter().map(|p| (p.param, p.min, p.max)).collect(),
            mask: self.mask.map(|[lo, hi]| (lo, hi)),
        }
    }

    pub fn options(&self) -> OptimizeOptions {
        OptimizeOptions {
            restarts: self.restarts,
            seed: self.seed,
            budget: self.budget,
            tolerance: self.tolerance,
            stability_guard: self.stability_guard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StudyMetric {
    #[default]
    Theoretical,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskStudySpec {
    pub n_masks: usize,
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub metric: StudyMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: Kernel,
    pub reservoir: ReservoirConfig,
    pub mask: MaskSpec,
    #[serde(default)]
    pub input: InputSpec,
    pub task: MemoryTask,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_order")]
    pub taylor_order: usize,
    #[serde(default)]
    pub operating_point: OperatingPoint,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub simulate: Option<SimulateSpec>,
    #[serde(default)]
    pub scan: Option<ScanFragment>,
    #[serde(default)]
    pub optimize: Option<OptimizeFragment>,
    #[serde(default)]
    pub mask_study: Option<MaskStudySpec>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let text = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                ConfigError(format!("unknown preset {name:?}; available: {}", names.join(", ")))
            })?;
        Self::parse(text)
    }

    /// Applies a command-line seed to every seeded stage except the mask.
    pub fn override_seed(&mut self, seed: u64) {
        self.mc.seed = seed;
        if let Some(o) = &mut self.optimize {
            o.seed = seed;
        }
        if let Some(s) = &mut self.mask_study {
            s.seed = seed;
        }
    }

    fn setup_with_mask(&self, mask: InputMask) -> Setup {
        Setup {
            reservoir: self.reservoir,
            kernel: self.kernel,
            mask,
            task: self.task.clone(),
            sigma_z: self.input.sigma_z,
            lambda: self.lambda,
            taylor_order: self.taylor_order,
            operating_point: self.operating_point,
            input_bias: self.input.bias,
        }
    }

    /// Cross-checks that do not need any numerics.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.reservoir.n;
        match &self.mask {
            MaskSpec::Values(v) if v.len() != n => {
                return Err(ConfigError(format!("mask has {} entries for N = {n}", v.len())));
            }
            MaskSpec::Optimized => match &self.optimize {
                Some(o) if o.mask.is_some() => {}
                _ => {
                    return Err(ConfigError(
                        "an optimized mask needs an optimize fragment with mask bounds".into(),
                    ))
                }
            },
            _ => {}
        }
        let setup = self.setup_with_mask(InputMask::new(vec![0.0; n]));
        setup.validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.mc.models.is_empty() || self.mc.repeats == 0 {
            return Err(ConfigError("mc needs at least one model and one repeat".into()));
        }
        Ok(())
    }

    /// The experiment before any optimization. An optimized mask starts from
    /// a seeded draw inside its bounds.
    pub fn base_setup(&self) -> anyhow::Result<Setup> {
        self.validate()?;
        let n = self.reservoir.n;
        let mask = match &self.mask {
            MaskSpec::Values(v) => InputMask::new(v.clone()),
            MaskSpec::Random { seed, low, high } => {
                InputMask::uniform(n, *low, *high, *seed).map_err(|e| ConfigError(e.to_string()))?
            }
            MaskSpec::Optimized => {
                let o = self.optimize.as_ref().expect("checked by validate");
                let [lo, hi] = o.mask.expect("checked by validate");
                InputMask::uniform(n, lo, hi, o.seed).map_err(|e| ConfigError(e.to_string()))?
            }
        };
        Ok(self.setup_with_mask(mask))
    }

    /// The experiment with its mask resolved; an optimized mask runs the
    /// optimizer.
    pub fn setup(&self) -> anyhow::Result<Setup> {
        let base = self.base_setup()?;
        match (&self.mask, &self.optimize) {
            (MaskSpec::Optimized, Some(o)) => {
                let r = maximize_capacity(&base, &o.free(), &o.options())?;
                Ok(self.setup_with_mask(InputMask::new(r.c_opt)))
            }
            _ => Ok(base),
        }
    }

    pub fn scan_spec(&self, base: Setup) -> Result<ScanSpec, ConfigError> {
        let scan = self
            .scan
            .as_ref()
            .ok_or_else(|| ConfigError("the surface command needs a scan fragment".into()))?;
        Ok(ScanSpec {
            base,
            axis1: scan.axis1,
            axis2: scan.axis2,
            models: scan.models.clone(),
            mc: self.mc.settings(),
        })
    }

    pub fn study_metric(&self, spec: &MaskStudySpec) -> MaskMetric {
        match spec.metric {
            StudyMetric::Theoretical => MaskMetric::Theoretical,
            StudyMetric::MonteCarlo => MaskMetric::MonteCarlo {
                model: self.mc.models[0],
                mc: self.mc.settings(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for (name, _) in PRESETS {
            let c = ExperimentConfig::preset(name).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(PRESETS[2].1).unwrap();
        v["surprise"] = 1.into();
        assert!(ExperimentConfig::parse(&v.to_string()).is_err());
    }

    #[test]
    fn mask_length_is_cross_checked() {
        let mut c = ExperimentConfig::preset("fig4").unwrap();
        c.mask = MaskSpec::Values(vec![1.0; 3]);
        assert!(c.validate().is_err());
    }
}
