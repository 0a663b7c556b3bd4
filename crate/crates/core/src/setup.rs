//! A fully specified experiment: reservoir, kernel, mask, task and input
//! statistics, with the rule that picks the operating equilibrium.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Certificate, Equilibrium, Kernel};
use crate::linalg::LyapunovMethod;
use crate::readout::{capacity_for, monte_carlo_nmse, CapacityReport, McOutcome, McSettings, SimModel};
use crate::reservoir::{InputMask, ReservoirConfig};
use crate::tasks::MemoryTask;
use crate::varmodel::{gaussian_moments, required_moments, VarApprox};

/// Which equilibrium of the kernel the reservoir is operated around.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatingPoint {
    #[default]
    Largest,
    Smallest,
    Nearest { x: f64 },
}

impl OperatingPoint {
    /// Index into an ascending equilibrium list.
    pub fn select(&self, eqs: &[Equilibrium]) -> Option<usize> {
        if eqs.is_empty() {
            return None;
        }
        match *self {
            OperatingPoint::Largest => Some(eqs.len() - 1),
            OperatingPoint::Smallest => Some(0),
            OperatingPoint::Nearest { x } => eqs
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1.x0 - x).abs().total_cmp(&(b.1.x0 - x).abs()))
                .map(|(i, _)| i),
        }
    }
}

/// The chosen equilibrium together with its neighbours, which bound the
/// basin it sits in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingEquilibrium {
    pub equilibrium: Equilibrium,
    pub lower_neighbour: Option<f64>,
    pub upper_neighbour: Option<f64>,
}

impl OperatingEquilibrium {
    pub fn x0(&self) -> f64 {
        self.equilibrium.x0
    }

    /// True when a trajectory range reaches a neighbouring equilibrium.
    pub fn crossed(&self, state_min: f64, state_max: f64) -> bool {
        self.lower_neighbour.is_some_and(|lo| state_min <= lo)
            || self.upper_neighbour.is_some_and(|hi| state_max >= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub reservoir: ReservoirConfig,
    pub kernel: Kernel,
    pub mask: InputMask,
    pub task: MemoryTask,
    pub sigma_z: f64,
    pub lambda: f64,
    pub taylor_order: usize,
    pub operating_point: OperatingPoint,
    /// Constant added to every neuron input.
    pub input_bias: f64,
}

impl Setup {
    pub fn validate(&self) -> Result<()> {
        self.reservoir.validate()?;
        self.kernel.validate()?;
        self.mask.check(&self.reservoir)?;
        if !(self.sigma_z >= 0.0 && self.sigma_z.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma_z must be >= 0, got {}", self.sigma_z)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.taylor_order == 0 {
            return Err(Error::InvalidConfig("taylor_order must be >= 1".into()));
        }
        if !self.input_bias.is_finite() {
            return Err(Error::InvalidConfig("input bias must be finite".into()));
        }
        Ok(())
    }

    pub fn moments(&self) -> Vec<f64> {
        gaussian_moments(self.sigma_z, required_moments(self.taylor_order).max(4))
    }

    pub fn equilibria(&self) -> Vec<Equilibrium> {
        let (lo, hi) = self.kernel.equilibrium_search_interval();
        self.kernel.find_equilibria(lo, hi)
    }

    pub fn operating_equilibrium(&self) -> Result<OperatingEquilibrium> {
        let eqs = self.equilibria();
        let k = self
            .operating_point
            .select(&eqs)
            .ok_or_else(|| Error::Domain(format!("kernel {:?} has no equilibrium", self.kernel)))?;
        Ok(OperatingEquilibrium {
            equilibrium: eqs[k],
            lower_neighbour: k.checked_sub(1).map(|j| eqs[j].x0),
            upper_neighbour: eqs.get(k + 1).map(|e| e.x0),
        })
    }

    pub fn surrogate(&self, x0: f64, method: LyapunovMethod) -> Result<VarApprox> {
        VarApprox::build_with(
            &self.reservoir,
            &self.kernel,
            x0,
            &self.mask,
            self.taylor_order,
            &self.moments(),
            method,
        )
    }

    /// Closed-form capacity around the selected equilibrium.
    pub fn theoretical(&self, method: LyapunovMethod) -> Result<CapacityReport> {
        self.validate()?;
        if self.input_bias != 0.0 {
            return Err(Error::InvalidConfig(
                "closed-form capacity assumes zero input bias".into(),
            ));
        }
        let op = self.operating_equilibrium()?;
        let var = self.surrogate(op.x0(), method)?;
        let moments = self.moments();
        let stats = self.task.statistics(&var, &self.reservoir, &moments)?;
        capacity_for(&var, &stats, self.lambda)
    }

    /// Guarded variant used by the optimizer: the operating point must carry
    /// an asymptotic stability certificate.
    pub fn theoretical_certified(&self, method: LyapunovMethod) -> Result<CapacityReport> {
        let op = self.operating_equilibrium()?;
        if op.equilibrium.certificate != Certificate::CertifiedAsymptoticallyStable {
            return Err(Error::Unstable(op.equilibrium.derivative.abs()));
        }
        self.theoretical(method)
    }

    pub fn mc_settings(&self, base: &McSettings) -> McSettings {
        McSettings {
            sigma_z: self.sigma_z,
            lambda: self.lambda,
            input_bias: self.input_bias,
            taylor_order: self.taylor_order,
            ..*base
        }
    }

    pub fn monte_carlo(&self, model: SimModel, base: &McSettings) -> Result<(McOutcome, OperatingEquilibrium)> {
        self.validate()?;
        let op = self.operating_equilibrium()?;
        let out = monte_carlo_nmse(
            &self.reservoir,
            &self.kernel,
            &self.mask,
            &self.task,
            op.x0(),
            model,
            &self.mc_settings(base),
        )?;
        Ok((out, op))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mg_quadratic() -> Setup {
        Setup {
            reservoir: ReservoirConfig::new(10, 0.3).unwrap(),
            kernel: Kernel::mackey_glass(1.0781, 0.796, 2.0),
            mask: InputMask::new((0..10).map(|i| ((i * 7 % 10) as f64 / 3.0) - 1.5).collect()),
            task: MemoryTask::lagged_squares(3),
            sigma_z: 0.01,
            lambda: 1e-15,
            taylor_order: 8,
            operating_point: OperatingPoint::Largest,
            input_bias: 0.0,
        }
    }

    #[test]
    fn positive_branch_is_selected() {
        let op = mg_quadratic().operating_equilibrium().unwrap();
        assert!((op.x0() - 0.0781_f64.sqrt()).abs() < 1e-9);
        assert!((op.lower_neighbour.unwrap()).abs() < 1e-9);
        assert!(op.upper_neighbour.is_none());
        assert!(op.crossed(-0.1, 0.3));
        assert!(!op.crossed(0.1, 0.5));
    }

    #[test]
    fn nearest_policy() {
        let mut s = mg_quadratic();
        s.kernel = Kernel::ikeda(1.2443, 1.4762, 0.1161);
        s.operating_point = OperatingPoint::Nearest { x: 0.0 };
        let op = s.operating_equilibrium().unwrap();
        assert!((op.x0() - 0.0244).abs() < 1e-3);
        assert!((op.upper_neighbour.unwrap() - 0.9075).abs() < 1e-3);
    }

    #[test]
    fn theoretical_capacity_in_band() {
        let r = mg_quadratic().theoretical(LyapunovMethod::Kronecker).unwrap();
        assert!(r.capacity > 0.0 && r.capacity < 1.0, "{}", r.capacity);
        let d = mg_quadratic().theoretical(LyapunovMethod::Doubling).unwrap();
        assert!((r.capacity - d.capacity).abs() < 1e-6, "{} vs {}", r.capacity, d.capacity);
    }
}
