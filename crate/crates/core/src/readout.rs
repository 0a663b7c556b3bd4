//! Closed-form capacity of the optimal ridge readout on the surrogate, plus
//! the empirical counterparts (ridge training, NMSE, Monte Carlo runs).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::{serde_vec, spd_solve, Matrix, Vector};
use crate::reservoir::{step_into, ContinuousReservoir, InputMask, ReservoirConfig};
use crate::tasks::{MemoryTask, TaskStatistics};
use crate::varmodel::{connectivity, QPolynomial, VarApprox, DEFAULT_TAYLOR_ORDER};

/// How far outside [0, 1] a computed capacity may land before it is treated
/// as an error rather than rounding.
pub const CAPACITY_BAND_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_LAMBDA: f64 = 1e-15;
pub const DEFAULT_SIGMA_Z: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub capacity: f64,
    pub nmse_theoretical: f64,
    #[serde(rename = "W_out", with = "serde_vec")]
    pub w_out: Vector,
    pub a_out: f64,
    pub lambda: f64,
}

/// C = covᵀ (Γ0 + λI)^{-1} (Γ0 + 2λI) (Γ0 + λI)^{-1} cov / var(y).
pub fn capacity(var: &VarApprox, cov: &Vector, var_y: f64, mean_y: f64, lambda: f64) -> Result<CapacityReport> {
    if !(var_y > 0.0) {
        return Err(Error::NonPositiveVariance(var_y));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge parameter must be >= 0, got {lambda}")));
    }
    let n = var.n();
    if cov.len() != n {
        return Err(Error::Dimension(format!("covariance has length {}, expected {n}", cov.len())));
    }
    let regularized = &var.gamma0 + Matrix::identity(n, n) * lambda;
    let w = spd_solve(&regularized, cov)?;
    let quad = w.dot(&(&var.gamma0 * &w)) + 2.0 * lambda * w.dot(&w);
    let raw = quad / var_y;
    if !raw.is_finite() {
        return Err(Error::NonFinite("capacity".into()));
    }
    if !(-CAPACITY_BAND_TOLERANCE..=1.0 + CAPACITY_BAND_TOLERANCE).contains(&raw) {
        return Err(Error::CapacityOutOfBand(raw));
    }
    let c = raw.clamp(0.0, 1.0);
    let a_out = mean_y - w.dot(&var.mu_x);
    Ok(CapacityReport {
        capacity: c,
        nmse_theoretical: 1.0 - c,
        w_out: w,
        a_out,
        lambda,
    })
}

pub fn capacity_for(var: &VarApprox, stats: &TaskStatistics, lambda: f64) -> Result<CapacityReport> {
    capacity(var, &stats.cov, stats.variance, stats.mean, lambda)
}

/// Ridge regression with centered 1/T sample moments.
pub fn ridge_fit(x: &Matrix, y: &[f64], lambda: f64) -> Result<(Vector, f64)> {
    let (t, n) = x.shape();
    if y.len() != t {
        return Err(Error::Dimension(format!("{t} rows against {} targets", y.len())));
    }
    if t == 0 {
        return Err(Error::Dimension("no samples".into()));
    }
    let tf = t as f64;
    let x_mean: Vector = x.row_sum().transpose() / tf;
    let y_mean = y.iter().sum::<f64>() / tf;
    let mut sxx = Matrix::zeros(n, n);
    let mut sxy = Vector::zeros(n);
    let mut dx = Vector::zeros(n);
    for (row, &yv) in x.row_iter().zip(y) {
        for j in 0..n {
            dx[j] = row[j] - x_mean[j];
        }
        sxx.syger(1.0, &dx, &dx, 1.0);
        sxy.axpy(yv - y_mean, &dx, 1.0);
    }
    sxx.fill_upper_triangle_with_lower_triangle();
    sxx /= tf;
    sxy /= tf;
    for j in 0..n {
        sxx[(j, j)] += lambda;
    }
    let w = if sxy.iter().all(|v| *v == 0.0) {
        Vector::zeros(n)
    } else if lambda == 0.0 {
        sxx.clone()
            .cholesky()
            .map(|c| c.solve(&sxy))
            .ok_or_else(|| Error::Singular("sample covariance is rank deficient".into()))?
    } else {
        spd_solve(&sxx, &sxy)?
    };
    let a = y_mean - w.dot(&x_mean);
    Ok((w, a))
}

pub fn predict(x: &Matrix, w: &Vector, a: f64) -> Vec<f64> {
    (x * w).iter().map(|v| v + a).collect()
}

/// Mean square error over the population variance of the target.
pub fn nmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || target.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions against {} targets",
            pred.len(),
            target.len()
        )));
    }
    let t = target.len() as f64;
    let mean = target.iter().sum::<f64>() / t;
    let var = target.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
    if !(var > 0.0) {
        return Err(Error::NonPositiveVariance(var));
    }
    let mse = pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / t;
    Ok(mse / var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Discrete,
    Continuous,
    #[serde(alias = "linearized_var")]
    Linearized,
}

impl SimModel {
    pub fn name(self) -> &'static str {
        match self {
            SimModel::Discrete => "discrete",
            SimModel::Continuous => "continuous",
            SimModel::Linearized => "linearized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub t_train: usize,
    pub t_test: usize,
    pub washout: usize,
    pub seed: u64,
    pub sigma_z: f64,
    pub lambda: f64,
    /// Constant added to every neuron input, I = c z + bias.
    pub input_bias: f64,
    /// Taylor order of the linearized model.
    pub taylor_order: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            t_train: 40_000,
            t_test: 10_000,
            washout: 200,
            seed: 0,
            sigma_z: DEFAULT_SIGMA_Z,
            lambda: DEFAULT_LAMBDA,
            input_bias: 0.0,
            taylor_order: DEFAULT_TAYLOR_ORDER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOutcome {
    pub nmse: f64,
    pub state_min: f64,
    pub state_max: f64,
    pub state_mean: f64,
}

/// Seeded IID N(0, σ²) input sequence.
pub fn gaussian_signal(len: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidConfig(format!("input standard deviation {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..len).map(|_| normal.sample(&mut rng)).collect())
}

/// Simulates `model` driven by seeded Gaussian input, fits a ridge readout on
/// the training segment and reports the test NMSE.
pub fn monte_carlo_nmse(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    mask: &InputMask,
    task: &MemoryTask,
    x0: f64,
    model: SimModel,
    s: &McSettings,
) -> Result<McOutcome> {
    cfg.validate()?;
    mask.check(cfg)?;
    let n = cfg.n;
    let h = task.h();
    if s.t_train < 10 * n || s.t_test < 10 * n {
        return Err(Error::InvalidConfig(format!(
            "training and test segments need at least 10 N = {} samples",
            10 * n
        )));
    }
    let washout = s.washout.max(h);
    let total = washout + s.t_train + s.t_test;
    let z = gaussian_signal(total, s.sigma_z, s.seed)?;
    let kept = s.t_train + s.t_test;
    let mut states = Matrix::zeros(kept, n);
    let mut x = vec![x0; n];
    let mut next = vec![0.0; n];
    let mut input = vec![0.0; n];
    let mut stats = (f64::INFINITY, f64::NEG_INFINITY, 0.0);

    let mut record = |t: usize, x: &[f64], states: &mut Matrix| {
        if t >= washout {
            for (j, v) in x.iter().enumerate() {
                states[(t - washout, j)] = *v;
                stats.0 = stats.0.min(*v);
                stats.1 = stats.1.max(*v);
                stats.2 += *v;
            }
        }
    };

    match model {
        SimModel::Discrete => {
            for (t, zt) in z.iter().enumerate() {
                for (slot, c) in input.iter_mut().zip(&mask.c) {
                    *slot = c * zt + s.input_bias;
                }
                step_into(cfg, kernel, &x, &input, &mut next)?;
                std::mem::swap(&mut x, &mut next);
                record(t, &x, &mut states);
            }
        }
        SimModel::Continuous => {
            let mut sim = ContinuousReservoir::new(cfg, kernel, x0)?;
            for (t, zt) in z.iter().enumerate() {
                for (slot, c) in input.iter_mut().zip(&mask.c) {
                    *slot = c * zt + s.input_bias;
                }
                sim.advance(&input, &mut x)?;
                record(t, &x, &mut states);
            }
        }
        SimModel::Linearized => {
            if s.input_bias != 0.0 {
                return Err(Error::InvalidConfig(
                    "the linearized model is expanded around zero input bias".into(),
                ));
            }
            let a = connectivity(cfg, kernel, x0)?;
            let q = QPolynomial::new(cfg, kernel, x0, mask, s.taylor_order)?;
            let mut f_fixed = vec![0.0; n];
            step_into(cfg, kernel, &vec![x0; n], &vec![0.0; n], &mut f_fixed)?;
            let gain = cfg.gain();
            let mut dev = Vector::zeros(n);
            for (t, zt) in z.iter().enumerate() {
                let eps = q.eval(*zt);
                dev = &a * &dev + eps * gain;
                for j in 0..n {
                    // F(x0·1, 0) = x0·1 up to root tolerance; keep its offset.
                    x[j] = f_fixed[j] + dev[j];
                }
                if !dev.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("linearized trajectory".into()));
                }
                record(t, &x, &mut states);
            }
        }
    }

    let target: Vec<f64> = (washout..total)
        .map(|t| {
            let window: Vec<f64> = (0..=h).map(|k| z[t - k]).collect();
            task.eval_unchecked(&window)
        })
        .collect();
    let train = states.rows(0, s.t_train).into_owned();
    let test = states.rows(s.t_train, s.t_test).into_owned();
    let (w, a) = ridge_fit(&train, &target[..s.t_train], s.lambda)?;
    let pred = predict(&test, &w, a);
    let value = nmse(&pred, &target[s.t_train..])?;
    Ok(McOutcome {
        nmse: value,
        state_min: stats.0,
        state_max: stats.1,
        state_mean: stats.2 / (kept * n) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LyapunovMethod;
    use crate::varmodel::gaussian_moments;
    use approx::assert_relative_eq;

    fn scalar_var(gamma0: f64) -> VarApprox {
        let a = Matrix::from_element(1, 1, 0.5);
        VarApprox {
            x0: 0.0,
            taylor_order: 1,
            stable: true,
            spectral_radius: 0.5,
            a,
            mu_eps: Vector::zeros(1),
            sigma_eps: Matrix::from_element(1, 1, 0.75 * gamma0),
            mu_x: Vector::zeros(1),
            gamma0: Matrix::from_element(1, 1, gamma0),
            q: QPolynomial {
                coeffs: Matrix::zeros(1, 1),
            },
        }
    }

    #[test]
    fn scalar_capacity() {
        let v = scalar_var(1.0);
        let r = capacity(&v, &Vector::from_element(1, 0.8), 1.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(r.capacity, 0.64, epsilon = 1e-15);
        assert_relative_eq!(r.w_out[0], 0.8, epsilon = 1e-15);
        assert_eq!(r.capacity + r.nmse_theoretical, 1.0);
        let z = capacity(&v, &Vector::zeros(1), 1.0, 0.0, 0.0).unwrap();
        assert_eq!(z.capacity, 0.0);
        assert_eq!(z.w_out[0], 0.0);
        assert!(matches!(
            capacity(&v, &Vector::zeros(1), 0.0, 0.0, 0.0),
            Err(Error::NonPositiveVariance(_))
        ));
    }

    #[test]
    fn capacity_out_of_band_is_reported() {
        let v = scalar_var(1.0);
        assert!(matches!(
            capacity(&v, &Vector::from_element(1, 2.0), 1.0, 0.0, 0.0),
            Err(Error::CapacityOutOfBand(_))
        ));
    }

    #[test]
    fn shrinkage_drives_capacity_to_zero() {
        let v = scalar_var(1.0);
        let cov = Vector::from_element(1, 0.8);
        let mut prev = f64::INFINITY;
        for lambda in [1.0, 1e3, 1e6, 1e12] {
            let c = capacity(&v, &cov, 1.0, 0.0, lambda).unwrap().capacity;
            assert!(c < prev);
            prev = c;
        }
        assert!(prev < 1e-11);
    }

    #[test]
    fn ridge_examples() {
        let x = Matrix::from_column_slice(5, 1, &[1.0, 2.0, -1.0, 0.5, 3.0]);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let (w, a) = ridge_fit(&x, &y, 0.0).unwrap();
        assert_relative_eq!(w[0], 2.0, epsilon = 1e-10);
        assert!(a.abs() < 1e-10);
        let (w, a) = ridge_fit(&x, &[4.0; 5], 0.1).unwrap();
        assert_eq!(w[0], 0.0);
        assert_eq!(a, 4.0);
        let rank_deficient = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            ridge_fit(&rank_deficient, &[1.0, 2.0, 4.0], 0.0),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn nmse_examples() {
        let target = [1.0, 3.0, -2.0, 6.0];
        assert_eq!(nmse(&target, &target).unwrap(), 0.0);
        let mean = target.iter().sum::<f64>() / 4.0;
        assert_relative_eq!(nmse(&[mean; 4], &target).unwrap(), 1.0, epsilon = 1e-15);
        let half: Vec<f64> = target.iter().map(|v| 0.5 * (v + mean)).collect();
        assert_relative_eq!(nmse(&half, &target).unwrap(), 0.25, epsilon = 1e-15);
        assert!(matches!(nmse(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::NonPositiveVariance(_))));
    }

    #[test]
    fn state_probe_is_recovered_exactly() {
        let cfg = ReservoirConfig::new(6, 0.4).unwrap();
        let k = Kernel::mackey_glass(1.0781, 0.796, 2.0);
        let mask = InputMask::new(vec![0.3, -0.7, 1.2, 0.1, -0.4, 0.9]);
        let z = gaussian_signal(2_000, 0.01, 3).unwrap();
        let init = crate::reservoir::NeuronLayer::constant(0, 6, 0.0781_f64.sqrt());
        let layers = crate::reservoir::run_discrete(&cfg, &k, &mask, &z, &init).unwrap();
        let x = Matrix::from_fn(1_800, 6, |t, j| layers[t + 200].x[j]);
        let y: Vec<f64> = (0..1_800).map(|t| layers[t + 200].x[0]).collect();
        let (w, a) = ridge_fit(&x, &y, 1e-15).unwrap();
        assert!(nmse(&predict(&x, &w, a), &y).unwrap() < 1e-6);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let cfg = ReservoirConfig::new(5, 0.3).unwrap();
        let k = Kernel::mackey_glass(1.0781, 0.796, 2.0);
        let mask = InputMask::new(vec![0.5, -1.0, 0.8, 0.2, -0.3]);
        let task = MemoryTask::lagged_squares(2);
        let s = McSettings {
            t_train: 2_000,
            t_test: 500,
            seed: 11,
            ..McSettings::default()
        };
        let x0 = 0.0781_f64.sqrt();
        for model in [SimModel::Discrete, SimModel::Continuous, SimModel::Linearized] {
            let a = monte_carlo_nmse(&cfg, &k, &mask, &task, x0, model, &s).unwrap();
            let b = monte_carlo_nmse(&cfg, &k, &mask, &task, x0, model, &s).unwrap();
            assert_eq!(a, b);
            assert!(a.nmse.is_finite() && a.nmse > 0.0);
        }
    }

    #[test]
    fn linearized_model_tracks_closed_form() {
        let cfg = ReservoirConfig::new(6, 0.4).unwrap();
        let k = Kernel::mackey_glass(1.0781, 0.796, 2.0);
        let x0 = 0.0781_f64.sqrt();
        let mask = InputMask::new(vec![0.3, -0.7, 1.2, 0.1, -0.4, 0.9]);
        let task = MemoryTask::linear(vec![0.0, 1.0]).unwrap();
        let m = gaussian_moments(0.01, 16);
        let v = VarApprox::build_with(&cfg, &k, x0, &mask, 8, &m, LyapunovMethod::Kronecker).unwrap();
        let stats = task.statistics(&v, &cfg, &m).unwrap();
        let rep = capacity_for(&v, &stats, 1e-15).unwrap();
        let s = McSettings {
            t_train: 20_000,
            t_test: 20_000,
            seed: 5,
            ..McSettings::default()
        };
        let mc = monte_carlo_nmse(&cfg, &k, &mask, &task, x0, SimModel::Linearized, &s).unwrap();
        assert!((mc.nmse - rep.nmse_theoretical).abs() < 0.02, "{} vs {}", mc.nmse, rep.nmse_theoretical);
    }
}
