//! h-lag memory tasks y(t) = H(z(t), ..., z(t-h)), their exact moments under
//! IID input, and their covariance with the surrogate state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{serde_vec, Vector};
use crate::reservoir::ReservoirConfig;
use crate::varmodel::{raw_moment, VarApprox};

const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskSpec", into = "TaskSpec")]
pub enum MemoryTask {
    /// y = Lᵀ (z(t), ..., z(t-h)).
    Linear { l: Vec<f64> },
    /// y = wᵀ Q w with w = (z(t), ..., z(t-h)); `q` is row-major.
    Quadratic { q: Vec<Vec<f64>> },
}

/// Config fragment: {"type", "h", "L" | "Q_diag" | "Q"}.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskSpec {
    #[serde(rename = "type")]
    kind: TaskKind,
    h: usize,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    l: Option<Vec<f64>>,
    #[serde(rename = "Q_diag", default, skip_serializing_if = "Option::is_none")]
    q_diag: Option<Vec<f64>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    q: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TaskKind {
    Linear,
    Quadratic,
}

impl TryFrom<TaskSpec> for MemoryTask {
    type Error = Error;

    fn try_from(spec: TaskSpec) -> Result<Self> {
        let task = match (spec.kind, spec.l, spec.q_diag, spec.q) {
            (TaskKind::Linear, Some(l), None, None) => MemoryTask::linear(l)?,
            (TaskKind::Quadratic, None, Some(diag), None) => MemoryTask::quadratic_diag(&diag)?,
            (TaskKind::Quadratic, None, None, Some(q)) => MemoryTask::quadratic(q)?,
            (TaskKind::Linear, ..) => {
                return Err(Error::InvalidConfig("linear task needs exactly \"L\"".into()))
            }
            (TaskKind::Quadratic, ..) => {
                return Err(Error::InvalidConfig(
                    "quadratic task needs exactly one of \"Q_diag\" or \"Q\"".into(),
                ))
            }
        };
        if task.h() != spec.h {
            return Err(Error::Dimension(format!(
                "task declares h = {} but its weights imply h = {}",
                spec.h,
                task.h()
            )));
        }
        Ok(task)
    }
}

impl From<MemoryTask> for TaskSpec {
    fn from(task: MemoryTask) -> Self {
        let h = task.h();
        match task {
            MemoryTask::Linear { l } => TaskSpec {
                kind: TaskKind::Linear,
                h,
                l: Some(l),
                q_diag: None,
                q: None,
            },
            MemoryTask::Quadratic { q } => TaskSpec {
                kind: TaskKind::Quadratic,
                h,
                l: None,
                q_diag: None,
                q: Some(q),
            },
        }
    }
}

/// Mean, variance and state covariance of a task on a surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatistics {
    pub mean: f64,
    pub variance: f64,
    #[serde(with = "serde_vec")]
    pub cov: Vector,
}

impl MemoryTask {
    pub fn linear(l: Vec<f64>) -> Result<Self> {
        if l.is_empty() || !l.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("linear task weights must be finite and non-empty".into()));
        }
        Ok(MemoryTask::Linear { l })
    }

    pub fn quadratic(q: Vec<Vec<f64>>) -> Result<Self> {
        let m = q.len();
        if m == 0 || q.iter().any(|row| row.len() != m) {
            return Err(Error::Dimension("Q must be a non-empty square matrix".into()));
        }
        for i in 0..m {
            for j in 0..m {
                if !q[i][j].is_finite() {
                    return Err(Error::InvalidConfig("Q entries must be finite".into()));
                }
                if (q[i][j] - q[j][i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::InvalidConfig(format!(
                        "Q is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(MemoryTask::Quadratic { q })
    }

    pub fn quadratic_diag(diag: &[f64]) -> Result<Self> {
        let m = diag.len();
        let q = (0..m)
            .map(|i| (0..m).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self::quadratic(q)
    }

    /// Σ_{k=1..h} z(t-k)², the default quadratic memory task.
    pub fn lagged_squares(h: usize) -> Self {
        let mut diag = vec![1.0; h + 1];
        diag[0] = 0.0;
        Self::quadratic_diag(&diag).expect("finite diagonal")
    }

    pub fn h(&self) -> usize {
        match self {
            MemoryTask::Linear { l } => l.len() - 1,
            MemoryTask::Quadratic { q } => q.len() - 1,
        }
    }

    /// Evaluates the task on the window (z(t), z(t-1), ..., z(t-h)).
    pub fn eval(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.h() + 1 {
            return Err(Error::Dimension(format!(
                "task window has length {}, expected {}",
                window.len(),
                self.h() + 1
            )));
        }
        Ok(self.eval_unchecked(window))
    }

    pub(crate) fn eval_unchecked(&self, w: &[f64]) -> f64 {
        match self {
            MemoryTask::Linear { l } => l.iter().zip(w).map(|(a, b)| a * b).sum(),
            MemoryTask::Quadratic { q } => q
                .iter()
                .zip(w)
                .map(|(row, wi)| wi * row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                .sum(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        match self {
            MemoryTask::Linear { l } => MemoryTask::Linear {
                l: l.iter().map(|v| alpha * v).collect(),
            },
            MemoryTask::Quadratic { q } => MemoryTask::Quadratic {
                q: q.iter().map(|r| r.iter().map(|v| alpha * v).collect()).collect(),
            },
        }
    }

    fn check(moments: &[f64], needed: usize) -> Result<()> {
        if moments.len() < needed {
            Err(Error::MomentLength {
                needed,
                got: moments.len(),
            })
        } else {
            Ok(())
        }
    }

    /// E[y] under IID input with the given raw moments.
    pub fn mean(&self, moments: &[f64]) -> Result<f64> {
        Self::check(moments, 2)?;
        let m1 = moments[0];
        Ok(match self {
            MemoryTask::Linear { l } => m1 * l.iter().sum::<f64>(),
            MemoryTask::Quadratic { q } => {
                let mut s = 0.0;
                for (i, row) in q.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        s += v * if i == j { moments[1] } else { m1 * m1 };
                    }
                }
                s
            }
        })
    }

    /// var(y) under IID input; the quadratic case requires centered input.
    pub fn variance(&self, moments: &[f64]) -> Result<f64> {
        match self {
            MemoryTask::Linear { l } => {
                Self::check(moments, 2)?;
                let var_z = moments[1] - moments[0] * moments[0];
                Ok(var_z * l.iter().map(|v| v * v).sum::<f64>())
            }
            MemoryTask::Quadratic { q } => {
                Self::check(moments, 4)?;
                if moments[0] != 0.0 {
                    return Err(Error::InvalidConfig(
                        "quadratic task variance needs centered input".into(),
                    ));
                }
                let s2 = moments[1] * moments[1];
                let mut diag = 0.0;
                let mut off = 0.0;
                for (i, row) in q.iter().enumerate() {
                    diag += row[i] * row[i];
                    off += row[i + 1..].iter().map(|v| v * v).sum::<f64>();
                }
                Ok((moments[3] - s2) * diag + 4.0 * s2 * off)
            }
        }
    }

    /// Cov(y(t), x(t)) on the surrogate, summed over the lags the task uses.
    pub fn state_covariance(&self, var: &VarApprox, cfg: &ReservoirConfig, moments: &[f64]) -> Result<Vector> {
        if !(var.spectral_radius < 1.0) {
            return Err(Error::Unstable(var.spectral_radius));
        }
        let q0 = var.q.expect(moments, 0)?;
        let m1 = raw_moment(moments, 1);
        let m2 = raw_moment(moments, 2);
        let lag_terms: Vec<Vector> = match self {
            MemoryTask::Linear { l } => {
                // Cov(z, ε) = gain (p_R - μ_1 q_R)
                let cz = var.q.expect(moments, 1)? - &q0 * m1;
                l.iter().map(|w| &cz * *w).collect()
            }
            MemoryTask::Quadratic { q } => {
                // Cov(z², ε) = gain (s_R - μ_2 q_R); off-diagonal weights only
                // enter through the input mean.
                let cz2 = var.q.expect(moments, 2)? - &q0 * m2;
                let cz = var.q.expect(moments, 1)? - &q0 * m1;
                q.iter()
                    .enumerate()
                    .map(|(k, row)| {
                        let cross: f64 = row.iter().enumerate().filter(|(b, _)| *b != k).map(|(_, v)| v).sum();
                        &cz2 * row[k] + &cz * (2.0 * m1 * cross)
                    })
                    .collect()
            }
        };
        // Σ_k A^k v_k by Horner's rule.
        let mut acc = Vector::zeros(var.n());
        for v in lag_terms.iter().rev() {
            acc = &var.a * acc + v;
        }
        Ok(acc * cfg.gain())
    }

    pub fn statistics(&self, var: &VarApprox, cfg: &ReservoirConfig, moments: &[f64]) -> Result<TaskStatistics> {
        Ok(TaskStatistics {
            mean: self.mean(moments)?,
            variance: self.variance(moments)?,
            cov: self.state_covariance(var, cfg, moments)?,
        })
    }
}
