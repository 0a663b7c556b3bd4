//! Parameter-surface scans, multistart Nelder-Mead maximization of the
//! closed-form capacity, and random-mask distribution studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::LyapunovMethod;
use crate::readout::{McSettings, SimModel};
use crate::reservoir::InputMask;
use crate::setup::Setup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParam {
    D,
    Eta,
    Gamma,
    Phi,
    MaskMean,
    MaskVariance,
    /// Constant offset added to every neuron input.
    InputMean,
}

impl ScanParam {
    pub fn name(self) -> &'static str {
        match self {
            ScanParam::D => "d",
            ScanParam::Eta => "eta",
            ScanParam::Gamma => "gamma",
            ScanParam::Phi => "phi",
            ScanParam::MaskMean => "mask_mean",
            ScanParam::MaskVariance => "mask_variance",
            ScanParam::InputMean => "input_mean",
        }
    }

    pub fn get(self, s: &Setup) -> Result<f64> {
        Ok(match self {
            ScanParam::D => s.reservoir.d,
            ScanParam::Eta => s.kernel.eta(),
            ScanParam::Gamma => s.kernel.gamma(),
            ScanParam::Phi => match s.kernel {
                Kernel::Ikeda { phi, .. } => phi,
                Kernel::MackeyGlass { .. } => {
                    return Err(Error::InvalidConfig("phi is an Ikeda parameter".into()))
                }
            },
            ScanParam::MaskMean => mask_stats(&s.mask.c).0,
            ScanParam::MaskVariance => mask_stats(&s.mask.c).1,
            ScanParam::InputMean => s.input_bias,
        })
    }

    /// Returns a copy of `s` with this parameter set to `value`. Mask moments
    /// are changed by shifting or rescaling the standardized base pattern.
    pub fn apply(self, s: &Setup, value: f64) -> Result<Setup> {
        let mut out = s.clone();
        match self {
            ScanParam::D => out.reservoir.d = value,
            ScanParam::Eta => out.kernel = s.kernel.with_eta(value),
            ScanParam::Gamma => out.kernel = s.kernel.with_gamma(value),
            ScanParam::Phi => match &mut out.kernel {
                Kernel::Ikeda { phi, .. } => *phi = value,
                Kernel::MackeyGlass { .. } => {
                    return Err(Error::InvalidConfig("phi is an Ikeda parameter".into()))
                }
            },
            ScanParam::MaskMean => {
                let (mean, _) = mask_stats(&s.mask.c);
                out.mask = InputMask::new(s.mask.c.iter().map(|c| c - mean + value).collect());
            }
            ScanParam::MaskVariance => {
                if value < 0.0 {
                    return Err(Error::InvalidConfig("mask variance must be >= 0".into()));
                }
                let (mean, var) = mask_stats(&s.mask.c);
                if var == 0.0 && value > 0.0 {
                    return Err(Error::Degenerate("constant mask has no pattern to rescale".into()));
                }
                let scale = if var == 0.0 { 0.0 } else { (value / var).sqrt() };
                out.mask = InputMask::new(s.mask.c.iter().map(|c| mean + scale * (c - mean)).collect());
            }
            ScanParam::InputMean => out.input_bias = value,
        }
        Ok(out)
    }
}

/// Population mean and variance of the mask entries.
pub fn mask_stats(c: &[f64]) -> (f64, f64) {
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: ScanParam,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.steps)
            .map(|k| {
                if k + 1 == self.steps {
                    self.max
                } else {
                    self.min + span * k as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanModel {
    Theoretical,
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub base: Setup,
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub models: Vec<ScanModel>,
    pub mc: McSettings,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        let axes: Vec<&Axis> = std::iter::once(&self.axis1).chain(self.axis2.as_ref()).collect();
        for a in &axes {
            if a.steps < 2 {
                return Err(Error::InvalidConfig(format!("axis {} needs at least 2 steps", a.param.name())));
            }
            if !(a.min.is_finite() && a.max.is_finite()) {
                return Err(Error::InvalidConfig(format!("axis {} bounds must be finite", a.param.name())));
            }
        }
        if let Some(a2) = &self.axis2 {
            if a2.param == self.axis1.param {
                return Err(Error::InvalidConfig("scan axes must name distinct parameters".into()));
            }
        }
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("scan needs at least one model".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    UnstableSurrogate,
    TrajectoryEscape,
    DomainError,
}

impl CellStatus {
    pub fn name(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::UnstableSurrogate => "unstable_surrogate",
            CellStatus::TrajectoryEscape => "trajectory_escape",
            CellStatus::DomainError => "domain_error",
        }
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Unstable(_) | Error::Singular(_) | Error::CapacityOutOfBand(_) => {
                CellStatus::UnstableSurrogate
            }
            Error::NonFinite(_) => CellStatus::TrajectoryEscape,
            _ => CellStatus::DomainError,
        }
    }

    /// Keeps the first failure seen in a cell.
    fn merge(self, other: CellStatus) -> Self {
        if self == CellStatus::Ok {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub index: usize,
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub status: CellStatus,
    pub x0: Option<f64>,
    pub nmse_theory: Option<f64>,
    pub nmse_discrete: Option<f64>,
    pub nmse_continuous: Option<f64>,
    /// Range of the simulated states, first simulated model.
    pub state_min: Option<f64>,
    pub state_max: Option<f64>,
    pub state_mean: Option<f64>,
    /// Whether a simulated trajectory reached a neighbouring equilibrium.
    pub basin_crossing: Option<bool>,
    pub message: Option<String>,
}

fn scan_cell(spec: &ScanSpec, index: usize, v1: f64, v2: Option<f64>) -> ScanRow {
    let mut row = ScanRow {
        index,
        axis1: v1,
        axis2: v2,
        status: CellStatus::Ok,
        x0: None,
        nmse_theory: None,
        nmse_discrete: None,
        nmse_continuous: None,
        state_min: None,
        state_max: None,
        state_mean: None,
        basin_crossing: None,
        message: None,
    };
    let setup = spec.axis1.param.apply(&spec.base, v1).and_then(|s| match (&spec.axis2, v2) {
        (Some(a2), Some(v)) => a2.param.apply(&s, v),
        _ => Ok(s),
    });
    let setup = match setup.and_then(|s| s.validate().map(|_| s)) {
        Ok(s) => s,
        Err(e) => {
            row.status = CellStatus::from_error(&e);
            row.message = Some(e.to_string());
            return row;
        }
    };
    let fail = |row: &mut ScanRow, e: Error| {
        row.status = row.status.merge(CellStatus::from_error(&e));
        if row.message.is_none() {
            row.message = Some(e.to_string());
        }
    };
    match setup.operating_equilibrium() {
        Ok(op) => row.x0 = Some(op.x0()),
        Err(e) => {
            fail(&mut row, e);
            return row;
        }
    }
    for model in &spec.models {
        match model {
            ScanModel::Theoretical => {
                if setup.input_bias != 0.0 {
                    continue;
                }
                match setup.theoretical(LyapunovMethod::Auto) {
                    Ok(r) => row.nmse_theory = Some(r.nmse_theoretical),
                    Err(e) => fail(&mut row, e),
                }
            }
            ScanModel::Discrete | ScanModel::Continuous => {
                let sim = if *model == ScanModel::Discrete {
                    SimModel::Discrete
                } else {
                    SimModel::Continuous
                };
                match setup.monte_carlo(sim, &spec.mc) {
                    Ok((out, op)) => {
                        if sim == SimModel::Discrete {
                            row.nmse_discrete = Some(out.nmse);
                        } else {
                            row.nmse_continuous = Some(out.nmse);
                        }
                        if row.state_min.is_none() {
                            row.state_min = Some(out.state_min);
                            row.state_max = Some(out.state_max);
                            row.state_mean = Some(out.state_mean);
                        }
                        let crossed = op.crossed(out.state_min, out.state_max);
                        row.basin_crossing = Some(row.basin_crossing.unwrap_or(false) || crossed);
                    }
                    Err(e) => fail(&mut row, e),
                }
            }
        }
    }
    row
}

/// Evaluates every grid cell in parallel; rows come back in grid order
/// (axis1 outer, axis2 inner) with per-cell status codes.
pub fn surface_scan(spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    spec.validate()?;
    let v1 = spec.axis1.values();
    let v2: Vec<Option<f64>> = match &spec.axis2 {
        Some(a) => a.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let cells: Vec<(f64, Option<f64>)> = v1
        .iter()
        .flat_map(|a| v2.iter().map(move |b| (*a, *b)))
        .collect();
    Ok(cells
        .par_iter()
        .enumerate()
        .map(|(i, (a, b))| scan_cell(spec, i, *a, *b))
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// CSV with columns axis1, axis2, status, nmse_theory, nmse_discrete,
/// nmse_continuous, basin_crossing.
pub fn scan_to_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("axis1,axis2,status,nmse_theory,nmse_discrete,nmse_continuous,basin_crossing\n");
    for r in rows {
        s.push_str(&format!(
            "{:.16e},{},{},{},{},{},{}\n",
            r.axis1,
            fmt_opt(r.axis2),
            r.status.name(),
            fmt_opt(r.nmse_theory),
            fmt_opt(r.nmse_discrete),
            fmt_opt(r.nmse_continuous),
            r.basin_crossing.map(|b| if b { "1" } else { "0" }).unwrap_or("")
        ));
    }
    s
}

/// Bounded Nelder-Mead maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// (evaluation count, objective) each time the best vertex improves.
    pub improvements: Vec<(usize, f64)>,
}

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Maximizes `f` from `start` with at most `budget` further evaluations.
/// Trial points are projected onto the box. Non-finite values rank as -∞.
pub fn nelder_mead_max(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    start: &[f64],
    start_value: f64,
    bounds: &[(f64, f64)],
    budget: usize,
    tol: f64,
) -> NelderMeadResult {
    let n = start.len();
    let score = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut evals = 0usize;
    let mut improvements = vec![(0, start_value)];
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.to_vec(), start_value)];
    for i in 0..n {
        if evals >= budget {
            break;
        }
        let (lo, hi) = bounds[i];
        let step = 0.1 * (hi - lo);
        let mut x = start.to_vec();
        x[i] = if x[i] + step <= hi { x[i] + step } else { x[i] - step };
        clamp_into(&mut x, bounds);
        let v = score(&x);
        evals += 1;
        simplex.push((x, v));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best = start_value;
    if simplex.len() == n + 1 {
        loop {
            order(&mut simplex);
            if simplex[0].1 > best {
                best = simplex[0].1;
                improvements.push((evals, best));
            }
            if evals >= budget {
                break;
            }
            let spread = simplex[0].1 - simplex[n].1;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(x, _)| {
                    x.iter().zip(&simplex[0].0).zip(bounds).map(|((a, b), (lo, hi))| {
                        let w = hi - lo;
                        if w > 0.0 { (a - b).abs() / w } else { 0.0 }
                    })
                })
                .fold(0.0, f64::max);
            if spread.is_finite() && spread.abs() <= tol * (1.0 + simplex[0].1.abs()) && diameter <= tol.sqrt() {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| {
                let mut p: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect();
                clamp_into(&mut p, bounds);
                p
            };
            let xr = along(1.0);
            let fr = score(&xr);
            evals += 1;
            if fr > simplex[0].1 && evals < budget {
                let xe = along(2.0);
                let fe = score(&xe);
                evals += 1;
                simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr > simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            if evals >= budget {
                if fr > worst.1 {
                    simplex[n] = (xr, fr);
                }
                continue;
            }
            let (xc, fc) = if fr > worst.1 {
                let x = along(0.5);
                let v = score(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = score(&x);
                (x, v)
            };
            evals += 1;
            if fc > worst.1.max(fr) || (fc > worst.1 && fr <= worst.1) {
                simplex[n] = (xc, fc);
                continue;
            }
            // Shrink toward the best vertex.
            let best_x = simplex[0].0.clone();
            for k in 1..=n {
                if evals >= budget {
                    break;
                }
                let mut x: Vec<f64> = best_x.iter().zip(&simplex[k].0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                clamp_into(&mut x, bounds);
                let v = score(&x);
                evals += 1;
                simplex[k] = (x, v);
            }
        }
    }
    order(&mut simplex);
    let (x, value) = if simplex[0].1 > start_value || simplex.len() == 1 {
        simplex[0].clone()
    } else {
        (start.to_vec(), start_value)
    };
    NelderMeadResult {
        x,
        value,
        evaluations: evals,
        improvements,
    }
}

/// What the optimizer may change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParameters {
    /// Scalar parameters with their bounds.
    #[serde(default)]
    pub params: Vec<(ScanParam, f64, f64)>,
    /// Bounds for every mask entry when the mask is free.
    #[serde(default)]
    pub mask: Option<(f64, f64)>,
}

impl FreeParameters {
    pub fn dimension(&self, n: usize) -> usize {
        self.params.len() + if self.mask.is_some() { n } else { 0 }
    }

    pub fn bounds(&self, n: usize) -> Vec<(f64, f64)> {
        let mut b: Vec<(f64, f64)> = self.params.iter().map(|(_, lo, hi)| (*lo, *hi)).collect();
        if let Some(mb) = self.mask {
            b.extend(std::iter::repeat(mb).take(n));
        }
        b
    }

    pub fn read(&self, s: &Setup) -> Result<Vec<f64>> {
        let mut x: Vec<f64> = self.params.iter().map(|(p, _, _)| p.get(s)).collect::<Result<_>>()?;
        if self.mask.is_some() {
            x.extend_from_slice(&s.mask.c);
        }
        Ok(x)
    }

    pub fn write(&self, base: &Setup, x: &[f64]) -> Result<Setup> {
        let mut s = base.clone();
        for ((p, _, _), v) in self.params.iter().zip(x) {
            s = p.apply(&s, *v)?;
        }
        if self.mask.is_some() {
            s.mask = InputMask::new(x[self.params.len()..].to_vec());
        }
        Ok(s)
    }

    pub fn validate(&self, base: &Setup) -> Result<()> {
        for (p, lo, hi) in &self.params {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig(format!("bad bounds for {}", p.name())));
            }
            if matches!(p, ScanParam::InputMean) {
                return Err(Error::InvalidConfig("the input mean has no closed-form objective".into()));
            }
        }
        if let Some((lo, hi)) = self.mask {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig("bad mask bounds".into()));
            }
        }
        if self.dimension(base.reservoir.n) == 0 {
            return Err(Error::InvalidConfig("nothing to optimize".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Objective evaluations allowed per restart after its starting point.
    pub budget: usize,
    pub tolerance: f64,
    pub stability_guard: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            budget: 2_000,
            tolerance: 1e-10,
            stability_guard: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub evaluation: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub theta_opt: Kernel,
    pub d_opt: f64,
    pub c_opt: Vec<f64>,
    pub x_opt: Vec<f64>,
    pub capacity_opt: f64,
    pub nmse_opt: f64,
    pub restart: usize,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
}

/// The optimizer's objective: closed-form capacity, or -∞ where the
/// surrogate is unusable.
pub fn capacity_objective(base: &Setup, free: &FreeParameters, x: &[f64], guard: bool) -> f64 {
    let method = LyapunovMethod::Doubling;
    let report = free.write(base, x).and_then(|s| {
        if guard {
            s.theoretical_certified(method)
        } else {
            s.theoretical(method)
        }
    });
    match report {
        Ok(r) => r.capacity,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Multistart Nelder-Mead on the capacity. Restart 0 starts from the base
/// configuration, the others from seeded uniform points in the box.
pub fn maximize_capacity(base: &Setup, free: &FreeParameters, opts: &OptimizeOptions) -> Result<OptimizationResult> {
    base.validate()?;
    free.validate(base)?;
    let objective = |x: &[f64]| capacity_objective(base, free, x, opts.stability_guard);
    maximize(&objective, base, free, opts)
}

pub(crate) fn maximize(
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
    base: &Setup,
    free: &FreeParameters,
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    let n = base.reservoir.n;
    let bounds = free.bounds(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let restarts = opts.restarts.max(1);
    let mut starts = Vec::with_capacity(restarts);
    let mut x = free.read(base)?;
    clamp_into(&mut x, &bounds);
    starts.push(x);
    for _ in 1..restarts {
        starts.push(
            bounds
                .iter()
                .map(|(lo, hi)| if lo < hi { rng.random_range(*lo..=*hi) } else { *lo })
                .collect(),
        );
    }
    let start_values: Vec<f64> = starts.par_iter().map(|x| objective(x)).collect();
    if start_values.iter().all(|v| *v == f64::NEG_INFINITY || v.is_nan()) {
        return Err(Error::NoFeasiblePoint);
    }
    let runs: Vec<NelderMeadResult> = starts
        .par_iter()
        .zip(&start_values)
        .map(|(x, v)| {
            if v.is_finite() {
                nelder_mead_max(objective, x, *v, &bounds, opts.budget, opts.tolerance)
            } else {
                NelderMeadResult {
                    x: x.clone(),
                    value: *v,
                    evaluations: 0,
                    improvements: vec![(0, *v)],
                }
            }
        })
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value > runs[best].value {
            best = i;
        }
    }
    let trace = runs
        .iter()
        .enumerate()
        .flat_map(|(restart, r)| {
            r.improvements.iter().map(move |(evaluation, objective)| TraceEntry {
                restart,
                evaluation: *evaluation,
                objective: *objective,
            })
        })
        .collect();
    let winner = &runs[best];
    let s = free.write(base, &winner.x)?;
    Ok(OptimizationResult {
        theta_opt: s.kernel,
        d_opt: s.reservoir.d,
        c_opt: s.mask.c.clone(),
        x_opt: winner.x.clone(),
        capacity_opt: winner.value,
        nmse_opt: 1.0 - winner.value,
        restart: best,
        trace,
        evaluations: restarts + runs.iter().map(|r| r.evaluations).sum::<usize>(),
    })
}

/// Type-7 sample quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl BoxSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q1 = quantile(&v, 0.25);
        let q3 = quantile(&v, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        // Whiskers end at the most extreme observations inside the fences.
        let whisker_low = v.iter().copied().find(|x| *x >= lo_fence).unwrap_or(q1);
        let whisker_high = v.iter().rev().copied().find(|x| *x <= hi_fence).unwrap_or(q3);
        Some(Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: quantile(&v, 0.5),
            q1,
            q3,
            whisker_low,
            whisker_high,
            outliers: v.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect(),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskStudy {
    pub n: usize,
    pub nmse: Vec<f64>,
    pub failed: usize,
    pub summary: Option<BoxSummary>,
}

/// How each random mask is scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MaskMetric {
    Theoretical,
    MonteCarlo { model: SimModel, mc: McSettings },
}

/// Theoretical NMSE of `n_masks` masks with IID uniform entries in `range`.
pub fn random_mask_study(base: &Setup, n_masks: usize, range: (f64, f64), seed: u64) -> Result<MaskStudy> {
    random_mask_study_with(base, n_masks, range, seed, &MaskMetric::Theoretical)
}

pub fn random_mask_study_with(
    base: &Setup,
    n_masks: usize,
    range: (f64, f64),
    seed: u64,
    metric: &MaskMetric,
) -> Result<MaskStudy> {
    base.validate()?;
    if n_masks == 0 {
        return Err(Error::InvalidConfig("need at least one mask".into()));
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidConfig(format!("bad mask range [{lo}, {hi}]")));
    }
    let n = base.reservoir.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks: Vec<Vec<f64>> = (0..n_masks)
        .map(|_| (0..n).map(|_| if lo < hi { rng.random_range(lo..=hi) } else { lo }).collect())
        .collect();
    let values: Vec<Option<f64>> = masks
        .par_iter()
        .map(|c| {
            let mut s = base.clone();
            s.mask = InputMask::new(c.clone());
            match metric {
                MaskMetric::Theoretical => s.theoretical(LyapunovMethod::Doubling).ok().map(|r| r.nmse_theoretical),
                MaskMetric::MonteCarlo { model, mc } => s.monte_carlo(*model, mc).ok().map(|(o, _)| o.nmse),
            }
        })
        .collect();
    let nmse: Vec<f64> = values.iter().flatten().copied().collect();
    Ok(MaskStudy {
        n,
        failed: n_masks - nmse.len(),
        summary: BoxSummary::from_values(&nmse),
        nmse,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
