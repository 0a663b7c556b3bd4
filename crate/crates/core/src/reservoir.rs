//! Input multiplexing and simulation of the delay reservoir, in discrete time
//! (Euler recursion over virtual neurons) and continuous time (RK4 on the
//! delay equation).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// RK4 sub-steps per neuron separation in the continuous model.
pub const RK4_SUBSTEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: f64,
}

impl ReservoirConfig {
    pub fn new(n: usize, d: f64) -> Result<Self> {
        let cfg = Self { n, d };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("reservoir needs N >= 1".into()));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "neuron separation d must be positive, got {}",
                self.d
            )));
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.n as f64 * self.d
    }

    pub fn xi(&self) -> f64 {
        self.d.ln_1p()
    }

    /// e^{-ξ} = 1 / (1 + d).
    pub fn decay(&self) -> f64 {
        1.0 / (1.0 + self.d)
    }

    /// 1 - e^{-ξ} = d / (1 + d).
    pub fn gain(&self) -> f64 {
        self.d / (1.0 + self.d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputMask {
    pub c: Vec<f64>,
}

impl InputMask {
    pub fn new(c: Vec<f64>) -> Self {
        Self { c }
    }

    /// Seeded mask with IID entries uniform on [low, high].
    pub fn uniform(n: usize, low: f64, high: f64, seed: u64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low <= high) {
            return Err(Error::InvalidConfig(format!("bad mask range [{low}, {high}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::new(
            (0..n)
                .map(|_| if low < high { rng.random_range(low..=high) } else { low })
                .collect(),
        ))
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn check(&self, cfg: &ReservoirConfig) -> Result<()> {
        if self.c.len() != cfg.n {
            return Err(Error::Dimension(format!(
                "mask has {} entries for N = {}",
                self.c.len(),
                cfg.n
            )));
        }
        if !self.c.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("mask entries must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronLayer {
    pub t: i64,
    pub x: Vec<f64>,
}

impl NeuronLayer {
    pub fn constant(t: i64, n: usize, value: f64) -> Self {
        Self { t, x: vec![value; n] }
    }
}

/// I = c z.
pub fn multiplex(mask: &InputMask, z: f64) -> Vec<f64> {
    mask.c.iter().map(|c| c * z).collect()
}

fn check_len(what: &str, got: usize, n: usize) -> Result<()> {
    if got == n {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what} has length {got}, expected {n}")))
    }
}

/// Reservoir map on raw slices: `out = F(prev, input)`.
pub fn step_into(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    prev: &[f64],
    input: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let n = cfg.n;
    check_len("previous layer", prev.len(), n)?;
    check_len("input", input.len(), n)?;
    check_len("output", out.len(), n)?;
    let decay = cfg.decay();
    let gain = cfg.gain();
    let mut carry = prev[n - 1];
    for i in 0..n {
        carry = decay * carry + gain * kernel.eval(prev[i], input[i])?;
        out[i] = carry;
    }
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("reservoir state".into()))
    }
}

/// One layer of the Euler recursion swept across the neurons.
pub fn step_discrete(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    prev: &NeuronLayer,
    input: &[f64],
) -> Result<NeuronLayer> {
    let mut x = vec![0.0; cfg.n];
    step_into(cfg, kernel, &prev.x, input, &mut x)?;
    Ok(NeuronLayer { t: prev.t + 1, x })
}

/// The same map written as explicit geometric sums over the previous layer.
pub fn step_unrolled(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    prev: &NeuronLayer,
    input: &[f64],
) -> Result<NeuronLayer> {
    let n = cfg.n;
    check_len("previous layer", prev.x.len(), n)?;
    check_len("input", input.len(), n)?;
    let decay = cfg.decay();
    let f: Vec<f64> = (0..n)
        .map(|i| kernel.eval(prev.x[i], input[i]))
        .collect::<Result<_>>()?;
    let x = (1..=n)
        .map(|r| {
            let sum: f64 = (0..r).map(|j| decay.powi(j as i32) * f[r - 1 - j]).sum();
            decay.powi(r as i32) * prev.x[n - 1] + cfg.gain() * sum
        })
        .collect();
    Ok(NeuronLayer { t: prev.t + 1, x })
}

/// Iterates the reservoir map with I(t) = c z(t) + bias.
pub fn run_discrete_biased(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    mask: &InputMask,
    signal: &[f64],
    bias: f64,
    init: &NeuronLayer,
) -> Result<Vec<NeuronLayer>> {
    mask.check(cfg)?;
    check_len("initial layer", init.x.len(), cfg.n)?;
    let mut out = Vec::with_capacity(signal.len());
    let mut input = vec![0.0; cfg.n];
    let mut prev = init.clone();
    for &z in signal {
        for (slot, c) in input.iter_mut().zip(&mask.c) {
            *slot = c * z + bias;
        }
        let next = step_discrete(cfg, kernel, &prev, &input)?;
        out.push(next.clone());
        prev = next;
    }
    Ok(out)
}

pub fn run_discrete(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    mask: &InputMask,
    signal: &[f64],
    init: &NeuronLayer,
) -> Result<Vec<NeuronLayer>> {
    run_discrete_biased(cfg, kernel, mask, signal, 0.0, init)
}

/// Fixed-step RK4 integrator for ẋ = -x + f(x(s - τ), I(s)).
///
/// The grid step is d/5, so a delay period spans exactly 5N steps and the
/// delayed value at a grid point is a stored sample. Midpoint stages read the
/// average of the two neighbouring samples.
pub struct ContinuousReservoir<'a> {
    cfg: ReservoirConfig,
    kernel: &'a Kernel,
    buf: Vec<f64>,
    /// Grid index of the current state.
    g: usize,
    layer: i64,
}

impl<'a> ContinuousReservoir<'a> {
    pub fn new(cfg: &ReservoirConfig, kernel: &'a Kernel, init_value: f64) -> Result<Self> {
        cfg.validate()?;
        let period = RK4_SUBSTEPS * cfg.n;
        Ok(Self {
            cfg: *cfg,
            kernel,
            buf: vec![init_value; period + 1],
            g: 0,
            layer: 0,
        })
    }

    fn at(&self, g: usize) -> f64 {
        self.buf[g % self.buf.len()]
    }

    /// Integrates one delay period with piecewise-constant inputs and writes
    /// the neuron samples into `out`.
    pub fn advance(&mut self, input: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.cfg.n;
        check_len("input", input.len(), n)?;
        check_len("output", out.len(), n)?;
        let period = RK4_SUBSTEPS * n;
        let h = self.cfg.d / RK4_SUBSTEPS as f64;
        for (i, &inp) in input.iter().enumerate() {
            for _ in 0..RK4_SUBSTEPS {
                // Slot g - period is overwritten by g + 1 after it is read.
                let lag0 = self.at(self.g + 1);
                let lag1 = self.at(self.g + 2);
                let f0 = self.kernel.eval(lag0, inp)?;
                let fm = self.kernel.eval(0.5 * (lag0 + lag1), inp)?;
                let f1 = self.kernel.eval(lag1, inp)?;
                let x = self.at(self.g);
                let k1 = -x + f0;
                let k2 = -(x + 0.5 * h * k1) + fm;
                let k3 = -(x + 0.5 * h * k2) + fm;
                let k4 = -(x + h * k3) + f1;
                let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if !next.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "continuous trajectory escaped in layer {}",
                        self.layer + 1
                    )));
                }
                self.g += 1;
                let len = self.buf.len();
                self.buf[self.g % len] = next;
            }
            out[i] = self.at(self.g);
        }
        debug_assert_eq!(self.g % period, 0);
        self.layer += 1;
        Ok(())
    }

    pub fn layer_index(&self) -> i64 {
        self.layer
    }
}

pub fn run_continuous_biased(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    mask: &InputMask,
    signal: &[f64],
    bias: f64,
    init_value: f64,
) -> Result<Vec<NeuronLayer>> {
    mask.check(cfg)?;
    let mut sim = ContinuousReservoir::new(cfg, kernel, init_value)?;
    let mut input = vec![0.0; cfg.n];
    let mut out = Vec::with_capacity(signal.len());
    for &z in signal {
        for (slot, c) in input.iter_mut().zip(&mask.c) {
            *slot = c * z + bias;
        }
        let mut x = vec![0.0; cfg.n];
        sim.advance(&input, &mut x)?;
        out.push(NeuronLayer {
            t: sim.layer_index(),
            x,
        });
    }
    Ok(out)
}

pub fn run_continuous(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    mask: &InputMask,
    signal: &[f64],
    init_value: f64,
) -> Result<Vec<NeuronLayer>> {
    run_continuous_biased(cfg, kernel, mask, signal, 0.0, init_value)
}

/// CSV with columns t, x_1..x_N and lossless float formatting.
pub fn layers_to_csv(layers: &[NeuronLayer]) -> String {
    let n = layers.first().map_or(0, |l| l.x.len());
    let mut s = String::from("t");
    for i in 1..=n {
        let _ = write!(s, ",x_{i}");
    }
    s.push('\n');
    for layer in layers {
        let _ = write!(s, "{}", layer.t);
        for v in &layer.x {
            let _ = write!(s, ",{v:.16e}");
        }
        s.push('\n');
    }
    s
}
