//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tdr_core::{InputMask, Kernel, Matrix, ReservoirConfig, Setup, Vector};

/// Double-double number: an unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn powi(self, n: u32) -> Self {
        (0..n).fold(Dd::ONE, |acc, _| acc * self)
    }

    /// Maclaurin series; fine for the moderate arguments used here.
    pub fn sin(self) -> Self {
        let x2 = self * self;
        let mut term = self;
        let mut sum = self;
        let mut k = 1.0;
        while term.hi.abs() > 1e-40 {
            term = -(term * x2) / Dd::new((2.0 * k) * (2.0 * k + 1.0));
            sum = sum + term;
            k += 1.0;
        }
        sum
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

/// Kernel value in double-double arithmetic. Mackey-Glass needs an integer
/// exponent.
pub fn kernel_dd(k: &Kernel, x: Dd, input: Dd) -> Dd {
    match *k {
        Kernel::MackeyGlass { eta, gamma, p } => {
            assert_eq!(p.fract(), 0.0);
            let u = x + Dd::new(gamma) * input;
            Dd::new(eta) * u / (Dd::ONE + u.powi(p as u32))
        }
        Kernel::Ikeda { eta, gamma, phi } => {
            let s = (x + Dd::new(gamma) * input + Dd::new(phi)).sin();
            Dd::new(eta) * s * s
        }
    }
}

/// F(x0·1, c z) - F(x0·1, 0) evaluated in double-double, with the decay and
/// gain formed from d directly.
pub fn input_response_dd(cfg: &ReservoirConfig, k: &Kernel, x0: f64, mask: &InputMask, z: f64) -> Vec<Dd> {
    let one_plus_d = Dd::ONE + Dd::new(cfg.d);
    let decay = Dd::ONE / one_plus_d;
    let gain = Dd::new(cfg.d) / one_plus_d;
    let x = Dd::new(x0);
    let base = kernel_dd(k, x, Dd::ZERO);
    let mut carry = Dd::ZERO;
    mask.c
        .iter()
        .map(|c| {
            let df = kernel_dd(k, x, Dd::new(*c) * Dd::new(z)) - base;
            carry = decay * carry + gain * df;
            carry
        })
        .collect()
}

/// Γ0 = Σ_k A^k Σ (Aᵀ)^k summed until the terms are negligible.
pub fn lyapunov_series(a: &Matrix, s: &Matrix) -> Matrix {
    let mut total = s.clone();
    let mut term = s.clone();
    for _ in 0..100_000 {
        term = a * &term * a.transpose();
        total += &term;
        if term.amax() <= 1e-18 * total.amax() {
            break;
        }
    }
    total
}

/// Dense eigensolver spectral radius.
pub fn dense_spectral_radius(a: &Matrix) -> f64 {
    a.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Matrix {
    let n = x.len();
    let m = f(x).len();
    let mut jac = Matrix::zeros(m, n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

pub fn normal_draws(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| normal.sample(&mut rng)).collect()
}

/// Sample mean and population covariance of the rows.
pub fn sample_moments(rows: &[Vector]) -> (Vector, Matrix) {
    let n = rows[0].len();
    let t = rows.len() as f64;
    let mean = rows.iter().fold(Vector::zeros(n), |acc, r| acc + r) / t;
    let mut cov = Matrix::zeros(n, n);
    for r in rows {
        let d = r - &mean;
        cov.ger(1.0 / t, &d, &d, 1.0);
    }
    (mean, cov)
}

/// Mask with IID uniform entries in [-scale, scale].
pub fn uniform_mask(n: usize, scale: f64, seed: u64) -> InputMask {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    InputMask::new((0..n).map(|_| scale * rng.random_range(-1.0..=1.0)).collect())
}

/// Mackey-Glass reservoir at η = 1.0781, γ = 0.796 around its positive
/// equilibrium, driven by N(0, 0.01²) and asked for a 3-lag quadratic task.
pub fn mg_setup(n: usize, d: f64, mask_seed: u64) -> Setup {
    Setup {
        reservoir: ReservoirConfig::new(n, d).unwrap(),
        kernel: Kernel::mackey_glass(1.0781, 0.796, 2.0),
        mask: uniform_mask(n, 1.0, mask_seed),
        task: tdr_core::MemoryTask::lagged_squares(3),
        sigma_z: 0.01,
        lambda: 1e-15,
        taylor_order: 8,
        operating_point: tdr_core::OperatingPoint::Largest,
        input_bias: 0.0,
    }
}

/// The Ikeda configuration with three equilibria, operated at the smallest.
pub fn ikeda_setup(mask_seed: u64) -> Setup {
    Setup {
        reservoir: ReservoirConfig::new(20, 0.2581).unwrap(),
        kernel: Kernel::ikeda(1.2443, 1.4762, 0.1161),
        mask: uniform_mask(20, 1.0, mask_seed),
        task: tdr_core::MemoryTask::lagged_squares(3),
        sigma_z: 0.01,
        lambda: 1e-15,
        taylor_order: 8,
        operating_point: tdr_core::OperatingPoint::Smallest,
        input_bias: 0.0,
    }
}

/// Least-squares slope of log(y) against log(x).
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (points - 1) as f64).exp())
        .collect()
}
