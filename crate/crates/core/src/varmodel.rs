//! The VAR(1) surrogate of the reservoir around a fixed point x0·1:
//! x(t) = F(x0·1, 0) + A (x(t-1) - x0·1) + ε(t), with A the connectivity
//! matrix and ε(t) the Taylor expansion of the input response.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, RESIDUAL_TOLERANCE};
use crate::linalg::{
    self, condition_number, discrete_lyapunov, inf_norm, serde_rows, serde_vec, spectral_radius,
    LyapunovMethod, Matrix, Vector,
};
use crate::reservoir::{step_into, InputMask, ReservoirConfig};

pub const DEFAULT_TAYLOR_ORDER: usize = 8;
pub const MAX_CONDITION: f64 = 1e12;
/// Slack below 1 required of the row-sum norm, absorbing summation rounding.
pub const NORM_SLACK: f64 = 256.0 * f64::EPSILON;

/// Input-expansion coefficients a_i^{(r)}, stored as an R×N matrix with row
/// i-1 holding the order-i coefficients for every neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPolynomial {
    #[serde(with = "serde_rows")]
    pub coeffs: Matrix,
}

impl QPolynomial {
    pub fn new(cfg: &ReservoirConfig, kernel: &Kernel, x0: f64, mask: &InputMask, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("Taylor order must be >= 1".into()));
        }
        mask.check(cfg)?;
        let taylor = kernel.input_taylor(x0, order)?;
        let decay = cfg.decay();
        let mut coeffs = Matrix::zeros(order, cfg.n);
        for (i, b) in taylor.iter().enumerate() {
            let power = (i + 1) as i32;
            let mut acc = 0.0;
            for (r, c) in mask.c.iter().enumerate() {
                acc = decay * acc + c.powi(power);
                coeffs[(i, r)] = b * acc;
            }
        }
        if coeffs.iter().all(|v| v.is_finite()) {
            Ok(Self { coeffs })
        } else {
            Err(Error::NonFinite("input expansion coefficients".into()))
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn n(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Σ_i a_i^{(r)} z^i for every neuron r.
    pub fn eval(&self, z: f64) -> Vector {
        let mut out = Vector::zeros(self.n());
        let mut zi = 1.0;
        for i in 0..self.order() {
            zi *= z;
            out.axpy(zi, &self.coeffs.row(i).transpose(), 1.0);
        }
        out
    }

    /// Σ_i a_i^{(r)} μ_{i+shift}: shift 0, 1, 2 give the expectations of the
    /// polynomial, of z times it and of z² times it.
    pub fn expect(&self, moments: &[f64], shift: usize) -> Result<Vector> {
        let needed = self.order() + shift;
        check_moments(moments, needed)?;
        let mut out = Vector::zeros(self.n());
        for i in 0..self.order() {
            out.axpy(raw_moment(moments, i + 1 + shift), &self.coeffs.row(i).transpose(), 1.0);
        }
        Ok(out)
    }
}

fn check_moments(moments: &[f64], needed: usize) -> Result<()> {
    if moments.len() < needed {
        Err(Error::MomentLength {
            needed,
            got: moments.len(),
        })
    } else {
        Ok(())
    }
}

/// E[z^k] with μ_0 = 1; `moments[k-1]` holds the k-th raw moment.
pub fn raw_moment(moments: &[f64], k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        moments[k - 1]
    }
}

/// Raw moments E[z^k], k = 1..=max_order, of N(0, σ²).
pub fn gaussian_moments(sigma: f64, max_order: usize) -> Vec<f64> {
    let var = sigma * sigma;
    let mut out = Vec::with_capacity(max_order);
    let mut even = 1.0;
    for k in 1..=max_order {
        if k % 2 == 1 {
            out.push(0.0);
        } else {
            // (2l)! / (2^l l!) σ^{2l} = (2l-1)!! σ^{2l}
            even *= (k - 1) as f64 * var;
            out.push(even);
        }
    }
    out
}

/// Moments needed to assemble the surrogate and task covariances.
pub fn required_moments(order: usize) -> usize {
    (2 * order).max(order + 2)
}

fn check_equilibrium(kernel: &Kernel, x0: f64) -> Result<()> {
    let residual = (kernel.eval(x0, 0.0)? - x0).abs();
    if residual <= RESIDUAL_TOLERANCE {
        Ok(())
    } else {
        Err(Error::NotAnEquilibrium { x0, residual })
    }
}

/// A for a given kernel slope f' = ∂_x f(x0, 0).
pub fn connectivity_from_derivative(cfg: &ReservoirConfig, fprime: f64) -> Matrix {
    let n = cfg.n;
    let decay = cfg.decay();
    let phi = cfg.gain() * fprime;
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        let mut w = phi;
        for j in (0..=i).rev() {
            a[(i, j)] = w;
            w *= decay;
        }
    }
    let mut e = 1.0;
    for i in 0..n {
        e *= decay;
        a[(i, n - 1)] += e;
    }
    a
}

/// Jacobian of the reservoir map at x0·1 with zero input.
pub fn connectivity(cfg: &ReservoirConfig, kernel: &Kernel, x0: f64) -> Result<Matrix> {
    check_equilibrium(kernel, x0)?;
    Ok(connectivity_from_derivative(cfg, kernel.dx(x0, 0.0)?))
}

pub fn norm_bound_stable_from_derivative(cfg: &ReservoirConfig, fprime: f64) -> bool {
    inf_norm(&connectivity_from_derivative(cfg, fprime)) < 1.0 - NORM_SLACK
}

/// Row-sum norm test |||A|||_∞ < 1.
pub fn norm_bound_stable(cfg: &ReservoirConfig, kernel: &Kernel, x0: f64) -> Result<bool> {
    Ok(inf_norm(&connectivity(cfg, kernel, x0)?) < 1.0 - NORM_SLACK)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients (ascending powers) of the monic polynomial whose roots scaled
/// by Φ are the eigenvalues of A.
pub fn char_poly_coeffs(cfg: &ReservoirConfig, phi: f64) -> Vec<f64> {
    let n = cfg.n;
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    c[n - 1] = -((-(n as f64) * cfg.xi()).exp() / phi + n as f64);
    for (j, slot) in c.iter_mut().enumerate().take(n.saturating_sub(1)) {
        let sign = if (n - j) % 2 == 0 { 1.0 } else { -1.0 };
        *slot = sign * binomial(n, j);
    }
    c
}

fn horner(c: &[f64], z: Complex<f64>) -> (Complex<f64>, Complex<f64>) {
    let mut p = Complex::new(0.0, 0.0);
    let mut dp = Complex::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// Roots of a monic real polynomial from its companion matrix, polished by
/// Newton steps.
pub fn monic_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let n = c.len() - 1;
    if n == 1 {
        return vec![Complex::new(-c[0], 0.0)];
    }
    let mut comp = Matrix::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -c[i];
    }
    comp.complex_eigenvalues()
        .iter()
        .map(|&z0| {
            let mut z = z0;
            for _ in 0..3 {
                let (p, dp) = horner(c, z);
                if dp.norm() == 0.0 {
                    break;
                }
                let next = z - p / dp;
                if !(next.re.is_finite() && next.im.is_finite()) {
                    break;
                }
                if horner(c, next).0.norm() <= p.norm() {
                    z = next;
                } else {
                    break;
                }
            }
            z
        })
        .collect()
}

/// ρ(A) computed from the characteristic polynomial of A/Φ.
pub fn char_poly_spectral_radius(cfg: &ReservoirConfig, phi: f64) -> Result<f64> {
    if phi == 0.0 {
        return Err(Error::Degenerate(format!(
            "Φ = 0: A is nilpotent apart from its last column, ρ = e^(-Nξ) = {}",
            (-(cfg.n as f64) * cfg.xi()).exp()
        )));
    }
    let roots = monic_roots(&char_poly_coeffs(cfg, phi));
    Ok(roots.iter().map(|z| (z * phi).norm()).fold(0.0, f64::max))
}

/// ε(z) = (1 - e^{-ξ}) q_R(z).
pub fn noise_vector(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    x0: f64,
    mask: &InputMask,
    order: usize,
    z: f64,
) -> Result<Vector> {
    check_equilibrium(kernel, x0)?;
    let q = QPolynomial::new(cfg, kernel, x0, mask, order)?;
    Ok(q.eval(z) * cfg.gain())
}

/// Mean and covariance of ε(t) given raw input moments.
pub fn noise_moments_from(q: &QPolynomial, gain: f64, moments: &[f64]) -> Result<(Vector, Matrix)> {
    let r = q.order();
    check_moments(moments, 2 * r)?;
    let m1: Vec<f64> = (1..=r).map(|k| raw_moment(moments, k)).collect();
    let mut cm = Matrix::zeros(r, r);
    for k in 0..r {
        for l in 0..r {
            cm[(k, l)] = raw_moment(moments, k + l + 2) - m1[k] * m1[l];
        }
    }
    let mu = q.expect(moments, 0)? * gain;
    let sigma = q.coeffs.transpose() * cm * &q.coeffs * (gain * gain);
    Ok((mu, linalg::symmetrize(&sigma)))
}

pub fn noise_moments(
    cfg: &ReservoirConfig,
    kernel: &Kernel,
    x0: f64,
    mask: &InputMask,
    order: usize,
    moments: &[f64],
) -> Result<(Vector, Matrix)> {
    check_equilibrium(kernel, x0)?;
    let q = QPolynomial::new(cfg, kernel, x0, mask, order)?;
    noise_moments_from(&q, cfg.gain(), moments)
}

/// μ_x = (I - A)^{-1}(F(x0·1, 0) - A x0·1 + μ_ε).
pub fn stationary_mean(a: &Matrix, f_fixed: &Vector, x0: f64, mu_eps: &Vector) -> Result<Vector> {
    let n = a.nrows();
    let m = Matrix::identity(n, n) - a;
    let cond = condition_number(&m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular(format!("I - A has condition number {cond:e}")));
    }
    let x0v = Vector::from_element(n, x0);
    let rhs = f_fixed - a * &x0v + mu_eps;
    m.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("I - A".into()))
}

/// Γ(0) from Γ0 = A Γ0 Aᵀ + Σ_ε.
pub fn yule_walker_gamma0(a: &Matrix, sigma_eps: &Matrix, method: LyapunovMethod) -> Result<Matrix> {
    let rho = spectral_radius(a);
    if !(rho < 1.0) {
        return Err(Error::Unstable(rho));
    }
    discrete_lyapunov(a, sigma_eps, method)
}

/// Γ(k) = A^k Γ(0), Γ(-k) = Γ(k)ᵀ.
pub fn autocovariance(a: &Matrix, gamma0: &Matrix, lag: i64) -> Matrix {
    let mut g = gamma0.clone();
    for _ in 0..lag.unsigned_abs() {
        g = a * g;
    }
    if lag < 0 {
        g.transpose()
    } else {
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarApprox {
    pub x0: f64,
    pub taylor_order: usize,
    pub stable: bool,
    pub spectral_radius: f64,
    #[serde(rename = "A", with = "serde_rows")]
    pub a: Matrix,
    #[serde(with = "serde_vec")]
    pub mu_eps: Vector,
    #[serde(with = "serde_rows")]
    pub sigma_eps: Matrix,
    #[serde(with = "serde_vec")]
    pub mu_x: Vector,
    #[serde(with = "serde_rows")]
    pub gamma0: Matrix,
    pub q: QPolynomial,
}

impl VarApprox {
    pub fn build(
        cfg: &ReservoirConfig,
        kernel: &Kernel,
        x0: f64,
        mask: &InputMask,
        order: usize,
        moments: &[f64],
    ) -> Result<Self> {
        Self::build_with(cfg, kernel, x0, mask, order, moments, LyapunovMethod::Auto)
    }

    pub fn build_with(
        cfg: &ReservoirConfig,
        kernel: &Kernel,
        x0: f64,
        mask: &InputMask,
        order: usize,
        moments: &[f64],
        method: LyapunovMethod,
    ) -> Result<Self> {
        cfg.validate()?;
        let a = connectivity(cfg, kernel, x0)?;
        let rho = spectral_radius(&a);
        if !(rho < 1.0) {
            return Err(Error::Unstable(rho));
        }
        let q = QPolynomial::new(cfg, kernel, x0, mask, order)?;
        let (mu_eps, sigma_eps) = noise_moments_from(&q, cfg.gain(), moments)?;
        let n = cfg.n;
        let mut f_fixed = vec![0.0; n];
        step_into(cfg, kernel, &vec![x0; n], &vec![0.0; n], &mut f_fixed)?;
        let mu_x = stationary_mean(&a, &Vector::from_vec(f_fixed), x0, &mu_eps)?;
        let gamma0 = discrete_lyapunov(&a, &sigma_eps, method)?;
        Ok(Self {
            x0,
            taylor_order: order,
            stable: true,
            spectral_radius: rho,
            a,
            mu_eps,
            sigma_eps,
            mu_x,
            gamma0,
            q,
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn autocovariance(&self, lag: i64) -> Matrix {
        autocovariance(&self.a, &self.gamma0, lag)
    }

    /// max |Γ0 - A Γ0 Aᵀ - Σ_ε|.
    pub fn lyapunov_residual(&self) -> f64 {
        let r = &self.gamma0 - &self.a * &self.gamma0 * self.a.transpose() - &self.sigma_eps;
        linalg::max_abs(&r)
    }
}
