//! Truncated power series ("jets") in one variable.
//!
//! A jet of order `n` stores the Taylor coefficients `a_0, ..., a_n` of a
//! function around an expansion point, so `a_k = f^(k)(t0) / k!`. Arithmetic
//! on jets propagates all coefficients exactly up to the truncation order,
//! which gives high-order derivatives of kernel compositions without finite
//! differences.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { coeffs }
    }

    /// The affine jet `value + slope * t`.
    pub fn affine(value: f64, slope: f64, order: usize) -> Self {
        let mut jet = Self::constant(value, order);
        if order >= 1 {
            jet.coeffs[1] = slope;
        }
        jet
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `k`-th derivative at the expansion point, `k! * a_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        let factorial: f64 = (1..=k).map(|j| j as f64).product();
        self.coeffs[k] * factorial
    }

    /// All derivatives `1..=order`.
    pub fn derivatives(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.order());
        let mut factorial = 1.0;
        for k in 1..=self.order() {
            factorial *= k as f64;
            out.push(self.coeffs[k] * factorial);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_scalar(&self, value: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    pub fn recip(&self) -> Self {
        Jet::constant(1.0, self.order()).div(self)
    }

    /// Quotient by the standard recurrence; requires `rhs.value() != 0`.
    pub fn div(&self, rhs: &Jet) -> Self {
        let n = self.order().min(rhs.order());
        let b0 = rhs.coeffs[0];
        let mut q = vec![0.0; n + 1];
        for k in 0..=n {
            let mut acc = self.coeffs[k];
            for j in 1..=k {
                acc -= rhs.coeffs[j] * q[k - j];
            }
            q[k] = acc / b0;
        }
        Self { coeffs: q }
    }

    pub fn powi(&self, exponent: i32) -> Self {
        if exponent < 0 {
            return self.powi(-exponent).recip();
        }
        let mut result = Jet::constant(1.0, self.order());
        let mut base = self.clone();
        let mut e = exponent as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Real power for a strictly positive expansion value.
    pub fn powf(&self, exponent: f64) -> Self {
        let n = self.order();
        let a = &self.coeffs;
        let mut w = vec![0.0; n + 1];
        w[0] = a[0].powf(exponent);
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((exponent + 1.0) * j as f64 - k as f64) * a[j] * w[k - j];
            }
            w[k] = acc / (k as f64 * a[0]);
        }
        Self { coeffs: w }
    }

    pub fn exp(&self) -> Self {
        let n = self.order();
        let a = &self.coeffs;
        let mut e = vec![0.0; n + 1];
        e[0] = a[0].exp();
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Self { coeffs: e }
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.order();
        let a = &self.coeffs;
        let mut s = vec![0.0; n + 1];
        let mut c = vec![0.0; n + 1];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..=n {
            let mut acc_s = 0.0;
            let mut acc_c = 0.0;
            for j in 1..=k {
                let w = j as f64 * a[j];
                acc_s += w * c[k - j];
                acc_c -= w * s[k - j];
            }
            s[k] = acc_s / k as f64;
            c[k] = acc_c / k as f64;
        }
        (Self { coeffs: s }, Self { coeffs: c })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    /// Evaluate the truncated series at offset `t` (Horner).
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

impl Add for &Jet {
    type Output = Jet;

    fn add(self, rhs: &Jet) -> Jet {
        let n = self.order().min(rhs.order());
        Jet {
            coeffs: (0..=n).map(|k| self.coeffs[k] + rhs.coeffs[k]).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;

    fn sub(self, rhs: &Jet) -> Jet {
        let n = self.order().min(rhs.order());
        Jet {
            coeffs: (0..=n).map(|k| self.coeffs[k] - rhs.coeffs[k]).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;

    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.order().min(rhs.order());
        let mut out = vec![0.0; n + 1];
        for (i, a) in self.coeffs.iter().take(n + 1).enumerate() {
            for (j, b) in rhs.coeffs.iter().take(n + 1 - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        Jet { coeffs: out }
    }
}

impl Neg for &Jet {
    type Output = Jet;

    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
