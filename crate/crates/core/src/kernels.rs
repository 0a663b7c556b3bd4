//! Nonlinear feedback kernels f(x, I, θ), their derivatives, equilibria and
//! stability certificates.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::jet::Jet;

/// Grid density used by [`Kernel::find_equilibria`].
pub const GRID_POINTS_PER_UNIT: f64 = 10_000.0;
/// Bisection stops once the bracket is narrower than this.
pub const ROOT_TOLERANCE: f64 = 1e-10;
/// Largest |f(x0) - x0| accepted for an equilibrium.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Width of the band around |f'| = 1 treated as marginal.
pub const MARGINAL_TOLERANCE: f64 = 1e-12;

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// η u / (1 + u^p) with u = x + γ I.
    MackeyGlass {
        eta: f64,
        gamma: f64,
        #[serde(default = "default_p")]
        p: f64,
    },
    /// η sin²(u + φ) with u = x + γ I.
    Ikeda { eta: f64, gamma: f64, phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    CertifiedAsymptoticallyStable,
    CertifiedStable,
    NotCertified,
}

impl Certificate {
    pub fn from_derivative(derivative: f64) -> Self {
        let a = derivative.abs();
        if (a - 1.0).abs() <= MARGINAL_TOLERANCE {
            Certificate::CertifiedStable
        } else if a < 1.0 {
            Certificate::CertifiedAsymptoticallyStable
        } else {
            Certificate::NotCertified
        }
    }

    pub fn is_certified(self) -> bool {
        self != Certificate::NotCertified
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub x0: f64,
    pub derivative: f64,
    pub certificate: Certificate,
}

impl Kernel {
    pub fn mackey_glass(eta: f64, gamma: f64, p: f64) -> Self {
        Kernel::MackeyGlass { eta, gamma, p }
    }

    pub fn ikeda(eta: f64, gamma: f64, phi: f64) -> Self {
        Kernel::Ikeda { eta, gamma, phi }
    }

    pub fn eta(&self) -> f64 {
        match *self {
            Kernel::MackeyGlass { eta, .. } | Kernel::Ikeda { eta, .. } => eta,
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            Kernel::MackeyGlass { gamma, .. } | Kernel::Ikeda { gamma, .. } => gamma,
        }
    }

    pub fn with_eta(mut self, value: f64) -> Self {
        match &mut self {
            Kernel::MackeyGlass { eta, .. } | Kernel::Ikeda { eta, .. } => *eta = value,
        }
        self
    }

    pub fn with_gamma(mut self, value: f64) -> Self {
        match &mut self {
            Kernel::MackeyGlass { gamma, .. } | Kernel::Ikeda { gamma, .. } => *gamma = value,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let params: &[f64] = match self {
            Kernel::MackeyGlass { eta, gamma, p } => {
                if !(*p > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "Mackey-Glass exponent must be positive, got {p}"
                    )));
                }
                &[*eta, *gamma, *p]
            }
            Kernel::Ikeda { eta, gamma, phi } => &[*eta, *gamma, *phi],
        };
        if params.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("non-finite kernel parameter in {self:?}")))
        }
    }

    fn integer_exponent(p: f64) -> Option<i32> {
        (p.fract() == 0.0 && p.abs() <= i32::MAX as f64).then_some(p as i32)
    }

    fn mg_power(u: f64, p: f64) -> Result<f64> {
        match Self::integer_exponent(p) {
            Some(n) => Ok(u.powi(n)),
            None if u >= 0.0 => Ok(u.powf(p)),
            None => Err(Error::Domain(format!(
                "negative base {u} with non-integer exponent {p}"
            ))),
        }
    }

    /// f(x, I, θ).
    pub fn eval(&self, x: f64, input: f64) -> Result<f64> {
        let value = match *self {
            Kernel::MackeyGlass { eta, gamma, p } => {
                let u = x + gamma * input;
                eta * u / (1.0 + Self::mg_power(u, p)?)
            }
            Kernel::Ikeda { eta, gamma, phi } => {
                let s = (x + gamma * input + phi).sin();
                eta * s * s
            }
        };
        ensure_finite(value, "kernel value")
    }

    /// ∂f/∂x at (x, I).
    pub fn dx(&self, x: f64, input: f64) -> Result<f64> {
        let value = match *self {
            Kernel::MackeyGlass { eta, gamma, p } => {
                let u = x + gamma * input;
                let up = Self::mg_power(u, p)?;
                let denom = 1.0 + up;
                eta * (1.0 + (1.0 - p) * up) / (denom * denom)
            }
            Kernel::Ikeda { eta, gamma, phi } => eta * (2.0 * (x + gamma * input + phi)).sin(),
        };
        ensure_finite(value, "kernel derivative")
    }

    /// Propagates a jet for the composite argument u = x + γI through the
    /// kernel.
    pub fn eval_jet(&self, u: &Jet) -> Result<Jet> {
        let out = match *self {
            Kernel::MackeyGlass { eta, p, .. } => {
                let up = match Self::integer_exponent(p) {
                    Some(n) => u.powi(n),
                    None if u.value() > 0.0 => u.powf(p),
                    None => {
                        return Err(Error::Domain(format!(
                            "jet of u^{p} needs a positive base, got {}",
                            u.value()
                        )))
                    }
                };
                u.div(&up.add_scalar(1.0)).scale(eta)
            }
            Kernel::Ikeda { eta, phi, .. } => {
                let s = u.add_scalar(phi).sin();
                (&s * &s).scale(eta)
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::NonFinite("kernel jet".into()))
        }
    }

    /// Taylor coefficients of I ↦ f(x0, I) at I = 0, i.e. ∂_I^i f / i! for
    /// i = 1..=order.
    pub fn input_taylor(&self, x0: f64, order: usize) -> Result<Vec<f64>> {
        let u = Jet::affine(x0, self.gamma(), order);
        Ok(self.eval_jet(&u)?.coeffs()[1..].to_vec())
    }

    /// ∂_I^i f(x0, 0) for i = 1..=order.
    pub fn input_derivatives(&self, x0: f64, order: usize) -> Result<Vec<f64>> {
        if order == 0 {
            return Err(Error::InvalidConfig("derivative order must be >= 1".into()));
        }
        let u = Jet::affine(x0, self.gamma(), order);
        Ok(self.eval_jet(&u)?.derivatives())
    }

    /// An interval that contains every equilibrium of the kernel.
    pub fn equilibrium_search_interval(&self) -> (f64, f64) {
        let r = self.eta().abs() + 0.1;
        (-r, r)
    }

    /// All roots of f(x, 0) = x in `[lo, hi]`, ascending.
    pub fn find_equilibria(&self, lo: f64, hi: f64) -> Vec<Equilibrium> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Vec::new();
        }
        let g = |x: f64| self.eval(x, 0.0).map(|f| f - x).ok();
        let steps = (((hi - lo) * GRID_POINTS_PER_UNIT).ceil() as usize).max(1);
        let h = (hi - lo) / steps as f64;
        let mut roots = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=steps {
            let x = if k == steps { hi } else { lo + k as f64 * h };
            let Some(gx) = g(x) else {
                prev = None;
                continue;
            };
            if gx == 0.0 {
                roots.push(x);
                prev = None;
                continue;
            }
            if let Some((xp, gp)) = prev {
                if gp.signum() != gx.signum() {
                    if let Some(r) = bisect(&g, xp, gp, x) {
                        roots.push(r);
                    }
                }
            }
            prev = Some((x, gx));
        }
        roots
            .into_iter()
            .filter_map(|x0| self.certify_stability(x0).ok())
            .collect()
    }

    /// Annotates an equilibrium with its derivative and certificate.
    pub fn certify_stability(&self, x0: f64) -> Result<Equilibrium> {
        let residual = (self.eval(x0, 0.0)? - x0).abs();
        if !(residual <= RESIDUAL_TOLERANCE) {
            return Err(Error::NotAnEquilibrium { x0, residual });
        }
        let derivative = self.dx(x0, 0.0)?;
        Ok(Equilibrium {
            x0,
            derivative,
            certificate: Certificate::from_derivative(derivative),
        })
    }
}

fn bisect(g: &impl Fn(f64) -> Option<f64>, mut lo: f64, g_lo: f64, mut hi: f64) -> Option<f64> {
    let s_lo = g_lo.signum();
    for _ in 0..200 {
        if hi - lo <= ROOT_TOLERANCE * 1e-3 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let r = g(mid)?;
    (r.abs() <= RESIDUAL_TOLERANCE).then_some(mid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd(k: &Kernel, x: f64) -> f64 {
        let h = 1e-5;
        (k.eval(x + h, 0.0).unwrap() - k.eval(x - h, 0.0).unwrap()) / (2.0 * h)
    }

    #[test]
    fn mackey_glass_fixed_point_at_one() {
        let k = Kernel::mackey_glass(2.0, 1.0, 2.0);
        assert_eq!(k.eval(1.0, 0.0).unwrap(), 1.0);
        assert!(k.dx(1.0, 0.0).unwrap().abs() < 1e-12);
        assert!((fd(&k, 1.0)).abs() < 1e-8);
    }

    #[test]
    fn zero_gain_kernel_vanishes() {
        let k = Kernel::mackey_glass(0.0, 0.7, 2.0);
        for (x, i) in [(0.3, 0.1), (-2.0, 5.0), (10.0, -1.0)] {
            assert_eq!(k.eval(x, i).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_at_origin_is_gain() {
        let k = Kernel::mackey_glass(0.9, 1.0, 2.0);
        assert_relative_eq!(k.dx(0.0, 0.0).unwrap(), 0.9);
        let d = k.input_derivatives(0.0, 1).unwrap();
        assert_relative_eq!(d[0], 0.9);
    }

    #[test]
    fn ikeda_derivative_formula() {
        let k = Kernel::ikeda(1.3, 0.5, 0.2);
        let x = 0.37;
        assert_relative_eq!(k.dx(x, 0.0).unwrap(), 1.3 * (2.0 * (x + 0.2_f64)).sin());
        assert_relative_eq!(k.dx(x, 0.0).unwrap(), fd(&k, x), max_relative = 1e-6);
    }

    #[test]
    fn ikeda_point_a_is_near_fixed() {
        let k = Kernel::ikeda(2.0, 1.0, -0.3);
        assert!((k.eval(0.088, 0.0).unwrap() - 0.088).abs() < 1e-3);
    }

    #[test]
    fn non_integer_exponent_rejects_negative_base() {
        let k = Kernel::mackey_glass(1.0, 1.0, 2.5);
        assert!(matches!(k.eval(-0.5, 0.0), Err(Error::Domain(_))));
        assert!(k.eval(0.5, 0.0).is_ok());
        let j = Jet::affine(-0.5, 1.0, 3);
        assert!(matches!(k.eval_jet(&j), Err(Error::Domain(_))));
    }

    #[test]
    fn non_integer_exponent_jet_matches_differences() {
        let k = Kernel::mackey_glass(1.7, 0.8, 2.5);
        let x0 = 0.6;
        let d = k.input_derivatives(x0, 2).unwrap();
        let h = 1e-4;
        let f = |i: f64| k.eval(x0, i).unwrap();
        let d1 = (f(h) - f(-h)) / (2.0 * h);
        let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert_relative_eq!(d[0], d1, max_relative = 1e-7);
        assert_relative_eq!(d[1], d2, max_relative = 1e-4);
    }

    #[test]
    fn ikeda_section_results_equilibria() {
        let k = Kernel::ikeda(1.2443, 1.4762, 0.1161);
        let eq = k.find_equilibria(-1.0, 3.0);
        let xs: Vec<f64> = eq.iter().map(|e| e.x0).collect();
        assert_eq!(xs.len(), 3, "{xs:?}");
        for (x, want) in xs.iter().zip([0.0244, 0.9075, 1.063]) {
            assert!((x - want).abs() < 1e-3, "{x} vs {want}");
        }
        assert!(eq[0].certificate.is_certified());
        assert!(!eq[1].certificate.is_certified());
        assert!(eq[2].certificate.is_certified());
    }

    #[test]
    fn ikeda_three_equilibria() {
        let k = Kernel::ikeda(2.0, 1.0, -0.3);
        let xs: Vec<f64> = k.find_equilibria(-1.0, 3.0).iter().map(|e| e.x0).collect();
        assert_eq!(xs.len(), 3, "{xs:?}");
        for (x, want) in xs.iter().zip([0.088, 1.172, 1.977]) {
            assert!((x - want).abs() < 1e-3, "{x} vs {want}");
        }
    }

    #[test]
    fn mackey_glass_three_equilibria() {
        let k = Kernel::mackey_glass(1.3541, 1.0, 2.0);
        let xs: Vec<f64> = k.find_equilibria(-2.0, 2.0).iter().map(|e| e.x0).collect();
        assert_eq!(xs.len(), 3);
        assert!((xs[0] + 0.5951).abs() < 1e-4);
        assert!(xs[1].abs() < 1e-9);
        assert!((xs[2] - 0.5951).abs() < 1e-4);
    }

    #[test]
    fn certificates() {
        let mg = Kernel::mackey_glass(0.9, 1.0, 2.0);
        assert_eq!(
            mg.certify_stability(0.0).unwrap().certificate,
            Certificate::CertifiedAsymptoticallyStable
        );
        let mg = Kernel::mackey_glass(1.5, 1.0, 2.0);
        assert_eq!(mg.certify_stability(0.0).unwrap().certificate, Certificate::NotCertified);
        let mg = Kernel::mackey_glass(1.0, 1.0, 2.0);
        assert_eq!(mg.certify_stability(0.0).unwrap().certificate, Certificate::CertifiedStable);
        assert!(matches!(
            mg.certify_stability(0.5),
            Err(Error::NotAnEquilibrium { .. })
        ));
    }

    #[test]
    fn weak_ikeda_has_one_certified_nontrivial_point() {
        let k = Kernel::ikeda(0.8, 1.0, 0.5);
        let eq = k.find_equilibria(0.0, 0.8);
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].certificate, Certificate::CertifiedAsymptoticallyStable);
    }

    #[test]
    fn config_fragment_round_trip() {
        let k: Kernel =
            serde_json::from_str(r#"{"type":"mackey_glass","eta":1.0781,"gamma":0.796}"#).unwrap();
        assert_eq!(k, Kernel::mackey_glass(1.0781, 0.796, 2.0));
        let k: Kernel =
            serde_json::from_str(r#"{"type":"ikeda","eta":2,"gamma":1,"phi":-0.3}"#).unwrap();
        assert_eq!(k, Kernel::ikeda(2.0, 1.0, -0.3));
        assert!(serde_json::from_str::<Kernel>(r#"{"type":"ikeda","eta":2,"gamma":1}"#).is_err());
        assert!(serde_json::from_str::<Kernel>(
            r#"{"type":"ikeda","eta":2,"gamma":1,"phi":0,"p":3}"#
        )
        .is_err());
    }
}
