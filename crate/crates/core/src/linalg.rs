//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Maximum absolute row sum, the matrix norm induced by the sup-norm.
pub fn inf_norm(a: &Matrix) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn spectral_radius(a: &Matrix) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].abs();
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &Matrix) -> f64 {
    symmetrize(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Which discrete Lyapunov solver to use for `G = A G A^T + S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LyapunovMethod {
    /// Vectorized Kronecker system for small N, doubling above that.
    #[default]
    Auto,
    Kronecker,
    Doubling,
}

pub const KRONECKER_MAX_N: usize = 40;

/// Solves `G = A G A^T + S` for a stable `A`; the result is symmetrized.
pub fn discrete_lyapunov(a: &Matrix, s: &Matrix, method: LyapunovMethod) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n || s.nrows() != n || s.ncols() != n {
        return Err(Error::Dimension(format!(
            "lyapunov: A is {}x{}, S is {}x{}",
            a.nrows(),
            a.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    let use_kron = match method {
        LyapunovMethod::Kronecker => true,
        LyapunovMethod::Doubling => false,
        LyapunovMethod::Auto => n <= KRONECKER_MAX_N,
    };
    let g = if use_kron {
        lyapunov_kronecker(a, s)?
    } else {
        lyapunov_doubling(a, s)?
    };
    Ok(symmetrize(&g))
}

fn lyapunov_kronecker(a: &Matrix, s: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let m = Matrix::identity(n * n, n * n) - a.kronecker(a);
    // nalgebra matrices are column-major, so this is vec(S).
    let rhs = Vector::from_column_slice(s.as_slice());
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("I - A (x) A".into()))?;
    Ok(Matrix::from_column_slice(n, n, x.as_slice()))
}

/// Squaring iteration: G_{k+1} = G_k + A_k G_k A_k^T, A_{k+1} = A_k^2.
fn lyapunov_doubling(a: &Matrix, s: &Matrix) -> Result<Matrix> {
    let mut ak = a.clone();
    let mut g = s.clone();
    for _ in 0..64 {
        let update = &ak * &g * ak.transpose();
        g += &update;
        ak = &ak * &ak;
        let scale = max_abs(&g).max(f64::MIN_POSITIVE);
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("lyapunov doubling diverged".into()));
        }
        if max_abs(&update) <= 1e-17 * scale && max_abs(&ak) < 1e-8 {
            return Ok(g);
        }
    }
    Err(Error::Unstable(spectral_radius(a)))
}

/// Solves `M x = b` for symmetric positive definite `M`, falling back to LU.
pub fn spd_solve(m: &Matrix, b: &Vector) -> Result<Vector> {
    if let Some(chol) = m.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    m.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("symmetric system".into()))
}

/// 2-norm condition number from singular values.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Serde adapters that write matrices as nested row-major arrays.
pub mod serde_rows {
    use super::Matrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(Matrix::from_row_iterator(
            nrows,
            ncols,
            rows.into_iter().flatten(),
        ))
    }
}

pub mod serde_vec {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_stable() -> Matrix {
        Matrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, -0.2, 0.3, 0.4, 0.1, 0.0, 0.6])
    }

    #[test]
    fn scalar_lyapunov() {
        let a = Matrix::from_element(1, 1, 0.5);
        let s = Matrix::from_element(1, 1, 1.0);
        for method in [LyapunovMethod::Kronecker, LyapunovMethod::Doubling] {
            let g = discrete_lyapunov(&a, &s, method).unwrap();
            assert_relative_eq!(g[(0, 0)], 4.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn solvers_agree() {
        let a = sample_stable();
        let b = Matrix::from_row_slice(3, 2, &[1.0, 0.2, -0.5, 0.3, 0.1, 1.1]);
        let s = &b * b.transpose();
        let g1 = discrete_lyapunov(&a, &s, LyapunovMethod::Kronecker).unwrap();
        let g2 = discrete_lyapunov(&a, &s, LyapunovMethod::Doubling).unwrap();
        assert!(max_abs(&(&g1 - &g2)) < 1e-12);
        let resid = &g1 - &a * &g1 * a.transpose() - &s;
        assert!(max_abs(&resid) < 1e-13);
    }

    #[test]
    fn row_major_round_trip() {
        #[derive(serde::Serialize, serde::Deserialize)]
        struct W {
            #[serde(with = "serde_rows")]
            m: Matrix,
        }
        let w = W {
            m: Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        };
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"{"m":[[1.0,2.0,3.0],[4.0,5.0,6.0]]}"#);
        let back: W = serde_json::from_str(&json).unwrap();
        assert_eq!(back.m, w.m);
    }

    #[test]
    fn inf_norm_bounds_radius() {
        let a = sample_stable();
        assert!(spectral_radius(&a) <= inf_norm(&a) + 1e-15);
        assert_relative_eq!(inf_norm(&a), 0.9, epsilon = 1e-15);
    }
}
