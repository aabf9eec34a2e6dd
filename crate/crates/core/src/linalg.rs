//! Small dense linear algebra in `f64` for the invertible 1x1 convolution.

use crate::error::{Error, Result};
use crate::rng::GaussianStream;

/// Matrices whose determinant magnitude falls at or below this are rejected.
pub const MIN_ABS_DET: f64 = 1e-12;

/// LU factorization with partial pivoting of a row-major `n x n` matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(n: usize, a: &[f64]) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Shape(format!("{} values do not form a {n}x{n} matrix", a.len())));
        }
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| lu[i * n + col].abs().total_cmp(&lu[j * n + col].abs()))
                .unwrap_or(col);
            if lu[pivot * n + col] == 0.0 {
                return Err(Error::Singular(format!("zero pivot in column {col}")));
            }
            if pivot != col {
                for k in 0..n {
                    lu.swap(col * n + k, pivot * n + k);
                }
                perm.swap(col, pivot);
                sign = -sign;
            }
            let p = lu[col * n + col];
            for row in col + 1..n {
                let f = lu[row * n + col] / p;
                lu[row * n + col] = f;
                if f != 0.0 {
                    for k in col + 1..n {
                        lu[row * n + k] -= f * lu[col * n + k];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm, sign })
    }

    /// `(sign, ln|det|)`.
    pub fn log_det(&self) -> (f64, f64) {
        let mut sign = self.sign;
        let mut log = 0.0;
        for i in 0..self.n {
            let d = self.lu[i * self.n + i];
            if d < 0.0 {
                sign = -sign;
            }
            log += d.abs().ln();
        }
        (sign, log)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Row-major inverse.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

/// `ln|det A|` of a row-major `n x n` matrix, rejecting near-singular input.
pub fn log_abs_det(n: usize, a: &[f64]) -> Result<f64> {
    let lu = Lu::factor(n, a)?;
    let (_, log) = lu.log_det();
    if log <= MIN_ABS_DET.ln() {
        return Err(Error::Singular(format!("|det| = {:e} <= {MIN_ABS_DET:e}", log.exp())));
    }
    Ok(log)
}

/// Random orthogonal matrix with determinant +1: Gram-Schmidt on a Gaussian
/// matrix, then the first column is negated if the determinant came out -1.
pub fn random_rotation(n: usize, stream: &GaussianStream) -> Vec<f64> {
    let g: Vec<f64> = (0..n * n).map(|i| stream.normal(i as u64)).collect();
    // Orthonormalize columns with modified Gram-Schmidt (two passes for
    // numerical orthogonality at n = 256).
    let mut q = g;
    for j in 0..n {
        for _ in 0..2 {
            for k in 0..j {
                let dot: f64 = (0..n).map(|i| q[i * n + j] * q[i * n + k]).sum();
                for i in 0..n {
                    q[i * n + j] -= dot * q[i * n + k];
                }
            }
        }
        let norm = (0..n).map(|i| q[i * n + j].powi(2)).sum::<f64>().sqrt();
        for i in 0..n {
            q[i * n + j] /= norm;
        }
    }
    let (sign, _) = Lu::factor(n, &q).expect("orthogonal matrix is invertible").log_det();
    if sign < 0.0 {
        for i in 0..n {
            q[i * n] = -q[i * n];
        }
    }
    q
}
