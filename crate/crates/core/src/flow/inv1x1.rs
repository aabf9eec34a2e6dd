use crate::error::{shape_err, Result};
use crate::linalg::{self, Lu};
use crate::tensor::{macs, FeatureMap};

/// Invertible channel-mixing matrix applied independently at every time step.
/// The inverse and `ln|det|` are computed once at construction.
#[derive(Clone, Debug)]
pub struct InvertiblePointwise {
    size: usize,
    weight: Vec<f32>,
    weight64: Vec<f64>,
    inverse: Vec<f64>,
    log_abs_det: f64,
}

impl PartialEq for InvertiblePointwise {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size && self.weight == other.weight
    }
}

impl InvertiblePointwise {
    /// `weight` is row-major `size x size`. Fails if `|det| <= 1e-12`.
    pub fn new(size: usize, weight: Vec<f32>) -> Result<Self> {
        if size == 0 || weight.len() != size * size {
            return Err(shape_err!(
                "1x1 weight with {} values is not a non-empty {size}x{size} matrix",
                weight.len()
            ));
        }
        let weight64: Vec<f64> = weight.iter().map(|&v| v as f64).collect();
        let log_abs_det = linalg::log_abs_det(size, &weight64)?;
        let inverse = Lu::factor(size, &weight64)?.inverse();
        Ok(Self {
            size,
            weight,
            weight64,
            inverse,
            log_abs_det,
        })
    }

    pub fn identity(size: usize) -> Self {
        let mut w = vec![0.0; size * size];
        for i in 0..size {
            w[i * size + i] = 1.0;
        }
        Self::new(size, w).expect("identity is invertible")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weight(&self) -> &[f32] {
        &self.weight
    }

    /// `ln|det W|` for a single time step.
    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    fn apply(&self, matrix: &[f64], x: &FeatureMap) -> Result<FeatureMap> {
        if x.channels() != self.size {
            return Err(shape_err!(
                "1x1 convolution of size {} applied to {} channels",
                self.size,
                x.channels()
            ));
        }
        let (n, l) = (self.size, x.length());
        let xs: Vec<f64> = x.data().iter().map(|&v| v as f64).collect();
        let mut out = vec![0.0f64; n * l];
        crate::tensor::matmul_f64(n, n, l, matrix, &xs, &mut out);
        macs::record((n * n * l) as u64);
        FeatureMap::from_vec(n, l, out.into_iter().map(|v| v as f32).collect())
    }
}

/// `y(:, t) = W x(:, t)`; the log-determinant is `L * ln|det W|`.
pub fn inv1x1_forward(x: &FeatureMap, w: &InvertiblePointwise) -> Result<(FeatureMap, f64)> {
    let y = w.apply(&w.weight64, x)?;
    Ok((y, x.length() as f64 * w.log_abs_det))
}

/// `x(:, t) = W^-1 y(:, t)`.
pub fn inv1x1_inverse(y: &FeatureMap, w: &InvertiblePointwise) -> Result<FeatureMap> {
    w.apply(&w.inverse, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::rng::GaussianStream;

    #[test]
    fn identity_is_a_no_op() {
        let x = FeatureMap::from_fn(3, 4, |c, t| c as f32 - t as f32 * 0.5);
        let id = InvertiblePointwise::identity(3);
        let (y, ld) = inv1x1_forward(&x, &id).unwrap();
        assert_eq!(y, x);
        assert_eq!(ld, 0.0);
        assert_eq!(inv1x1_inverse(&x, &id).unwrap(), x);
    }

    #[test]
    fn scaled_identity() {
        let w = InvertiblePointwise::new(2, vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        let x = FeatureMap::from_fn(2, 3, |c, t| (c + t) as f32);
        let (y, ld) = inv1x1_forward(&x, &w).unwrap();
        assert!(y.data().iter().zip(x.data()).all(|(a, b)| *a == 2.0 * b));
        assert!((ld - 3.0 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn diagonal_inverse() {
        let w = InvertiblePointwise::new(2, vec![2.0, 0.0, 0.0, 4.0]).unwrap();
        let y = FeatureMap::from_vec(2, 1, vec![2.0, 4.0]).unwrap();
        assert_eq!(inv1x1_inverse(&y, &w).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn roundtrip_random_well_conditioned() {
        let g = GaussianStream::new(5);
        // identity plus a small perturbation keeps the condition number modest
        let weight: Vec<f32> = (0..64)
            .map(|i| (if i % 9 == 0 { 1.0 } else { 0.0 }) + 0.3 * g.normal(i) as f32)
            .collect();
        let w = InvertiblePointwise::new(8, weight).unwrap();
        let x = FeatureMap::from_vec(8, 16, g.substream(1).vec(0, 128, 1.0)).unwrap();
        let (y, _) = inv1x1_forward(&x, &w).unwrap();
        let back = inv1x1_inverse(&y, &w).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-4);
    }

    #[test]
    fn singular_and_misshaped() {
        assert!(matches!(
            InvertiblePointwise::new(2, vec![1.0, 1.0, 1.0, 1.0]),
            Err(Error::Singular(_))
        ));
        assert!(InvertiblePointwise::new(2, vec![1.0; 3]).is_err());
        let w = InvertiblePointwise::identity(2);
        assert!(inv1x1_forward(&FeatureMap::zeros(3, 2), &w).is_err());
    }

    #[test]
    fn orthogonal_matrix_has_zero_log_det() {
        // Q from nalgebra's Householder QR of a Gaussian matrix is orthogonal.
        let g = GaussianStream::new(12);
        let a = nalgebra::DMatrix::from_fn(6, 6, |i, j| g.normal((i * 6 + j) as u64));
        let q = a.qr().q();
        let weight: Vec<f32> = (0..36).map(|k| q[(k / 6, k % 6)] as f32).collect();
        let w = InvertiblePointwise::new(6, weight).unwrap();
        assert!(w.log_abs_det().abs() < 1e-6);
        let (_, ld) = inv1x1_forward(&FeatureMap::zeros(6, 10), &w).unwrap();
        assert!(ld.abs() < 1e-5);
    }
}
