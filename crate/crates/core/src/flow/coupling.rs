use super::CouplingCoeffs;
use crate::error::{shape_err, Result};
use crate::tensor::FeatureMap;

fn check(x: &FeatureMap, coeffs: &CouplingCoeffs) -> Result<()> {
    if coeffs.log_s.shape() != x.shape() || coeffs.t.shape() != x.shape() {
        return Err(shape_err!(
            "coupling input {:?} does not match coefficients {:?}/{:?}",
            x.shape(),
            coeffs.log_s.shape(),
            coeffs.t.shape()
        ));
    }
    Ok(())
}

/// `y_b = x_b * exp(log_s) + t`; the log-determinant is `sum(log_s)`.
pub fn coupling_forward(x_b: &FeatureMap, coeffs: &CouplingCoeffs) -> Result<(FeatureMap, f64)> {
    check(x_b, coeffs)?;
    let mut log_det = 0.0f64;
    let data = x_b
        .data()
        .iter()
        .zip(coeffs.log_s.data())
        .zip(coeffs.t.data())
        .map(|((&x, &ls), &t)| {
            log_det += ls as f64;
            x * ls.exp() + t
        })
        .collect();
    Ok((FeatureMap::from_vec(x_b.channels(), x_b.length(), data)?, log_det))
}

/// `x_b = (y_b - t) / exp(log_s)`.
pub fn coupling_inverse(y_b: &FeatureMap, coeffs: &CouplingCoeffs) -> Result<FeatureMap> {
    check(y_b, coeffs)?;
    let data = y_b
        .data()
        .iter()
        .zip(coeffs.log_s.data())
        .zip(coeffs.t.data())
        .map(|((&y, &ls), &t)| (y - t) * (-ls).exp())
        .collect();
    FeatureMap::from_vec(y_b.channels(), y_b.length(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GaussianStream;

    fn coeffs(log_s: f32, t: f32, c: usize, l: usize) -> CouplingCoeffs {
        CouplingCoeffs {
            log_s: FeatureMap::from_fn(c, l, |_, _| log_s),
            t: FeatureMap::from_fn(c, l, |_, _| t),
        }
    }

    #[test]
    fn identity_coefficients() {
        let x = FeatureMap::from_fn(2, 3, |c, t| c as f32 * 3.0 - t as f32);
        let (y, ld) = coupling_forward(&x, &coeffs(0.0, 0.0, 2, 3)).unwrap();
        assert_eq!(y, x);
        assert_eq!(ld, 0.0);
        assert_eq!(coupling_inverse(&x, &coeffs(0.0, 0.0, 2, 3)).unwrap(), x);
    }

    #[test]
    fn constant_scale_and_shift() {
        let x = FeatureMap::from_fn(2, 3, |c, t| (c + 2 * t) as f32);
        let (y, ld) = coupling_forward(&x, &coeffs(2f32.ln(), 1.0, 2, 3)).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - (2.0 * b + 1.0)).abs() < 1e-5);
        }
        assert!((ld - 6.0 * 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn scalar_inverse() {
        let y = FeatureMap::from_vec(1, 1, vec![5.0]).unwrap();
        let x = coupling_inverse(&y, &coeffs(2f32.ln(), 1.0, 1, 1)).unwrap();
        assert!((x.data()[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn random_roundtrip() {
        let g = GaussianStream::new(3);
        let x = FeatureMap::from_vec(4, 9, g.vec(0, 36, 1.0)).unwrap();
        let c = CouplingCoeffs {
            log_s: FeatureMap::from_vec(4, 9, g.vec(100, 36, 0.5)).unwrap(),
            t: FeatureMap::from_vec(4, 9, g.vec(200, 36, 1.0)).unwrap(),
        };
        let (y, _) = coupling_forward(&x, &c).unwrap();
        assert!(coupling_inverse(&y, &c).unwrap().max_abs_diff(&x) < 1e-4);
    }

    #[test]
    fn log_det_matches_finite_difference_jacobian() {
        // The map is diagonal, so log|det J| = sum ln|dy_i/dx_i|.
        let g = GaussianStream::new(8);
        let x = FeatureMap::from_vec(2, 3, g.vec(0, 6, 1.0)).unwrap();
        let c = CouplingCoeffs {
            log_s: FeatureMap::from_vec(2, 3, g.vec(10, 6, 0.7)).unwrap(),
            t: FeatureMap::from_vec(2, 3, g.vec(20, 6, 1.0)).unwrap(),
        };
        let (_, ld) = coupling_forward(&x, &c).unwrap();
        let h = 1e-2f32;
        let mut numeric = 0.0f64;
        for i in 0..6 {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus.data_mut()[i] += h;
            minus.data_mut()[i] -= h;
            let yp = coupling_forward(&plus, &c).unwrap().0.data()[i] as f64;
            let ym = coupling_forward(&minus, &c).unwrap().0.data()[i] as f64;
            numeric += ((yp - ym) / (2.0 * h as f64)).abs().ln();
        }
        assert!((ld - numeric).abs() <= 1e-3 * ld.abs().max(1e-3), "{ld} vs {numeric}");
    }

    #[test]
    fn shape_mismatch() {
        assert!(coupling_forward(&FeatureMap::zeros(2, 4), &coeffs(0.0, 0.0, 2, 3)).is_err());
        assert!(coupling_inverse(&FeatureMap::zeros(1, 3), &coeffs(0.0, 0.0, 2, 3)).is_err());
    }
}
