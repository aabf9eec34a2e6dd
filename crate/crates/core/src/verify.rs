//! Invertibility and log-determinant checks shared by the CLI and tests.

use crate::error::{Error, Result};
use crate::flow::WnVariant;
use crate::linalg::Lu;
use crate::rng::GaussianStream;
use crate::tensor::FeatureMap;
use crate::vocoder::{forward, infer_from_latent, sample_latent, Model, ModelConfig};

/// Deterministic stand-in for a log-mel spectrogram: `-5 + 1.5 N(0, 1)`.
pub fn synthetic_mel(n_mels: usize, frames: usize, seed: u64) -> FeatureMap {
    let g = GaussianStream::new(seed).substream(0x6d65_6c);
    let data = g.vec(0, n_mels * frames, 1.5).into_iter().map(|v| v - 5.0).collect();
    FeatureMap::from_vec(n_mels, frames, data).expect("non-empty mel")
}

/// Max-abs errors of the two roundtrip directions over one window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundtripReport {
    /// audio -> latent -> audio
    pub forward_inverse: f32,
    /// latent -> audio -> latent
    pub inverse_forward: f32,
}

fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).fold(0.0f32, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs both roundtrips on one window. The audio is `0.1 N(0, 1)` noise and
/// the latent is drawn with `sigma = 1`.
pub fn roundtrip_check(model: &Model, seed: u64) -> Result<RoundtripReport> {
    let c = model.config();
    let mel = synthetic_mel(c.n_mels, c.frames_for(c.window_samples), seed);
    let audio = GaussianStream::new(seed).substream(1).vec(0, c.window_samples, 0.1);
    let (z, _) = forward(&audio, &mel, model)?;
    let back = infer_from_latent(&z, &mel, model, 1)?;
    let z0 = sample_latent(c, 1, 1.0, seed);
    let synth = infer_from_latent(&z0, &mel, model, 1)?;
    let (z1, _) = forward(&synth, &mel, model)?;
    Ok(RoundtripReport {
        forward_inverse: max_abs_diff(&back, &audio),
        inverse_forward: max_abs_diff(&z1.data, &z0.data),
    })
}

/// `ln|det J|` of `f` at `x` using the fourth-order central difference
/// `(8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h` for each column.
pub fn numerical_log_det(f: impl Fn(&[f32]) -> Result<Vec<f32>>, x: &[f32], h: f32) -> Result<f64> {
    let n = x.len();
    let mut jac = vec![0.0f64; n * n];
    let mut p = x.to_vec();
    let mut eval = |j: usize, step: f32| -> Result<Vec<f32>> {
        p[j] = x[j] + step;
        let y = f(&p);
        p[j] = x[j];
        let y = y?;
        if y.len() != n {
            return Err(Error::Shape(format!("map is not square: {n} -> {}", y.len())));
        }
        Ok(y)
    };
    for j in 0..n {
        let (p1, m1, p2, m2) = (eval(j, h)?, eval(j, -h)?, eval(j, 2.0 * h)?, eval(j, -2.0 * h)?);
        for i in 0..n {
            let d1 = p1[i] as f64 - m1[i] as f64;
            let d2 = p2[i] as f64 - m2[i] as f64;
            jac[i * n + j] = (8.0 * d1 - d2) / (12.0 * h as f64);
        }
    }
    Ok(Lu::factor(n, &jac)?.log_det().1)
}

/// Analytic and finite-difference log-determinants of the whole density pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianReport {
    pub analytic: f64,
    pub numeric: f64,
}

impl JacobianReport {
    pub fn relative_error(&self) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn jacobian_check(model: &Model, audio: &[f32], mel: &FeatureMap) -> Result<JacobianReport> {
    let (_, analytic) = forward(audio, mel, model)?;
    // The pass runs in f32, so rounding noise (~eps / h) dominates for small h.
    let numeric = numerical_log_det(|a| Ok(forward(a, mel, model)?.0.data), audio, 5e-2)?;
    Ok(JacobianReport { analytic, numeric })
}

/// A 16-sample config small enough for a dense Jacobian: 4 channels, 4 steps.
pub fn tiny_config(variant: WnVariant, n_flows: usize, early: bool) -> ModelConfig {
    ModelConfig {
        sample_rate: 22050,
        group_size: 4,
        n_flows,
        n_early_every: if early { 2 } else { 0 },
        n_early_size: if early { 2 } else { 0 },
        wn_layers: 2,
        wn_width: 4,
        wn_kernel: 3,
        variant,
        cond_before_upsample: false,
        n_mels: 2,
        hop: 4,
        window_samples: 16,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocoder::InitOptions;

    #[test]
    fn numerical_log_det_of_linear_map() {
        // f(x) = A x with det A = -5
        let a = [0.0f32, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let f = |x: &[f32]| Ok((0..3).map(|i| (0..3).map(|k| a[i * 3 + k] * x[k]).sum()).collect());
        let ld = numerical_log_det(f, &[0.3, -0.2, 1.0], 1e-2).unwrap();
        assert!((ld - 5f64.ln()).abs() < 1e-5);
    }

    #[test]
    fn tiny_models_pass_the_jacobian_check() {
        for (i, v) in [WnVariant::WaveGlow, WnVariant::SqueezeWave].into_iter().enumerate() {
            let c = tiny_config(v, 3, true);
            let m = Model::random_with(c, i as u64, InitOptions { conv_std: 0.3, end_std: 0.3, mixing_jitter: 0.5 }).unwrap();
            let audio = GaussianStream::new(5).vec(0, 16, 0.5);
            let r = jacobian_check(&m, &audio, &synthetic_mel(2, 4, 1)).unwrap();
            assert!(r.relative_error() < 1e-3, "{v:?}: {r:?}");
        }
    }

    #[test]
    fn roundtrip_check_on_a_small_model() {
        let c = tiny_config(WnVariant::SqueezeWave, 4, true);
        let r = roundtrip_check(&Model::random(c, 3).unwrap(), 3).unwrap();
        assert!(r.forward_inverse < 1e-5 && r.inverse_forward < 1e-5, "{r:?}");
    }
}
