use rayon::prelude::*;

use super::config::ModelConfig;
use super::model::Model;
use crate::error::{shape_err, Error, Result};
use crate::flow::{flow_step_forward_projected, flow_step_inverse_projected, FlowStep, WnVariant};
use crate::rng::GaussianStream;
use crate::tensor::{upsample_nearest, FeatureMap};

/// Log-mel value of silence; used to pad mels out to whole windows.
pub const MEL_FLOOR: f32 = -11.512_925; // ln(1e-5)

/// `(c, t) = wave[t * C_g + c]`.
pub fn group_audio(wave: &[f32], group_size: usize) -> Result<FeatureMap> {
    if group_size == 0 || wave.is_empty() || wave.len() % group_size != 0 {
        return Err(shape_err!(
            "{} samples cannot be grouped into blocks of {group_size}",
            wave.len()
        ));
    }
    let l = wave.len() / group_size;
    Ok(FeatureMap::from_fn(group_size, l, |c, t| wave[t * group_size + c]))
}

/// Inverse of [`group_audio`].
pub fn ungroup_audio(x: &FeatureMap) -> Vec<f32> {
    let (c_g, l) = x.shape();
    let mut wave = vec![0.0; c_g * l];
    for c in 0..c_g {
        for (t, &v) in x.row(c).iter().enumerate() {
            wave[t * c_g + c] = v;
        }
    }
    wave
}

/// Latent variables of a (possibly multi-window) pass. Each window is stored
/// contiguously: early-output blocks in emission order, then the final
/// channels, every block flattened channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector {
    pub data: Vec<f32>,
    /// Samples per window.
    pub window_samples: usize,
    /// Channel count of each block within a window.
    pub blocks: Vec<usize>,
}

impl LatentVector {
    pub fn windows(&self) -> usize {
        self.data.len() / self.window_samples
    }

    /// Splits window `w` into its blocks, each `channels x L`.
    pub fn window_blocks(&self, w: usize) -> Result<Vec<FeatureMap>> {
        let c_g: usize = self.blocks.iter().sum();
        let l = self.window_samples / c_g;
        let mut at = w * self.window_samples;
        self.blocks
            .iter()
            .map(|&c| {
                let m = FeatureMap::from_vec(c, l, self.data[at..at + c * l].to_vec());
                at += c * l;
                m
            })
            .collect()
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}

/// Conditioning for one window, turned into per-flow `cond_layer` output on
/// demand so only one flow's projection is alive at a time.
#[derive(Clone, Debug)]
pub struct Conditioning {
    /// Either at step rate (`L` columns) or, when projecting first, at frame rate.
    base: FeatureMap,
    project_first: bool,
    steps: usize,
}

impl Conditioning {
    /// Projected conditioning for `step`: `2 W n_layers x L`.
    pub fn for_flow(&self, step: &FlowStep) -> Result<FeatureMap> {
        let cond = step.wn.cond_layer();
        if self.project_first {
            upsample_nearest(&cond.forward(&self.base)?, self.steps)
        } else {
            cond.forward(&self.base)
        }
    }

    /// The features fed to `cond_layer`.
    pub fn base(&self) -> &FeatureMap {
        &self.base
    }
}

fn check_mel(mel: &FeatureMap, config: &ModelConfig, samples: usize) -> Result<()> {
    if mel.channels() != config.n_mels {
        return Err(shape_err!("mel has {} channels, model expects {}", mel.channels(), config.n_mels));
    }
    let need = config.frames_for(samples);
    if mel.length() < need {
        return Err(shape_err!("{samples} samples need {need} mel frames, got {}", mel.length()));
    }
    Ok(())
}

/// Per-window conditioning for `windows` consecutive windows of `mel`.
pub fn prepare_conditioning(mel: &FeatureMap, model: &Model, windows: usize) -> Result<Vec<Conditioning>> {
    let config = model.config();
    let total = windows * config.window_samples;
    check_mel(mel, config, total)?;
    let steps = config.steps_per_window();
    match config.variant {
        WnVariant::WaveGlow => {
            let up = model
                .upsampler()
                .expect("validated: WaveGlow models have an upsampler")
                .forward(mel)?;
            let (c_m, c_g) = (config.n_mels, config.group_size);
            (0..windows)
                .map(|w| {
                    let start = w * config.window_samples;
                    if start + config.window_samples > up.length() {
                        return Err(shape_err!("upsampled conditioning too short"));
                    }
                    // channel m * C_g + g at step t is upsampled(m, start + t * C_g + g)
                    let base = FeatureMap::from_fn(c_m * c_g, steps, |ch, t| {
                        up.get(ch / c_g, start + t * c_g + ch % c_g)
                    });
                    Ok(Conditioning {
                        base,
                        project_first: false,
                        steps,
                    })
                })
                .collect()
        }
        WnVariant::SqueezeWave => {
            let frames = config.window_samples / config.hop;
            (0..windows)
                .map(|w| {
                    let window_mel = mel.slice_time(w * frames..(w + 1) * frames)?;
                    Ok(if config.cond_before_upsample {
                        Conditioning {
                            base: window_mel,
                            project_first: true,
                            steps,
                        }
                    } else {
                        Conditioning {
                            base: upsample_nearest(&window_mel, steps)?,
                            project_first: false,
                            steps,
                        }
                    })
                })
                .collect()
        }
    }
}

fn forward_window(audio: &[f32], cond: &Conditioning, model: &Model) -> Result<(Vec<f32>, f64)> {
    let config = model.config();
    let mut x = group_audio(audio, config.group_size)?;
    let mut z = Vec::with_capacity(audio.len());
    let mut log_det = 0.0;
    for (k, step) in model.flows().iter().enumerate() {
        if config.emits_before(k) {
            let n = config.n_early_size;
            z.extend_from_slice(x.slice_channels(0..n)?.data());
            x = x.slice_channels(n..x.channels())?;
        }
        let (y, ld) = flow_step_forward_projected(&x, &cond.for_flow(step)?, step)?;
        x = y;
        log_det += ld;
    }
    z.extend_from_slice(x.data());
    Ok((z, log_det))
}

fn inverse_window(blocks: Vec<FeatureMap>, cond: &Conditioning, model: &Model) -> Result<Vec<f32>> {
    let config = model.config();
    let mut early = blocks;
    let mut x = early.pop().expect("latent has a final block");
    for (k, step) in model.flows().iter().enumerate().rev() {
        x = flow_step_inverse_projected(&x, &cond.for_flow(step)?, step)?;
        if config.emits_before(k) {
            let j = k / config.n_early_every - 1;
            x = FeatureMap::concat_channels(&[&early[j], &x])?;
        }
    }
    Ok(ungroup_audio(&x))
}

/// Density direction: audio (a whole number of windows) to latent, plus the
/// total log-determinant.
pub fn forward(audio: &[f32], mel: &FeatureMap, model: &Model) -> Result<(LatentVector, f64)> {
    let config = model.config();
    let ws = config.window_samples;
    if audio.is_empty() || audio.len() % ws != 0 {
        return Err(shape_err!(
            "audio length {} is not a positive multiple of the {ws}-sample window",
            audio.len()
        ));
    }
    let windows = audio.len() / ws;
    let conds = prepare_conditioning(mel, model, windows)?;
    let mut data = Vec::with_capacity(audio.len());
    let mut log_det = 0.0;
    for (w, cond) in conds.iter().enumerate() {
        let (z, ld) = forward_window(&audio[w * ws..(w + 1) * ws], cond, model)?;
        data.extend(z);
        log_det += ld;
    }
    Ok((
        LatentVector {
            data,
            window_samples: ws,
            blocks: config.latent_blocks(),
        },
        log_det,
    ))
}

/// Runs `f` over `0..n` on `threads` workers, or inline when `threads <= 1`.
/// Items are independent, so the result does not depend on the thread count.
fn map_windows<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Synthesis direction from an explicit latent. Returns `windows * window_samples`
/// samples; `mel` must cover all of them.
pub fn infer_from_latent(z: &LatentVector, mel: &FeatureMap, model: &Model, threads: usize) -> Result<Vec<f32>> {
    let config = model.config();
    if z.window_samples != config.window_samples
        || z.blocks != config.latent_blocks()
        || z.data.is_empty()
        || z.data.len() % z.window_samples != 0
    {
        return Err(shape_err!(
            "latent layout ({} values, window {}, blocks {:?}) does not match the model",
            z.data.len(),
            z.window_samples,
            z.blocks
        ));
    }
    let conds = prepare_conditioning(mel, model, z.windows())?;
    let parts = map_windows(conds.len(), threads, |w| inverse_window(z.window_blocks(w)?, &conds[w], model))?;
    Ok(parts.concat())
}

/// Draws `sigma * N(0, 1)` latents for `windows` windows; window `w` uses
/// stream positions `[w * window_samples, (w + 1) * window_samples)`.
pub fn sample_latent(config: &ModelConfig, windows: usize, sigma: f32, seed: u64) -> LatentVector {
    LatentVector {
        data: GaussianStream::new(seed).vec(0, windows * config.window_samples, sigma as f64),
        window_samples: config.window_samples,
        blocks: config.latent_blocks(),
    }
}

/// Synthesizes `mel.length() * hop` samples. The mel is padded with silence
/// frames to a whole number of windows and the output trimmed back.
pub fn infer(mel: &FeatureMap, sigma: f32, model: &Model, seed: u64) -> Result<Vec<f32>> {
    infer_threads(mel, sigma, model, seed, 1)
}

/// [`infer`] with windows spread over `threads` workers; bit-identical output.
pub fn infer_threads(mel: &FeatureMap, sigma: f32, model: &Model, seed: u64, threads: usize) -> Result<Vec<f32>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let config = model.config();
    if mel.channels() != config.n_mels {
        return Err(shape_err!("mel has {} channels, model expects {}", mel.channels(), config.n_mels));
    }
    let samples = mel.length() * config.hop;
    let windows = samples.div_ceil(config.window_samples);
    let padded = pad_frames(mel, config.frames_for(windows * config.window_samples));
    let z = sample_latent(config, windows, sigma, seed);
    let mut audio = infer_from_latent(&z, &padded, model, threads)?;
    audio.truncate(samples);
    Ok(audio)
}

/// Appends [`MEL_FLOOR`] frames up to `frames` (never trims).
pub fn pad_frames(mel: &FeatureMap, frames: usize) -> FeatureMap {
    if mel.length() >= frames {
        return mel.clone();
    }
    FeatureMap::from_fn(mel.channels(), frames, |c, t| {
        if t < mel.length() {
            mel.get(c, t)
        } else {
            MEL_FLOOR
        }
    })
}

/// `(sum z^2 / (2 sigma^2) - log_det) / N`, without the constant Gaussian
/// normalization term.
pub fn nll(audio: &[f32], mel: &FeatureMap, sigma: f32, model: &Model) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let (z, log_det) = forward(audio, mel, model)?;
    let s2 = (sigma as f64).powi(2);
    Ok((z.sum_squares() / (2.0 * s2) - log_det) / audio.len() as f64)
}
