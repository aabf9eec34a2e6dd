use std::path::Path;

use super::fft::rfft_magnitude;
use super::wav::Waveform;
use crate::container::{Reader, Tensor, Writer};
use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

const MEL_MAGIC: &[u8; 4] = b"SQZM";

/// Front-end settings. The defaults are the 22.05 kHz / 80-band setup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MelParams {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub win_length: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Lower clamp before the natural log.
    pub floor: f64,
}

impl Default for MelParams {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            n_fft: 1024,
            win_length: 1024,
            hop: 256,
            n_mels: 80,
            f_min: 0.0,
            f_max: 8000.0,
            floor: 1e-5,
        }
    }
}

impl MelParams {
    /// Frames produced for `samples` input samples: `floor(samples / hop) + 1`.
    pub fn frame_count(&self, samples: usize) -> usize {
        samples / self.hop + 1
    }
}

/// Periodic Hann window: `0.5 - 0.5 cos(2 pi n / N)`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect()
}

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    } else {
        hz / F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    } else {
        mel * F_SP
    }
}

/// Edge frequencies of the `n_mels` triangles (`n_mels + 2` points, evenly
/// spaced in mel).
pub fn mel_band_edges(p: &MelParams) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(p.f_min), hz_to_mel(p.f_max));
    let n = p.n_mels + 2;
    (0..n).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
}

/// `n_mels x (n_fft/2 + 1)` triangular filters, each scaled by
/// `2 / (f_right - f_left)` so every filter has unit area in Hz.
pub fn mel_filterbank(p: &MelParams) -> Vec<Vec<f64>> {
    let edges = mel_band_edges(p);
    let bins = p.n_fft / 2 + 1;
    let freq = |k: usize| k as f64 * p.sample_rate as f64 / p.n_fft as f64;
    (0..p.n_mels)
        .map(|i| {
            let (l, c, r) = (edges[i], edges[i + 1], edges[i + 2]);
            let norm = 2.0 / (r - l);
            (0..bins)
                .map(|k| {
                    let f = freq(k);
                    let up = (f - l) / (c - l);
                    let down = (r - f) / (r - c);
                    norm * up.min(down).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Reflect-padding index (edge sample not repeated), folding as many times
/// as needed for very short inputs.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// Centered magnitude STFT: one `n_fft/2 + 1` vector per frame.
pub fn stft_magnitude(samples: &[f32], p: &MelParams) -> Vec<Vec<f64>> {
    let window = hann_window(p.win_length);
    let pad = (p.n_fft / 2) as isize;
    let offset = (p.n_fft - p.win_length) / 2;
    (0..p.frame_count(samples.len()))
        .map(|f| {
            let mut frame = vec![0.0; p.n_fft];
            for (j, w) in window.iter().enumerate() {
                let i = (f * p.hop + offset + j) as isize - pad;
                frame[offset + j] = w * samples[reflect(i, samples.len())] as f64;
            }
            rfft_magnitude(&frame)
        })
        .collect()
}

/// Applies the filterbank and `ln(max(x, floor))` to a magnitude STFT.
pub fn log_mel_from_magnitude(spec: &[Vec<f64>], p: &MelParams) -> Result<FeatureMap> {
    let bank = mel_filterbank(p);
    let frames = spec.len();
    let mut data = Vec::with_capacity(p.n_mels * frames);
    for filter in &bank {
        for frame in spec {
            let e: f64 = filter.iter().zip(frame).map(|(w, m)| w * m).sum();
            data.push(e.max(p.floor).ln() as f32);
        }
    }
    FeatureMap::from_vec(p.n_mels, frames, data)
}

/// Log-mel spectrogram with the default parameters; the waveform must be
/// at 22050 Hz.
pub fn mel_spectrogram(w: &Waveform) -> Result<FeatureMap> {
    mel_spectrogram_with(w, &MelParams::default())
}

pub fn mel_spectrogram_with(w: &Waveform, p: &MelParams) -> Result<FeatureMap> {
    if w.sample_rate != p.sample_rate {
        return Err(Error::InvalidArgument(format!(
            "mel extraction expects {} Hz audio, got {} Hz",
            p.sample_rate, w.sample_rate
        )));
    }
    if w.samples.is_empty() {
        return Err(Error::InvalidArgument("cannot extract a mel spectrogram from empty audio".into()));
    }
    if !p.n_fft.is_power_of_two() || p.win_length > p.n_fft || p.hop == 0 {
        return Err(Error::InvalidArgument(format!("invalid STFT parameters {p:?}")));
    }
    log_mel_from_magnitude(&stft_magnitude(&w.samples, p), p)
}

/// Encodes a mel as an `SQZM` container with one tensor `mel` of dims
/// `[channels, frames]`.
pub fn mel_to_bytes(mel: &FeatureMap) -> Result<Vec<u8>> {
    let t = Tensor::new("mel", vec![mel.channels(), mel.length()], mel.data().to_vec())?;
    Writer::new(MEL_MAGIC).finish(&[t])
}

pub fn mel_from_bytes(bytes: &[u8]) -> Result<FeatureMap> {
    let mut tensors = Reader::open(bytes, MEL_MAGIC)?.tensors()?;
    if tensors.len() != 1 || tensors[0].name != "mel" || tensors[0].dims.len() != 2 {
        let names: Vec<&str> = tensors.iter().map(|t| t.name.as_str()).collect();
        return Err(Error::Schema(format!("expected one rank-2 tensor `mel`, found {names:?}")));
    }
    let t = tensors.pop().unwrap();
    FeatureMap::from_vec(t.dims[0], t.dims[1], t.data).map_err(|e| Error::Schema(e.to_string()))
}

pub fn save_mel(path: impl AsRef<Path>, mel: &FeatureMap) -> Result<()> {
    std::fs::write(path, mel_to_bytes(mel)?)?;
    Ok(())
}

pub fn load_mel(path: impl AsRef<Path>) -> Result<FeatureMap> {
    mel_from_bytes(&std::fs::read(path)?)
}
