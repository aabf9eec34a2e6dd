//! Wall-clock synthesis throughput.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::verify::synthetic_mel;
use crate::vocoder::{infer_threads, Model};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchOptions {
    /// Seconds of audio synthesized per run.
    pub seconds: f64,
    pub threads: usize,
    pub runs: usize,
    pub warmup: usize,
    pub sigma: f32,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            seconds: 10.0,
            threads: 1,
            runs: 5,
            warmup: 1,
            sigma: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub samples: usize,
    /// Wall-clock seconds of each timed run.
    pub times: Vec<f64>,
    pub median_seconds: f64,
    pub variance: f64,
    pub samples_per_second: f64,
    /// `samples_per_second / sample_rate`.
    pub real_time_factor: f64,
    /// Output of the last run.
    pub audio: Vec<f32>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Synthesizes from a seeded synthetic mel `warmup + runs` times and reports
/// the median of the timed runs.
pub fn run_benchmark(model: &Model, opts: &BenchOptions) -> Result<BenchResult> {
    if opts.runs == 0 || !(opts.seconds > 0.0) {
        return Err(Error::InvalidArgument("benchmark needs at least one run of positive duration".into()));
    }
    let c = model.config();
    let exact = opts.seconds * c.sample_rate as f64 / c.hop as f64;
    // whole frame counts survive the round trip through seconds
    let frames = if (exact - exact.round()).abs() < 1e-6 { exact.round() } else { exact.ceil() };
    let frames = frames.max(1.0) as usize;
    let mel = synthetic_mel(c.n_mels, frames, opts.seed);
    let mut audio = Vec::new();
    for _ in 0..opts.warmup {
        audio = infer_threads(&mel, opts.sigma, model, opts.seed, opts.threads)?;
    }
    let mut times = Vec::with_capacity(opts.runs);
    for _ in 0..opts.runs {
        let t0 = Instant::now();
        audio = infer_threads(&mel, opts.sigma, model, opts.seed, opts.threads)?;
        times.push(t0.elapsed().as_secs_f64());
    }
    let med = median(&times);
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let variance = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / times.len() as f64;
    let samples = audio.len();
    let sps = samples as f64 / med;
    Ok(BenchResult {
        samples,
        times,
        median_seconds: med,
        variance,
        samples_per_second: sps,
        real_time_factor: sps / c.sample_rate as f64,
        audio,
    })
}
