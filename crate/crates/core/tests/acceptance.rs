//! Acceptance suite: one PASS/FAIL line per criterion and a summary line.
//! Failures only change the exit status when `ACCEPTANCE_STRICT=1`, so a
//! workspace test run still reaches the suites that follow this one.

use std::time::Instant;

use squeezewave::analyzer::{analyze, compare, count_params, LayerClass};
use squeezewave::audio::{mel_band_edges, mel_spectrogram, MelParams, Waveform};
use squeezewave::bench::{run_benchmark, BenchOptions};
use squeezewave::flow::WnVariant;
use squeezewave::rng::GaussianStream;
use squeezewave::tensor::{conv1d, depthwise_separable_conv1d, macs, ConvSpec, ConvWeights, FeatureMap};
use squeezewave::verify::{jacobian_check, roundtrip_check, synthetic_mel, tiny_config};
use squeezewave::vocoder::{infer, nll, InitOptions, Model, ModelConfig, PRESET_NAMES};

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn a1() -> Outcome {
    let t0 = Instant::now();
    let r = analyze(&ModelConfig::waveglow(), 1.0).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let g = r.gmacs_per_second;
    let shares = [
        (LayerClass::InLayer, 0.47),
        (LayerClass::CondLayer, 0.39),
        (LayerClass::ResSkipLayer, 0.14),
    ];
    let mut pass = (224.0..=234.0).contains(&g) && elapsed < 1.0;
    let mut detail = format!("{g:.2} GMACs (target [224, 234])");
    for (class, target) in shares {
        let s = r.share(class);
        pass &= (s - target).abs() <= 0.03;
        detail += &format!(", {class} {:.1}% (target {:.0}%)", 100.0 * s, 100.0 * target);
    }
    detail += &format!(", {elapsed:.3} s");
    Outcome { pass, detail }
}

const SW: [(&str, f64, f64, f64); 4] = [
    ("sw-128l", 3.78, 61.0, 23.6e6),
    ("sw-128s", 1.07, 214.0, 7.1e6),
    ("sw-64l", 2.16, 106.0, 24.6e6),
    ("sw-64s", 0.69, 332.0, 8.8e6),
];

fn a2() -> Outcome {
    let wg = analyze(&ModelConfig::waveglow(), 1.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, gmacs, ratio, _) in SW {
        let r = analyze(&ModelConfig::preset(name).unwrap(), 1.0).unwrap();
        let q = compare(&wg, &r).unwrap();
        let ok = within(r.gmacs_per_second, gmacs, 0.05) && within(q, ratio, 0.05);
        pass &= ok;
        parts.push(format!(
            "{name} {:.3} GMACs (target {gmacs}), ratio {q:.1} (target {ratio}){}",
            r.gmacs_per_second,
            if ok { "" } else { " MISS" }
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn a3() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let targets = [("waveglow", 87.7e6)].into_iter().chain(SW.iter().map(|&(n, _, _, p)| (n, p)));
    for (name, target) in targets {
        let p = count_params(&ModelConfig::preset(name).unwrap()).unwrap() as f64;
        let ok = within(p, target, 0.05);
        pass &= ok;
        parts.push(format!(
            "{name} {:.2}M (target {:.1}M, {:+.1}%){}",
            p / 1e6,
            target / 1e6,
            100.0 * (p / target - 1.0),
            if ok { "" } else { " MISS" }
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn a4() -> Outcome {
    let (k, l) = (3u64, 16usize);
    let mut pass = true;
    let mut parts = Vec::new();
    for c_out in [8usize, 128, 512] {
        let c_in = c_out / 2;
        let x = FeatureMap::from_vec(c_in, l, GaussianStream::new(1).vec(0, c_in * l, 1.0)).unwrap();
        let dense = ConvSpec::dense(c_in, c_out, 3, 1);
        let sep = ConvSpec::separable(c_in, c_out, 3, 1);
        let (_, md) = macs::count(|| conv1d(&x, &dense, &ConvWeights::zeros(&dense)).unwrap());
        let (_, ms) = macs::count(|| depthwise_separable_conv1d(&x, &sep, &ConvWeights::zeros(&sep)).unwrap());
        // ms / md == 1/C_out + 1/K  <=>  ms * C_out * K == md * (K + C_out)
        let ok = ms * c_out as u64 * k == md * (k + c_out as u64);
        pass &= ok;
        parts.push(format!(
            "C_out={c_out}: {ms}/{md} = {:.6} vs {:.6}",
            ms as f64 / md as f64,
            1.0 / c_out as f64 + 1.0 / k as f64
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn a5() -> Outcome {
    let t0 = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, name) in PRESET_NAMES.iter().enumerate() {
        let m = Model::random(ModelConfig::preset(name).unwrap(), 100 + i as u64).unwrap();
        let r = roundtrip_check(&m, 7).unwrap();
        let ok = r.forward_inverse < 1e-3 && r.inverse_forward < 1e-3;
        pass &= ok;
        parts.push(format!("{name} {:.1e}/{:.1e}", r.forward_inverse, r.inverse_forward));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    pass &= elapsed < 60.0;
    Outcome {
        pass,
        detail: format!("max-abs fwd->inv/inv->fwd: {}; {elapsed:.1} s", parts.join(", ")),
    }
}

fn a6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_pair = (0.0, 0.0);
    let mut n = 0;
    for seed in 0..24u64 {
        let variant = if seed % 2 == 0 { WnVariant::WaveGlow } else { WnVariant::SqueezeWave };
        let flows = 1 + (seed as usize / 2) % 4;
        let c = tiny_config(variant, flows, seed % 3 == 0 && flows >= 3);
        let opts = InitOptions {
            conv_std: 0.3,
            end_std: 0.3,
            mixing_jitter: 0.5,
        };
        let m = Model::random_with(c, seed, opts).unwrap();
        let audio = GaussianStream::new(seed).substream(9).vec(0, c.window_samples, 0.5);
        let mel = synthetic_mel(c.n_mels, c.frames_for(c.window_samples), seed);
        let r = jacobian_check(&m, &audio, &mel).unwrap();
        if r.relative_error() >= worst {
            worst = r.relative_error();
            worst_pair = (r.analytic, r.numeric);
        }
        n += 1;
    }
    Outcome {
        pass: worst < 1e-3,
        detail: format!(
            "{n} tiny models (16 latent elements), worst relative error {worst:.2e} ({:.5} analytic vs {:.5} numeric)",
            worst_pair.0, worst_pair.1
        ),
    }
}

fn a7() -> Outcome {
    let mut rates = Vec::new();
    for (i, name) in PRESET_NAMES.iter().enumerate() {
        let c = ModelConfig::preset(name).unwrap();
        let m = Model::random(c, 200 + i as u64).unwrap();
        // one window per run; the dense model gets a single timed run
        let (runs, warmup) = if c.variant == WnVariant::WaveGlow { (1, 0) } else { (3, 1) };
        let opts = BenchOptions {
            seconds: (c.window_samples / c.hop * c.hop) as f64 / c.sample_rate as f64,
            runs,
            warmup,
            ..Default::default()
        };
        let r = run_benchmark(&m, &opts).unwrap();
        rates.push((*name, r.samples_per_second, r.real_time_factor));
    }
    let wg = rates[0].1;
    let mut pass = true;
    let mut parts = vec![format!("waveglow {wg:.0} samples/s")];
    for &(name, sps, rtf) in &rates[1..] {
        let speedup = sps / wg;
        pass &= speedup >= 10.0;
        if name == "sw-128s" {
            pass &= rtf >= 1.0;
        }
        parts.push(format!("{name} {sps:.0} samples/s ({speedup:.0}x, RTF {rtf:.2})"));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn a8() -> Outcome {
    let p = MelParams::default();
    let sine: Vec<f32> = (0..22050)
        .map(|i| (0.5 * (std::f64::consts::TAU * 1000.0 * i as f64 / 22050.0).sin()) as f32)
        .collect();
    let m = mel_spectrogram(&Waveform::new(sine, 22050)).unwrap();
    let t = m.length() / 2;
    let peak = (0..p.n_mels).max_by(|&a, &b| m.get(a, t).total_cmp(&m.get(b, t))).unwrap();
    let edges = mel_band_edges(&p);
    let contains = edges[peak] <= 1000.0 && 1000.0 <= edges[peak + 2];
    // band energy in dB relative to the peak band (mel values are magnitudes)
    let db = |b: usize| 20.0 * ((m.get(b, t) - m.get(peak, t)) as f64) / std::f64::consts::LN_10;
    let neighbours: Vec<(usize, f64)> = [peak.wrapping_sub(1), peak + 1]
        .into_iter()
        .filter(|&b| b < p.n_mels)
        .map(|b| (b, db(b)))
        .collect();
    let band_ok = contains && neighbours.iter().all(|&(_, d)| d <= -20.0);

    let g = GaussianStream::new(8);
    let frames_ok = (0..10).all(|i| {
        let n = 1 + (g.uniform(i) * 100_000.0) as usize;
        mel_spectrogram(&Waveform::new(vec![0.0; n], 22050)).unwrap().length() == n / 256 + 1
    });
    let silent = mel_spectrogram(&Waveform::new(vec![0.0; 16384], 22050)).unwrap();
    let floor_ok = silent.data().iter().all(|&v| v == (1e-5f64).ln() as f32);

    let nb: Vec<String> = neighbours.iter().map(|(b, d)| format!("band {b} {d:.1} dB")).collect();
    Outcome {
        pass: band_ok && frames_ok && floor_ok,
        detail: format!(
            "peak band {peak} ({:.0}-{:.0} Hz), neighbours {} (need <= -20 dB); frame counts {}; zero floor {}",
            edges[peak],
            edges[peak + 2],
            nb.join(", "),
            if frames_ok { "ok" } else { "WRONG" },
            if floor_ok { "exact" } else { "WRONG" }
        ),
    }
}

fn a9() -> Outcome {
    let c = ModelConfig { n_flows: 0, ..ModelConfig::preset("sw-64s").unwrap() };
    let id = Model::identity(c).unwrap();
    let mel = synthetic_mel(c.n_mels, c.frames_for(c.window_samples), 1);
    let silence = nll(&vec![0.0; c.window_samples], &mel, 1.0, &id).unwrap();
    let unit = nll(&vec![1.0; c.window_samples], &mel, 1.0, &id).unwrap();
    let mut pass = silence.abs() <= 1e-6 && (unit - 0.5).abs() <= 1e-6;
    let mut parts = vec![format!("identity: silence {silence}, unit {unit}")];
    for (i, name) in PRESET_NAMES.iter().enumerate() {
        let c = ModelConfig::preset(name).unwrap();
        let m = Model::random(c, 300 + i as u64).unwrap();
        let mel = synthetic_mel(c.n_mels, c.frames_for(c.window_samples), 3);
        let frames = c.window_samples / c.hop;
        let mut audio = infer(&mel.slice_time(0..frames).unwrap(), 1.0, &m, 5).unwrap();
        audio.resize(c.window_samples, 0.0);
        let rms = (audio.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / audio.len() as f64).sqrt();
        let noise = GaussianStream::new(6).vec(0, c.window_samples, 10.0 * rms);
        let (a, b) = (nll(&audio, &mel, 1.0, &m).unwrap(), nll(&noise, &mel, 1.0, &m).unwrap());
        pass &= a < b;
        parts.push(format!("{name} generated {a:.3} < noise {b:.3}"));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
        ("A9", a9),
    ];
    let mut failed = Vec::new();
    for (id, f) in criteria {
        let t0 = Instant::now();
        let o = f();
        println!(
            "{id} {} [{:.1} s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
