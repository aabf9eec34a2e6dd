use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use squeezewave::analyzer::{analyze, compare};
use squeezewave::audio::{load_mel, mel_spectrogram, mel_spectrogram_with, read_wav, save_mel, write_wav, MelParams, Waveform};
use squeezewave::bench::{run_benchmark, BenchOptions};
use squeezewave::flow::WnVariant;
use squeezewave::verify::{jacobian_check, roundtrip_check, synthetic_mel, tiny_config};
use squeezewave::vocoder::{infer, load_model, nll, save_model, InitOptions, Model, ModelConfig};
use squeezewave::FeatureMap;

/// WaveGlow / SqueezeWave flow vocoder: synthesis, cost analysis and checks.
#[derive(Parser)]
#[command(name = "squeezewave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a waveform from a mel spectrogram (or from a WAV's mel).
    Synthesize(SynthesizeArgs),
    /// Print the MAC and parameter budget of a configuration.
    Analyze(AnalyzeArgs),
    /// Time synthesis of synthetic conditioning.
    Benchmark(BenchmarkArgs),
    /// Check invertibility and the log-determinant on a random model.
    Roundtrip(RoundtripArgs),
    /// Per-sample negative log-likelihood of a WAV file.
    Nll(NllArgs),
    /// Write a model file with seeded random weights.
    GenRandomModel(GenArgs),
    /// Extract a log-mel spectrogram from a WAV file.
    Mel(MelArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct MelSource {
    #[arg(long)]
    mel: Option<PathBuf>,
    #[arg(long)]
    wav: Option<PathBuf>,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    source: MelSource,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    sigma: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Records,
}

#[derive(Args)]
#[group(id = "cfg", required = true, multiple = false)]
struct ConfigSource {
    #[arg(long)]
    preset: Option<String>,
    /// Text file with one `key = value` line per config field.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    source: ConfigSource,
    #[arg(long, default_value_t = 1.0)]
    seconds: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
#[group(id = "weights", required = true, multiple = false)]
struct ModelSource {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use random weights for this preset.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long, default_value_t = 10.0)]
    seconds: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seed for random weights, the conditioning and the latent.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RoundtripArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct NllArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    wav: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    sigma: f32,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MelArgs {
    #[arg(long)]
    wav: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synthesize(a) => synthesize(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Roundtrip(a) => roundtrip(a),
        Command::Nll(a) => nll_cmd(a),
        Command::GenRandomModel(a) => {
            let model = Model::random(ModelConfig::preset(&a.preset)?, a.seed)?;
            save_model(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
            println!("wrote {} ({} parameters)", a.out.display(), model.param_count());
            Ok(())
        }
        Command::Mel(a) => {
            let mel = mel_spectrogram(&read(&a.wav)?)?;
            save_mel(&a.out, &mel).with_context(|| format!("writing {}", a.out.display()))?;
            println!("wrote {} ({}x{})", a.out.display(), mel.channels(), mel.length());
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<Waveform> {
    read_wav(path).with_context(|| format!("reading {}", path.display()))
}

fn open_model(path: &Path) -> Result<Model> {
    load_model(path).with_context(|| format!("loading {}", path.display()))
}

/// Mel front end matched to the model's band count, hop and sample rate.
fn model_mel(wave: &Waveform, config: &ModelConfig) -> Result<FeatureMap> {
    let p = MelParams {
        sample_rate: config.sample_rate as u32,
        hop: config.hop,
        n_mels: config.n_mels,
        ..MelParams::default()
    };
    Ok(mel_spectrogram_with(wave, &p)?)
}

fn synthesize(a: SynthesizeArgs) -> Result<()> {
    let model = open_model(&a.model)?;
    let c = *model.config();
    let mel = match (&a.source.mel, &a.source.wav) {
        (Some(p), _) => load_mel(p).with_context(|| format!("reading {}", p.display()))?,
        (None, Some(p)) => {
            let wave = read(p)?;
            let frames = wave.samples.len() / c.hop;
            if frames == 0 {
                bail!("{} is shorter than one hop ({} samples)", p.display(), c.hop);
            }
            // keep whole hops so the output length matches the input
            model_mel(&wave, &c)?.slice_time(0..frames)?
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let t0 = Instant::now();
    let audio = infer(&mel, a.sigma, &model, a.seed)?;
    let secs = t0.elapsed().as_secs_f64();
    write_wav(&a.out, &Waveform::new(audio.clone(), c.sample_rate as u32))
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "wrote {} samples to {} in {secs:.3} s ({:.0} samples/s)",
        audio.len(),
        a.out.display(),
        audio.len() as f64 / secs
    );
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<()> {
    let config = match (&a.source.preset, &a.source.config) {
        (Some(name), _) => ModelConfig::preset(name)?,
        (None, Some(p)) => std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))?
            .parse::<ModelConfig>()
            .with_context(|| format!("parsing {}", p.display()))?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let report = analyze(&config, a.seconds)?;
    match a.format {
        Format::Table => {
            println!("{}", report.table());
            let baseline = analyze(&ModelConfig::waveglow(), a.seconds)?;
            if report.total_macs > 0.0 {
                println!("waveglow / this: {:.1}x fewer MACs", compare(&baseline, &report)?);
            }
        }
        Format::Records => print!("{}", report.records()),
    }
    Ok(())
}

fn model_from(source: &ModelSource, seed: u64) -> Result<Model> {
    match (&source.model, &source.preset) {
        (Some(p), _) => open_model(p),
        (None, Some(name)) => Ok(Model::random(ModelConfig::preset(name)?, seed)?),
        (None, None) => unreachable!("clap requires one source"),
    }
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let model = model_from(&a.source, a.seed)?;
    let opts = BenchOptions {
        seconds: a.seconds,
        threads: a.threads,
        seed: a.seed,
        ..BenchOptions::default()
    };
    let r = run_benchmark(&model, &opts)?;
    println!(
        "{} samples, median {:.4} s over {} runs (variance {:.3e} s^2)",
        r.samples,
        r.median_seconds,
        r.times.len(),
        r.variance
    );
    println!("samples/s: {:.0}", r.samples_per_second);
    println!("real-time factor: {:.3}", r.real_time_factor);
    Ok(())
}

fn roundtrip(a: RoundtripArgs) -> Result<()> {
    let model = model_from(&a.source, a.seed)?;
    let r = roundtrip_check(&model, a.seed)?;
    println!("forward->inverse max abs error: {:.3e}", r.forward_inverse);
    println!("inverse->forward max abs error: {:.3e}", r.inverse_forward);

    let opts = InitOptions {
        conv_std: 0.3,
        end_std: 0.3,
        mixing_jitter: 0.5,
    };
    let tiny = Model::random_with(tiny_config(WnVariant::SqueezeWave, 3, true), a.seed, opts)?;
    let tc = *tiny.config();
    let audio = squeezewave::rng::GaussianStream::new(a.seed).vec(0, tc.window_samples, 0.5);
    let mel = synthetic_mel(tc.n_mels, tc.frames_for(tc.window_samples), a.seed);
    let j = jacobian_check(&tiny, &audio, &mel)?;
    println!(
        "tiny-config log-det: analytic {:.6}, numeric {:.6}, relative error {:.3e}",
        j.analytic,
        j.numeric,
        j.relative_error()
    );
    let pass = r.forward_inverse < 1e-3 && r.inverse_forward < 1e-3 && j.relative_error() < 1e-3;
    if !pass {
        bail!("roundtrip check failed");
    }
    println!("PASS");
    Ok(())
}

fn nll_cmd(a: NllArgs) -> Result<()> {
    let model = open_model(&a.model)?;
    let c = *model.config();
    let mut wave = read(&a.wav)?;
    if wave.samples.is_empty() {
        bail!("{} has no samples", a.wav.display());
    }
    let padded = wave.samples.len().div_ceil(c.window_samples) * c.window_samples;
    wave.samples.resize(padded, 0.0);
    let mel = model_mel(&wave, &c)?;
    let value = nll(&wave.samples, &mel, a.sigma, &model)?;
    println!("{value:.6}");
    Ok(())
}
