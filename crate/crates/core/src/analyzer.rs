//! Analytical cost model: MACs and parameters of every layer of a config.
//!
//! A MAC is one multiply-accumulate of a convolution or of the 1x1 channel
//! mix. Biases, activations, gates and nearest-neighbour upsampling cost
//! nothing. Costs are computed for one window and scaled to the requested
//! duration by `seconds * sample_rate / window_samples`.

use std::fmt::{self, Write};

use crate::error::{Error, Result};
use crate::flow::WnVariant;
use crate::tensor::ConvSpec;
use crate::vocoder::ModelConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerClass {
    /// The WaveGlow transposed-convolution mel upsampler.
    Upsample,
    Inv1x1,
    Start,
    InLayer,
    CondLayer,
    ResSkipLayer,
    End,
}

impl LayerClass {
    pub const ALL: [LayerClass; 7] = [
        LayerClass::Upsample,
        LayerClass::Inv1x1,
        LayerClass::Start,
        LayerClass::InLayer,
        LayerClass::CondLayer,
        LayerClass::ResSkipLayer,
        LayerClass::End,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LayerClass::Upsample => "upsample",
            LayerClass::Inv1x1 => "inv1x1",
            LayerClass::Start => "start",
            LayerClass::InLayer => "in_layer",
            LayerClass::CondLayer => "cond_layer",
            LayerClass::ResSkipLayer => "res_skip_layer",
            LayerClass::End => "end",
        }
    }
}

impl fmt::Display for LayerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cost of one layer over one window.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerCost {
    pub name: String,
    pub class: LayerClass,
    pub macs: u64,
    pub params: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassTotal {
    pub class: LayerClass,
    /// Per window.
    pub window_macs: u64,
    /// Over the analyzed duration.
    pub macs: f64,
    pub params: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub config: ModelConfig,
    pub audio_seconds: f64,
    pub layers: Vec<LayerCost>,
    pub classes: Vec<ClassTotal>,
    pub window_macs: u64,
    /// MACs over `audio_seconds` of audio.
    pub total_macs: f64,
    pub params_total: u64,
    pub gmacs_per_second: f64,
}

impl CostReport {
    pub fn class(&self, class: LayerClass) -> &ClassTotal {
        self.classes.iter().find(|c| c.class == class).expect("every class is present")
    }

    /// Fraction of all MACs spent in `class`.
    pub fn share(&self, class: LayerClass) -> f64 {
        if self.window_macs == 0 {
            0.0
        } else {
            self.class(class).window_macs as f64 / self.window_macs as f64
        }
    }

    /// Human-readable summary with a per-class breakdown.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(
            s,
            "{} variant, C_g={} n_flows={} W={} layers={} window={} ({:.3} s of audio)",
            c.variant.name(),
            c.group_size,
            c.n_flows,
            c.wn_width,
            c.wn_layers,
            c.window_samples,
            self.audio_seconds
        );
        let _ = writeln!(s, "{:<16} {:>14} {:>8} {:>12}", "class", "GMACs", "share", "params");
        for t in &self.classes {
            if t.window_macs == 0 && t.params == 0 {
                continue;
            }
            let _ = writeln!(
                s,
                "{:<16} {:>14.4} {:>7.2}% {:>12}",
                t.class.name(),
                t.macs / 1e9,
                100.0 * self.share(t.class),
                t.params
            );
        }
        let _ = writeln!(s, "{:<16} {:>14.4} {:>7.2}% {:>12}", "total", self.total_macs / 1e9, 100.0, self.params_total);
        let _ = writeln!(s, "GMACs per second of audio: {:.4}", self.gmacs_per_second);
        let _ = write!(s, "parameters: {:.3} M", self.params_total as f64 / 1e6);
        s
    }

    /// One tab-separated record per layer: `name class macs params`, with
    /// MACs for one window.
    pub fn records(&self) -> String {
        let mut s = String::from("name\tclass\tmacs\tparams\n");
        for l in &self.layers {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", l.name, l.class, l.macs, l.params);
        }
        s
    }
}

/// `K * C_in * C_out * L_out`.
pub fn macs_dense_conv(spec: &ConvSpec, l_out: usize) -> u64 {
    (spec.kernel_size * spec.in_channels * spec.out_channels) as u64 * l_out as u64
}

/// `K * C_in * L + C_in * C_out * L`.
pub fn macs_separable_conv(spec: &ConvSpec, l_in: usize) -> u64 {
    (spec.kernel_size * spec.in_channels + spec.in_channels * spec.out_channels) as u64 * l_in as u64
}

fn conv_macs(spec: &ConvSpec, l: usize) -> u64 {
    if spec.separable {
        macs_separable_conv(spec, l)
    } else {
        macs_dense_conv(spec, l)
    }
}

fn conv_params(spec: &ConvSpec) -> u64 {
    spec.param_count() as u64
}

/// Enumerates every layer of `config` for one window.
pub fn layer_costs(config: &ModelConfig) -> Result<Vec<LayerCost>> {
    config.validate()?;
    let l = config.steps_per_window();
    let frames = config.window_samples / config.hop;
    let mut out = Vec::new();
    let mut push = |name: String, class, macs, params| {
        out.push(LayerCost {
            name,
            class,
            macs,
            params,
        })
    };
    if config.variant == WnVariant::WaveGlow {
        let (c_m, k) = (config.n_mels as u64, config.upsample_kernel() as u64);
        push(
            "upsample".into(),
            LayerClass::Upsample,
            c_m * c_m * k * config.frames_for(config.window_samples) as u64,
            c_m * c_m * k + c_m,
        );
    }
    for (i, c) in config.flow_channels().into_iter().enumerate() {
        let shape = config.wn_shape(c);
        push(format!("flow{i}.inv1x1"), LayerClass::Inv1x1, (c * c * l) as u64, (c * c) as u64);
        let s = shape.start_spec();
        push(format!("flow{i}.wn.start"), LayerClass::Start, conv_macs(&s, l), conv_params(&s));
        for j in 0..shape.n_layers {
            let s = shape.in_spec(j);
            push(format!("flow{i}.wn.in{j}"), LayerClass::InLayer, conv_macs(&s, l), conv_params(&s));
        }
        let s = shape.cond_spec();
        let cond_len = if config.cond_before_upsample { frames } else { l };
        push(format!("flow{i}.wn.cond"), LayerClass::CondLayer, conv_macs(&s, cond_len), conv_params(&s));
        for j in 0..shape.n_layers {
            let s = shape.res_skip_spec(j);
            push(format!("flow{i}.wn.res_skip{j}"), LayerClass::ResSkipLayer, conv_macs(&s, l), conv_params(&s));
        }
        let s = shape.end_spec();
        push(format!("flow{i}.wn.end"), LayerClass::End, conv_macs(&s, l), conv_params(&s));
    }
    Ok(out)
}

/// Cost of synthesizing `audio_seconds` of audio with `config`.
pub fn analyze(config: &ModelConfig, audio_seconds: f64) -> Result<CostReport> {
    if !(audio_seconds >= 0.0 && audio_seconds.is_finite()) {
        return Err(Error::InvalidArgument(format!("duration must be non-negative, got {audio_seconds}")));
    }
    let layers = layer_costs(config)?;
    let windows = audio_seconds * config.sample_rate as f64 / config.window_samples as f64;
    let classes: Vec<ClassTotal> = LayerClass::ALL
        .iter()
        .map(|&class| {
            let (m, p) = layers
                .iter()
                .filter(|l| l.class == class)
                .fold((0u64, 0u64), |(m, p), l| (m + l.macs, p + l.params));
            ClassTotal {
                class,
                window_macs: m,
                macs: m as f64 * windows,
                params: p,
            }
        })
        .collect();
    let window_macs: u64 = classes.iter().map(|c| c.window_macs).sum();
    let params_total = classes.iter().map(|c| c.params).sum();
    Ok(CostReport {
        config: *config,
        audio_seconds,
        layers,
        classes,
        window_macs,
        total_macs: window_macs as f64 * windows,
        params_total,
        gmacs_per_second: window_macs as f64 * config.sample_rate as f64 / config.window_samples as f64 / 1e9,
    })
}

pub fn count_params(config: &ModelConfig) -> Result<u64> {
    Ok(layer_costs(config)?.iter().map(|l| l.params).sum())
}

/// `a.total_macs / b.total_macs`.
pub fn compare(a: &CostReport, b: &CostReport) -> Result<f64> {
    if b.total_macs == 0.0 {
        return Err(Error::InvalidArgument("cannot compare against a report with zero MACs".into()));
    }
    Ok(a.total_macs / b.total_macs)
}
