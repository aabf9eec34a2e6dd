use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::{WnShape, WnVariant};

/// Full architectural description of a vocoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub sample_rate: usize,
    /// `C_g`: audio samples folded into the channels of one time step.
    pub group_size: usize,
    pub n_flows: usize,
    /// Early outputs happen before flow `k` when `k > 0` and `k % n_early_every == 0`.
    pub n_early_every: usize,
    pub n_early_size: usize,
    pub wn_layers: usize,
    pub wn_width: usize,
    pub wn_kernel: usize,
    pub variant: WnVariant,
    /// SqueezeWave only: project the mel with `cond_layer` at frame rate, then
    /// upsample the result.
    pub cond_before_upsample: bool,
    pub n_mels: usize,
    pub hop: usize,
    /// Audio samples per independently processed window.
    pub window_samples: usize,
}

pub const DEFAULT_SAMPLE_RATE: usize = 22050;
pub const DEFAULT_N_MELS: usize = 80;
pub const DEFAULT_HOP: usize = 256;

/// Names accepted by [`ModelConfig::preset`].
pub const PRESET_NAMES: [&str; 5] = ["waveglow", "sw-128l", "sw-128s", "sw-64l", "sw-64s"];

impl ModelConfig {
    pub fn waveglow() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            group_size: 8,
            n_flows: 12,
            n_early_every: 4,
            n_early_size: 2,
            wn_layers: 8,
            wn_width: 256,
            wn_kernel: 3,
            variant: WnVariant::WaveGlow,
            cond_before_upsample: false,
            n_mels: DEFAULT_N_MELS,
            hop: DEFAULT_HOP,
            window_samples: 16000,
        }
    }

    fn squeezewave(group_size: usize, wn_width: usize) -> Self {
        Self {
            group_size,
            wn_width,
            n_early_every: 2,
            n_early_size: 16,
            variant: WnVariant::SqueezeWave,
            // With 128 steps per window the mel has half as many frames, so
            // projecting before upsampling halves the cond_layer cost.
            cond_before_upsample: group_size < DEFAULT_HOP,
            window_samples: 16384,
            ..Self::waveglow()
        }
    }

    /// Looks up a named preset; the error lists the valid names.
    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "waveglow" => Ok(Self::waveglow()),
            "sw-128l" => Ok(Self::squeezewave(128, 256)),
            "sw-128s" => Ok(Self::squeezewave(128, 128)),
            "sw-64l" => Ok(Self::squeezewave(256, 256)),
            "sw-64s" => Ok(Self::squeezewave(256, 128)),
            _ => Err(Error::Config(format!(
                "unknown preset {name:?}; valid presets: {}",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    /// Grouped time steps per window.
    pub fn steps_per_window(&self) -> usize {
        self.window_samples / self.group_size
    }

    /// Mel frames that cover `samples` audio samples.
    pub fn frames_for(&self, samples: usize) -> usize {
        samples.div_ceil(self.hop)
    }

    /// Whether channels are split off to the latent right before flow `k`.
    pub fn emits_before(&self, k: usize) -> bool {
        k > 0 && self.n_early_every > 0 && self.n_early_size > 0 && k % self.n_early_every == 0
    }

    /// Live channel count seen by each flow.
    pub fn flow_channels(&self) -> Vec<usize> {
        let mut c = self.group_size;
        (0..self.n_flows)
            .map(|k| {
                if self.emits_before(k) {
                    c = c.saturating_sub(self.n_early_size);
                }
                c
            })
            .collect()
    }

    /// Channel counts of the latent blocks: early outputs in emission order,
    /// then the channels left after the last flow.
    pub fn latent_blocks(&self) -> Vec<usize> {
        let mut blocks: Vec<usize> = (0..self.n_flows)
            .filter(|&k| self.emits_before(k))
            .map(|_| self.n_early_size)
            .collect();
        blocks.push(self.group_size - blocks.iter().sum::<usize>());
        blocks
    }

    /// Channels entering each `cond_layer`: the WaveGlow variant groups the
    /// sample-rate conditioning like the audio.
    pub fn cond_channels(&self) -> usize {
        match self.variant {
            WnVariant::WaveGlow => self.n_mels * self.group_size,
            WnVariant::SqueezeWave => self.n_mels,
        }
    }

    /// Kernel size of the WaveGlow transposed-convolution upsampler.
    pub fn upsample_kernel(&self) -> usize {
        4 * self.hop
    }

    pub fn wn_shape(&self, flow_channels: usize) -> WnShape {
        WnShape {
            variant: self.variant,
            half_channels: flow_channels / 2,
            width: self.wn_width,
            n_layers: self.wn_layers,
            kernel_size: self.wn_kernel,
            cond_channels: self.cond_channels(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("sample_rate", self.sample_rate),
            ("group_size", self.group_size),
            ("wn_layers", self.wn_layers),
            ("wn_width", self.wn_width),
            ("n_mels", self.n_mels),
            ("hop", self.hop),
            ("window_samples", self.window_samples),
        ] {
            if v == 0 {
                return err(format!("{name} must be positive"));
            }
        }
        if self.group_size % 2 != 0 {
            return err(format!("group_size must be even, got {}", self.group_size));
        }
        if self.wn_kernel % 2 == 0 {
            return err(format!("wn_kernel must be odd, got {}", self.wn_kernel));
        }
        if self.window_samples % self.group_size != 0 {
            return err(format!(
                "window_samples {} is not a multiple of group_size {}",
                self.window_samples, self.group_size
            ));
        }
        if self.n_early_size % 2 != 0 {
            return err(format!("n_early_size must be even, got {}", self.n_early_size));
        }
        let mut c = self.group_size;
        for k in 0..self.n_flows {
            if self.emits_before(k) {
                if c < 2 * self.n_early_size {
                    return err(format!(
                        "early output of {} channels before flow {k} leaves fewer than it removes ({c} live)",
                        self.n_early_size
                    ));
                }
                c -= self.n_early_size;
            }
        }
        match self.variant {
            WnVariant::WaveGlow => {
                if self.cond_before_upsample {
                    return err("the WaveGlow variant upsamples before cond_layer".into());
                }
            }
            WnVariant::SqueezeWave => {
                if self.window_samples % self.hop != 0 {
                    return err(format!(
                        "window_samples {} is not a whole number of {}-sample mel frames",
                        self.window_samples, self.hop
                    ));
                }
                if self.group_size > self.hop {
                    return err(format!(
                        "group_size {} exceeds hop {}: fewer steps than mel frames",
                        self.group_size, self.hop
                    ));
                }
            }
        }
        Ok(())
    }

    /// `key = value` lines, one per field, parseable by [`FromStr`].
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sample_rate = {}", self.sample_rate)?;
        writeln!(f, "group_size = {}", self.group_size)?;
        writeln!(f, "n_flows = {}", self.n_flows)?;
        writeln!(f, "n_early_every = {}", self.n_early_every)?;
        writeln!(f, "n_early_size = {}", self.n_early_size)?;
        writeln!(f, "wn_layers = {}", self.wn_layers)?;
        writeln!(f, "wn_width = {}", self.wn_width)?;
        writeln!(f, "wn_kernel = {}", self.wn_kernel)?;
        writeln!(f, "variant = {}", self.variant.name())?;
        writeln!(f, "cond_before_upsample = {}", self.cond_before_upsample)?;
        writeln!(f, "n_mels = {}", self.n_mels)?;
        writeln!(f, "hop = {}", self.hop)?;
        writeln!(f, "window_samples = {}", self.window_samples)
    }
}

/// Parses `key = value` lines. `#` starts a comment. `sample_rate`, `n_mels`,
/// `hop`, `window_samples` and `cond_before_upsample` are optional; the
/// window defaults to 16000 for the WaveGlow variant and 16384 otherwise.
impl FromStr for ModelConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        const FIELDS: [&str; 13] = [
            "sample_rate",
            "group_size",
            "n_flows",
            "n_early_every",
            "n_early_size",
            "wn_layers",
            "wn_width",
            "wn_kernel",
            "variant",
            "cond_before_upsample",
            "n_mels",
            "hop",
            "window_samples",
        ];
        let mut values = std::collections::BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim().to_string();
            if !FIELDS.contains(&k.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key {k}", n + 1)));
            }
            if values.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", n + 1)));
            }
        }
        let mut take = |key: &str| values.remove(key);
        let num = |key: &str, v: Option<String>| -> Result<Option<usize>> {
            v.map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {s:?}")))
            })
            .transpose()
        };
        let required = |key: &str, v: Option<usize>| v.ok_or_else(|| Error::Config(format!("missing key {key}")));

        let variant: WnVariant = take("variant")
            .ok_or_else(|| Error::Config("missing key variant".into()))?
            .parse()?;
        let cond_before_upsample = match take("cond_before_upsample").as_deref() {
            None | Some("false") | Some("0") => false,
            Some("true") | Some("1") => true,
            Some(other) => return Err(Error::Config(format!("cond_before_upsample: expected true/false, got {other:?}"))),
        };
        let default_window = match variant {
            WnVariant::WaveGlow => 16000,
            WnVariant::SqueezeWave => 16384,
        };
        let cfg = ModelConfig {
            sample_rate: num("sample_rate", take("sample_rate"))?.unwrap_or(DEFAULT_SAMPLE_RATE),
            group_size: required("group_size", num("group_size", take("group_size"))?)?,
            n_flows: required("n_flows", num("n_flows", take("n_flows"))?)?,
            n_early_every: required("n_early_every", num("n_early_every", take("n_early_every"))?)?,
            n_early_size: required("n_early_size", num("n_early_size", take("n_early_size"))?)?,
            wn_layers: required("wn_layers", num("wn_layers", take("wn_layers"))?)?,
            wn_width: required("wn_width", num("wn_width", take("wn_width"))?)?,
            wn_kernel: required("wn_kernel", num("wn_kernel", take("wn_kernel"))?)?,
            variant,
            cond_before_upsample,
            n_mels: num("n_mels", take("n_mels"))?.unwrap_or(DEFAULT_N_MELS),
            hop: num("hop", take("hop"))?.unwrap_or(DEFAULT_HOP),
            window_samples: num("window_samples", take("window_samples"))?.unwrap_or(default_window),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_roundtrip_through_text() {
        for name in PRESET_NAMES {
            let c = ModelConfig::preset(name).unwrap();
            c.validate().unwrap();
            assert_eq!(c.to_text().parse::<ModelConfig>().unwrap(), c, "{name}");
        }
        assert!(ModelConfig::preset("sw-32").unwrap_err().to_string().contains("sw-64s"));
    }

    #[test]
    fn waveglow_schedule() {
        let c = ModelConfig::waveglow();
        let live = c.flow_channels();
        assert_eq!(live, [8, 8, 8, 8, 6, 6, 6, 6, 4, 4, 4, 4]);
        assert!(c.emits_before(4) && c.emits_before(8) && !c.emits_before(0));
        assert_eq!(c.latent_blocks(), [2, 2, 4]);
        assert_eq!(c.steps_per_window(), 2000);
    }

    #[test]
    fn squeezewave_geometry() {
        let c = ModelConfig::preset("sw-64s").unwrap();
        assert_eq!((c.group_size, c.steps_per_window()), (256, 64));
        assert_eq!(c.window_samples / c.hop, 64);
        let c = ModelConfig::preset("sw-128l").unwrap();
        assert_eq!((c.group_size, c.steps_per_window(), c.wn_width), (128, 128, 256));
        assert_eq!(c.latent_blocks(), [16, 16, 16, 16, 16, 48]);
    }

    #[test]
    fn invalid_configs() {
        let base = ModelConfig::waveglow();
        for bad in [
            ModelConfig { group_size: 7, ..base },
            ModelConfig { wn_kernel: 4, ..base },
            ModelConfig { n_early_size: 4, ..base },
            ModelConfig { cond_before_upsample: true, ..base },
            ModelConfig { window_samples: 16001, ..base },
            ModelConfig { hop: 0, ..base },
            ModelConfig { variant: WnVariant::SqueezeWave, group_size: 512, window_samples: 16384, ..base },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn parser_defaults_comments_and_errors() {
        let text = "# tiny\ngroup_size = 4\nn_flows = 2\nn_early_every = 0 # none\nn_early_size = 0\n\
                    wn_layers = 1\nwn_width = 8\nwn_kernel = 3\nvariant = squeezewave\n";
        let c: ModelConfig = text.parse().unwrap();
        assert_eq!((c.sample_rate, c.n_mels, c.hop, c.window_samples), (22050, 80, 256, 16384));
        assert!(!c.cond_before_upsample);
        assert!(format!("{text}bogus = 1\n").parse::<ModelConfig>().is_err());
        assert!(text.replace("n_flows = 2\n", "").parse::<ModelConfig>().is_err());
        assert!(text.replace("= 2", "= two").parse::<ModelConfig>().is_err());
        assert!(format!("{text}n_flows = 3\n").parse::<ModelConfig>().is_err());
    }
}
