use std::collections::HashMap;
use std::path::Path;

use super::config::ModelConfig;
use crate::container::{self, Reader, Tensor, Writer};
use crate::error::{Error, Result};
use crate::flow::{FlowStep, InvertiblePointwise, WnVariant, WnWeights};
use crate::linalg;
use crate::rng::GaussianStream;
use crate::tensor::ConvTranspose1d;

const MAGIC: &[u8; 4] = b"SQZW";

/// Controls for [`Model::random_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitOptions {
    /// Standard deviation of every convolution weight except `end`.
    pub conv_std: f32,
    /// Standard deviation of the `end` weights, which produce `(log s, t)`.
    /// Kept small so that 256-wide networks stay well conditioned over twelve
    /// flows; at 0.05 their `log s` reaches an RMS of about 1 per flow.
    pub end_std: f32,
    /// Each 1x1 matrix is a random rotation plus this times a Gaussian matrix;
    /// zero keeps it orthogonal.
    pub mixing_jitter: f32,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            conv_std: 0.05,
            end_std: 0.01,
            mixing_jitter: 0.0,
        }
    }
}

/// A config plus all weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    /// Present for the WaveGlow variant only.
    upsampler: Option<ConvTranspose1d>,
    flows: Vec<FlowStep>,
}

impl Model {
    /// Checks every shape against `config`.
    pub fn new(config: ModelConfig, upsampler: Option<ConvTranspose1d>, flows: Vec<FlowStep>) -> Result<Self> {
        config.validate()?;
        match (&upsampler, config.variant) {
            (Some(u), WnVariant::WaveGlow) => {
                u.check()?;
                let expected = (config.n_mels, config.n_mels, config.upsample_kernel(), config.hop);
                if (u.in_channels, u.out_channels, u.kernel_size, u.stride) != expected {
                    return Err(Error::Shape(format!(
                        "upsampler is {}->{} K={} stride {}, expected {expected:?}",
                        u.in_channels, u.out_channels, u.kernel_size, u.stride
                    )));
                }
            }
            (None, WnVariant::SqueezeWave) => {}
            (Some(_), _) => return Err(Error::Shape("only the WaveGlow variant has an upsampler".into())),
            (None, _) => return Err(Error::Shape("the WaveGlow variant needs an upsampler".into())),
        }
        if flows.len() != config.n_flows {
            return Err(Error::Shape(format!("{} flows for n_flows = {}", flows.len(), config.n_flows)));
        }
        for (k, (step, c)) in flows.iter().zip(config.flow_channels()).enumerate() {
            if step.channels() != c || *step.wn.shape() != config.wn_shape(c) {
                return Err(Error::Shape(format!(
                    "flow {k} has {} channels / WN {:?}, expected {c} / {:?}",
                    step.channels(),
                    step.wn.shape(),
                    config.wn_shape(c)
                )));
            }
        }
        Ok(Self {
            config,
            upsampler,
            flows,
        })
    }

    fn zero_upsampler(config: &ModelConfig) -> Option<ConvTranspose1d> {
        (config.variant == WnVariant::WaveGlow)
            .then(|| ConvTranspose1d::zeros(config.n_mels, config.n_mels, config.upsample_kernel(), config.hop))
    }

    /// Identity 1x1 matrices and all-zero networks: every flow is the identity.
    pub fn identity(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let flows = config
            .flow_channels()
            .into_iter()
            .map(|c| FlowStep::new(InvertiblePointwise::identity(c), WnWeights::zeros(config.wn_shape(c))?))
            .collect::<Result<_>>()?;
        Self::new(config, Self::zero_upsampler(&config), flows)
    }

    /// Seeded random weights with the default [`InitOptions`]: rotations for
    /// the 1x1 matrices, `N(0, 0.05^2)` convolution weights (`N(0, 0.01^2)`
    /// for `end`), zero biases.
    pub fn random(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::random_with(config, seed, InitOptions::default())
    }

    pub fn random_with(config: ModelConfig, seed: u64, opts: InitOptions) -> Result<Self> {
        config.validate()?;
        let root = GaussianStream::new(seed);
        let upsampler = Self::zero_upsampler(&config).map(|mut u| {
            root.substream(0).fill(0, opts.conv_std as f64, &mut u.weight);
            u
        });
        let flows = config
            .flow_channels()
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                let s = root.substream(k as u64 + 1);
                let mut w: Vec<f32> = linalg::random_rotation(c, &s.substream(0))
                    .into_iter()
                    .map(|v| v as f32)
                    .collect();
                if opts.mixing_jitter != 0.0 {
                    let j = s.substream(2);
                    for (i, v) in w.iter_mut().enumerate() {
                        *v += opts.mixing_jitter * j.normal(i as u64) as f32;
                    }
                }
                FlowStep::new(
                    InvertiblePointwise::new(c, w)?,
                    WnWeights::random(config.wn_shape(c), &s.substream(1), opts.conv_std, opts.end_std)?,
                )
            })
            .collect::<Result<_>>()?;
        Self::new(config, upsampler, flows)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn flows(&self) -> &[FlowStep] {
        &self.flows
    }

    pub fn upsampler(&self) -> Option<&ConvTranspose1d> {
        self.upsampler.as_ref()
    }

    pub fn param_count(&self) -> usize {
        self.upsampler.as_ref().map_or(0, |u| u.param_count())
            + self.flows.iter().map(|f| f.param_count()).sum::<usize>()
    }

    /// Every weight tensor under its canonical name, in canonical order.
    pub fn tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        if let Some(u) = &self.upsampler {
            out.push(Tensor {
                name: "upsample.weight".into(),
                dims: vec![u.in_channels, u.out_channels, u.kernel_size],
                data: u.weight.clone(),
            });
            out.push(Tensor {
                name: "upsample.bias".into(),
                dims: vec![u.out_channels],
                data: u.bias.clone(),
            });
        }
        for (i, step) in self.flows.iter().enumerate() {
            let c = step.channels();
            out.push(Tensor {
                name: format!("flow{i}.inv1x1.W"),
                dims: vec![c, c],
                data: step.inv.weight().to_vec(),
            });
            for (layer, conv) in step.wn.layers() {
                let spec = conv.spec();
                for (suffix, data) in conv.weights().tensors() {
                    let dims = match suffix {
                        "weight" => vec![spec.out_channels, spec.in_channels, spec.kernel_size],
                        "dw_weight" => vec![spec.in_channels, spec.kernel_size],
                        "pw_weight" => vec![spec.out_channels, spec.in_channels],
                        _ => vec![data.len()],
                    };
                    out.push(Tensor {
                        name: format!("flow{i}.wn.{layer}.{suffix}"),
                        dims,
                        data: data.to_vec(),
                    });
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let c = &self.config;
        let mut w = Writer::new(MAGIC);
        for (name, v) in [
            ("sample_rate", c.sample_rate),
            ("group_size", c.group_size),
            ("n_flows", c.n_flows),
            ("n_early_every", c.n_early_every),
            ("n_early_size", c.n_early_size),
            ("wn_layers", c.wn_layers),
            ("wn_width", c.wn_width),
            ("wn_kernel", c.wn_kernel),
        ] {
            w.u32(container::checked_u32(v, name)?);
        }
        w.u8(match c.variant {
            WnVariant::WaveGlow => 0,
            WnVariant::SqueezeWave => 1,
        });
        w.u8(c.cond_before_upsample as u8);
        for (name, v) in [("n_mels", c.n_mels), ("hop", c.hop), ("window_samples", c.window_samples)] {
            w.u32(container::checked_u32(v, name)?);
        }
        w.finish(&self.tensors())
    }

    /// Parses a model file, validating the schema, every shape and the
    /// invertibility of each 1x1 matrix.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, MAGIC)?;
        let mut next = || r.u32().map(|v| v as usize);
        let (sample_rate, group_size, n_flows, n_early_every, n_early_size, wn_layers, wn_width, wn_kernel) =
            (next()?, next()?, next()?, next()?, next()?, next()?, next()?, next()?);
        let variant = match r.u8()? {
            0 => WnVariant::WaveGlow,
            1 => WnVariant::SqueezeWave,
            v => return Err(Error::Schema(format!("unknown variant tag {v}"))),
        };
        let cond_before_upsample = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(Error::Schema(format!("invalid cond_before_upsample flag {v}"))),
        };
        let (n_mels, hop, window_samples) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let config = ModelConfig {
            sample_rate,
            group_size,
            n_flows,
            n_early_every,
            n_early_size,
            wn_layers,
            wn_width,
            wn_kernel,
            variant,
            cond_before_upsample,
            n_mels,
            hop,
            window_samples,
        };
        config.validate()?;
        let mut found: HashMap<String, Tensor> = r.tensors()?.into_iter().map(|t| (t.name.clone(), t)).collect();

        let template = Self::identity(config)?;
        let expected = template.tensors();
        for t in &expected {
            let Some(got) = found.get(&t.name) else {
                return Err(Error::Schema(format!("missing tensor {}", t.name)));
            };
            if got.dims != t.dims {
                return Err(Error::Schema(format!(
                    "tensor {} has dims {:?}, expected {:?}",
                    t.name, got.dims, t.dims
                )));
            }
        }
        if found.len() != expected.len() {
            let mut unknown: Vec<&String> = found
                .keys()
                .filter(|k| !expected.iter().any(|t| &t.name == *k))
                .collect();
            unknown.sort();
            return Err(Error::Schema(format!("unknown tensor {}", unknown[0])));
        }

        let mut take = |name: &str| found.remove(name).expect("presence checked").data;
        let mut model = template;
        if let Some(u) = &mut model.upsampler {
            u.weight = take("upsample.weight");
            u.bias = take("upsample.bias");
        }
        for (i, step) in model.flows.iter_mut().enumerate() {
            let c = step.channels();
            step.inv = InvertiblePointwise::new(c, take(&format!("flow{i}.inv1x1.W")))
                .map_err(|e| match e {
                    Error::Singular(m) => Error::Singular(format!("flow{i}.inv1x1.W: {m}")),
                    other => other,
                })?;
            for (layer, conv) in step.wn.layers_mut() {
                for (suffix, data) in conv.weights_mut().tensors_mut() {
                    *data = take(&format!("flow{i}.wn.{layer}.{suffix}"));
                }
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    Model::load(path)
}
