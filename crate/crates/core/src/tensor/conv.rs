use super::gemm::{matmul, widen, Scratch};
use super::{macs, FeatureMap};
use crate::error::{shape_err, Error, Result};

/// Geometry of a 1-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub dilation: usize,
    pub padding: usize,
    pub separable: bool,
}

impl ConvSpec {
    /// Dense convolution with "same" padding `d * (K - 1) / 2`.
    pub fn dense(in_channels: usize, out_channels: usize, kernel_size: usize, dilation: usize) -> Self {
        Self {
            kernel_size,
            in_channels,
            out_channels,
            dilation,
            padding: dilation * kernel_size.saturating_sub(1) / 2,
            separable: false,
        }
    }

    /// Depthwise-separable convolution with "same" padding.
    pub fn separable(in_channels: usize, out_channels: usize, kernel_size: usize, dilation: usize) -> Self {
        Self {
            separable: true,
            ..Self::dense(in_channels, out_channels, kernel_size, dilation)
        }
    }

    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self::dense(in_channels, out_channels, 1, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(shape_err!("kernel size must be odd, got {}", self.kernel_size));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(shape_err!("convolution channels must be positive"));
        }
        if self.dilation == 0 {
            return Err(shape_err!("dilation must be >= 1"));
        }
        Ok(())
    }

    /// `L_out = L_in + 2p - d(K - 1)`, which must be at least 1.
    pub fn output_length(&self, input_length: usize) -> Result<usize> {
        let span = self.dilation * (self.kernel_size - 1);
        let padded = input_length + 2 * self.padding;
        if padded <= span {
            return Err(shape_err!(
                "input length {input_length} too short for kernel {} dilation {} padding {}",
                self.kernel_size,
                self.dilation,
                self.padding
            ));
        }
        Ok(padded - span)
    }

    /// Number of weight and bias elements.
    pub fn param_count(&self) -> usize {
        let (k, ci, co) = (self.kernel_size, self.in_channels, self.out_channels);
        if self.separable {
            k * ci + ci + co * ci + co
        } else {
            co * ci * k + co
        }
    }
}

/// Learned parameters of a convolution. Dense weights are `[C_out][C_in][K]`;
/// separable weights are a depthwise `[C_in][K]` stage and a pointwise
/// `[C_out][C_in]` stage, each with its own bias.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvWeights {
    Dense {
        weight: Vec<f32>,
        bias: Vec<f32>,
    },
    Separable {
        dw_weight: Vec<f32>,
        dw_bias: Vec<f32>,
        pw_weight: Vec<f32>,
        pw_bias: Vec<f32>,
    },
}

impl ConvWeights {
    pub fn zeros(spec: &ConvSpec) -> Self {
        let (k, ci, co) = (spec.kernel_size, spec.in_channels, spec.out_channels);
        if spec.separable {
            ConvWeights::Separable {
                dw_weight: vec![0.0; ci * k],
                dw_bias: vec![0.0; ci],
                pw_weight: vec![0.0; co * ci],
                pw_bias: vec![0.0; co],
            }
        } else {
            ConvWeights::Dense {
                weight: vec![0.0; co * ci * k],
                bias: vec![0.0; co],
            }
        }
    }

    /// Checks every tensor size against `spec`.
    pub fn check(&self, spec: &ConvSpec) -> Result<()> {
        let (k, ci, co) = (spec.kernel_size, spec.in_channels, spec.out_channels);
        let sizes: Vec<(&str, usize, usize)> = match (self, spec.separable) {
            (ConvWeights::Dense { weight, bias }, false) => {
                vec![("weight", weight.len(), co * ci * k), ("bias", bias.len(), co)]
            }
            (
                ConvWeights::Separable {
                    dw_weight,
                    dw_bias,
                    pw_weight,
                    pw_bias,
                },
                true,
            ) => vec![
                ("dw_weight", dw_weight.len(), ci * k),
                ("dw_bias", dw_bias.len(), ci),
                ("pw_weight", pw_weight.len(), co * ci),
                ("pw_bias", pw_bias.len(), co),
            ],
            (_, sep) => {
                return Err(shape_err!(
                    "weights are {} but spec is {}",
                    if sep { "dense" } else { "separable" },
                    if sep { "separable" } else { "dense" }
                ))
            }
        };
        for (name, got, want) in sizes {
            if got != want {
                return Err(shape_err!("{name} has {got} elements, expected {want}"));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Named tensors in canonical order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f32])> {
        match self {
            ConvWeights::Dense { weight, bias } => vec![("weight", weight), ("bias", bias)],
            ConvWeights::Separable {
                dw_weight,
                dw_bias,
                pw_weight,
                pw_bias,
            } => vec![
                ("dw_weight", dw_weight),
                ("dw_bias", dw_bias),
                ("pw_weight", pw_weight),
                ("pw_bias", pw_bias),
            ],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f32>)> {
        match self {
            ConvWeights::Dense { weight, bias } => vec![("weight", weight), ("bias", bias)],
            ConvWeights::Separable {
                dw_weight,
                dw_bias,
                pw_weight,
                pw_bias,
            } => vec![
                ("dw_weight", dw_weight),
                ("dw_bias", dw_bias),
                ("pw_weight", pw_weight),
                ("pw_bias", pw_bias),
            ],
        }
    }
}

/// A convolution layer: validated geometry plus weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    spec: ConvSpec,
    weights: ConvWeights,
}

impl Conv1d {
    pub fn new(spec: ConvSpec, weights: ConvWeights) -> Result<Self> {
        spec.validate()?;
        weights.check(&spec)?;
        Ok(Self { spec, weights })
    }

    pub fn zeros(spec: ConvSpec) -> Result<Self> {
        Self::new(spec, ConvWeights::zeros(&spec))
    }

    pub fn spec(&self) -> &ConvSpec {
        &self.spec
    }

    pub fn weights(&self) -> &ConvWeights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut ConvWeights {
        &mut self.weights
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<FeatureMap> {
        if self.spec.separable {
            depthwise_separable_conv1d(input, &self.spec, &self.weights)
        } else {
            conv1d(input, &self.spec, &self.weights)
        }
    }
}

fn check_input(input: &FeatureMap, spec: &ConvSpec) -> Result<usize> {
    spec.validate()?;
    if input.channels() != spec.in_channels {
        return Err(shape_err!(
            "convolution expects {} input channels, got {}",
            spec.in_channels,
            input.channels()
        ));
    }
    spec.output_length(input.length())
}

/// Dense (optionally dilated) convolution with zero padding:
/// `out(o, t) = bias(o) + sum_{c,k} w(o, c, k) * in_padded(c, t + k d)`.
pub fn conv1d(input: &FeatureMap, spec: &ConvSpec, weights: &ConvWeights) -> Result<FeatureMap> {
    let l_out = check_input(input, spec)?;
    if spec.separable {
        return Err(shape_err!("conv1d called with a separable spec"));
    }
    weights.check(spec)?;
    let ConvWeights::Dense { weight, bias } = weights else {
        unreachable!("checked above");
    };
    let (k, ci, co) = (spec.kernel_size, spec.in_channels, spec.out_channels);

    // im2col: row (c*K + k) holds in_padded(c, t + k*d) for t in 0..l_out,
    // matching the [C_out][C_in][K] weight layout read as C_out x (C_in*K).
    let cols = if k == 1 && spec.padding == 0 {
        widen(input.data())
    } else {
        im2col(input, spec, l_out)
    };
    let w = widen(weight);
    let mut out = Scratch::zeroed(co * l_out);
    matmul(co, ci * k, l_out, &w, &cols, &mut out);
    macs::record((k * ci * co * l_out) as u64);
    Ok(store(co, l_out, &out, bias))
}

/// Depthwise (per-channel temporal) convolution followed by a pointwise
/// channel mix. The intermediate stays in `f64`.
pub fn depthwise_separable_conv1d(
    input: &FeatureMap,
    spec: &ConvSpec,
    weights: &ConvWeights,
) -> Result<FeatureMap> {
    let l_out = check_input(input, spec)?;
    if !spec.separable {
        return Err(shape_err!("depthwise_separable_conv1d called with a dense spec"));
    }
    weights.check(spec)?;
    let ConvWeights::Separable {
        dw_weight,
        dw_bias,
        pw_weight,
        pw_bias,
    } = weights
    else {
        unreachable!("checked above");
    };
    let (k, ci, co) = (spec.kernel_size, spec.in_channels, spec.out_channels);
    let (d, p, l_in) = (spec.dilation, spec.padding as isize, input.length() as isize);

    let mut mid = Scratch::zeroed(ci * l_out);
    for c in 0..ci {
        let row = input.row(c);
        let taps = &dw_weight[c * k..(c + 1) * k];
        let dst = &mut mid[c * l_out..(c + 1) * l_out];
        dst.fill(dw_bias[c] as f64);
        for (kk, &w) in taps.iter().enumerate() {
            let w = w as f64;
            let shift = (kk * d) as isize - p;
            let (t0, t1) = valid_range(shift, l_in, l_out);
            for t in t0..t1 {
                dst[t] += w * row[(t as isize + shift) as usize] as f64;
            }
        }
    }
    macs::record((k * ci * l_out) as u64);

    let pw = widen(pw_weight);
    let mut out = Scratch::zeroed(co * l_out);
    matmul(co, ci, l_out, &pw, &mid, &mut out);
    macs::record((ci * co * l_out) as u64);
    Ok(store(co, l_out, &out, pw_bias))
}

/// Output positions `t` for which `t + shift` indexes inside `0..l_in`.
#[inline]
fn valid_range(shift: isize, l_in: isize, l_out: usize) -> (usize, usize) {
    let t0 = (-shift).clamp(0, l_out as isize) as usize;
    let t1 = (l_in - shift).clamp(0, l_out as isize) as usize;
    (t0, t1.max(t0))
}

fn im2col(input: &FeatureMap, spec: &ConvSpec, l_out: usize) -> Scratch {
    let (k, ci, d) = (spec.kernel_size, spec.in_channels, spec.dilation);
    let (p, l_in) = (spec.padding as isize, input.length() as isize);
    let mut cols = Scratch::zeroed(ci * k * l_out);
    for c in 0..ci {
        let row = input.row(c);
        for kk in 0..k {
            let dst = &mut cols[(c * k + kk) * l_out..(c * k + kk + 1) * l_out];
            let shift = (kk * d) as isize - p;
            let (t0, t1) = valid_range(shift, l_in, l_out);
            for t in t0..t1 {
                dst[t] = row[(t as isize + shift) as usize] as f64;
            }
        }
    }
    cols
}

fn store(channels: usize, length: usize, acc: &[f64], bias: &[f32]) -> FeatureMap {
    let mut data = Vec::with_capacity(channels * length);
    for (o, chunk) in acc.chunks_exact(length).enumerate() {
        let b = bias[o] as f64;
        data.extend(chunk.iter().map(|&v| (v + b) as f32));
    }
    FeatureMap::from_vec(channels, length, data).expect("sizes computed above")
}

/// Transposed convolution (`[C_in][C_out][K]` weights) used as a learned
/// upsampler: `out(o, s*stride + k) += w(c, o, k) * in(c, s)`; the output has
/// `(L_in - 1) * stride + K` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvTranspose1d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            weight: vec![0.0; in_channels * out_channels * kernel_size],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.kernel_size == 0 || self.stride == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Shape("transposed conv dimensions must be positive".into()));
        }
        if self.weight.len() != self.in_channels * self.out_channels * self.kernel_size {
            return Err(shape_err!("transposed conv weight has {} elements", self.weight.len()));
        }
        if self.bias.len() != self.out_channels {
            return Err(shape_err!("transposed conv bias has {} elements", self.bias.len()));
        }
        Ok(())
    }

    pub fn output_length(&self, input_length: usize) -> usize {
        (input_length - 1) * self.stride + self.kernel_size
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<FeatureMap> {
        self.check()?;
        if input.channels() != self.in_channels {
            return Err(shape_err!(
                "transposed conv expects {} channels, got {}",
                self.in_channels,
                input.channels()
            ));
        }
        let (ci, co, k, l_in) = (self.in_channels, self.out_channels, self.kernel_size, input.length());
        let l_out = self.output_length(l_in);

        // cols = W^T x: (C_out*K) x L_in, then scatter-add into the output.
        let mut wt = vec![0.0f64; co * k * ci];
        for c in 0..ci {
            for o in 0..co {
                for kk in 0..k {
                    wt[(o * k + kk) * ci + c] = self.weight[(c * co + o) * k + kk] as f64;
                }
            }
        }
        let x = widen(input.data());
        let mut cols = Scratch::zeroed(co * k * l_in);
        matmul(co * k, ci, l_in, &wt, &x, &mut cols);
        macs::record((ci * co * k * l_in) as u64);

        let mut acc = Scratch::zeroed(co * l_out);
        for o in 0..co {
            let dst = &mut acc[o * l_out..(o + 1) * l_out];
            for kk in 0..k {
                let src = &cols[(o * k + kk) * l_in..(o * k + kk + 1) * l_in];
                for (s, &v) in src.iter().enumerate() {
                    dst[s * self.stride + kk] += v;
                }
            }
        }
        Ok(store(co, l_out, &acc, &self.bias))
    }
}
