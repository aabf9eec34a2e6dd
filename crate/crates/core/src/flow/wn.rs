use crate::error::{shape_err, Error, Result};
use crate::rng::GaussianStream;
use crate::tensor::{gated_activation, Conv1d, ConvSpec, ConvWeights, FeatureMap};

/// Which WN topology a flow step uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WnVariant {
    /// Dense dilated `in_layer`s (dilation `2^i`); `res_skip` splits into a
    /// residual half and a skip half.
    WaveGlow,
    /// Depthwise-separable undilated `in_layer`s; a single merged `res_skip`
    /// output of `W` channels feeds both the residual and the skip path.
    SqueezeWave,
}

impl WnVariant {
    pub fn name(&self) -> &'static str {
        match self {
            WnVariant::WaveGlow => "waveglow",
            WnVariant::SqueezeWave => "squeezewave",
        }
    }
}

impl std::str::FromStr for WnVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "waveglow" => Ok(WnVariant::WaveGlow),
            "squeezewave" => Ok(WnVariant::SqueezeWave),
            other => Err(Error::Config(format!("unknown WN variant {other:?}"))),
        }
    }
}

/// Everything that determines the layer shapes of one WN network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WnShape {
    pub variant: WnVariant,
    /// `c_flow / 2`: channels of `x_a` and of each of `log_s`, `t`.
    pub half_channels: usize,
    pub width: usize,
    pub n_layers: usize,
    pub kernel_size: usize,
    /// Input channels of `cond_layer`.
    pub cond_channels: usize,
}

impl WnShape {
    pub fn validate(&self) -> Result<()> {
        if self.half_channels == 0 || self.width == 0 || self.n_layers == 0 || self.cond_channels == 0 {
            return Err(Error::Config(format!("degenerate WN shape {self:?}")));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!("WN kernel size must be odd, got {}", self.kernel_size)));
        }
        Ok(())
    }

    pub fn start_spec(&self) -> ConvSpec {
        ConvSpec::pointwise(self.half_channels, self.width)
    }

    pub fn dilation(&self, layer: usize) -> usize {
        match self.variant {
            WnVariant::WaveGlow => 1 << layer,
            WnVariant::SqueezeWave => 1,
        }
    }

    pub fn in_spec(&self, layer: usize) -> ConvSpec {
        let (w, k, d) = (self.width, self.kernel_size, self.dilation(layer));
        match self.variant {
            WnVariant::WaveGlow => ConvSpec::dense(w, 2 * w, k, d),
            WnVariant::SqueezeWave => ConvSpec::separable(w, 2 * w, k, d),
        }
    }

    pub fn cond_spec(&self) -> ConvSpec {
        ConvSpec::pointwise(self.cond_channels, 2 * self.width * self.n_layers)
    }

    pub fn res_skip_channels(&self, layer: usize) -> usize {
        match self.variant {
            WnVariant::WaveGlow if layer + 1 < self.n_layers => 2 * self.width,
            _ => self.width,
        }
    }

    pub fn res_skip_spec(&self, layer: usize) -> ConvSpec {
        ConvSpec::pointwise(self.width, self.res_skip_channels(layer))
    }

    pub fn end_spec(&self) -> ConvSpec {
        ConvSpec::pointwise(self.width, 2 * self.half_channels)
    }
}

/// Weights of one WN network.
#[derive(Clone, Debug, PartialEq)]
pub struct WnWeights {
    shape: WnShape,
    pub(crate) start: Conv1d,
    pub(crate) in_layers: Vec<Conv1d>,
    pub(crate) cond_layer: Conv1d,
    pub(crate) res_skip_layers: Vec<Conv1d>,
    pub(crate) end: Conv1d,
}

impl WnWeights {
    /// Assembles a network, checking every tensor against `shape`.
    pub fn new(
        shape: WnShape,
        start: ConvWeights,
        in_layers: Vec<ConvWeights>,
        cond_layer: ConvWeights,
        res_skip_layers: Vec<ConvWeights>,
        end: ConvWeights,
    ) -> Result<Self> {
        shape.validate()?;
        if in_layers.len() != shape.n_layers || res_skip_layers.len() != shape.n_layers {
            return Err(shape_err!(
                "expected {} in/res_skip layers, got {}/{}",
                shape.n_layers,
                in_layers.len(),
                res_skip_layers.len()
            ));
        }
        let tag = |what: String| move |e: Error| Error::Shape(format!("{what}: {e}"));
        Ok(Self {
            start: Conv1d::new(shape.start_spec(), start).map_err(tag("start".into()))?,
            in_layers: in_layers
                .into_iter()
                .enumerate()
                .map(|(i, w)| Conv1d::new(shape.in_spec(i), w).map_err(tag(format!("in{i}"))))
                .collect::<Result<_>>()?,
            cond_layer: Conv1d::new(shape.cond_spec(), cond_layer).map_err(tag("cond".into()))?,
            res_skip_layers: res_skip_layers
                .into_iter()
                .enumerate()
                .map(|(i, w)| Conv1d::new(shape.res_skip_spec(i), w).map_err(tag(format!("res_skip{i}"))))
                .collect::<Result<_>>()?,
            end: Conv1d::new(shape.end_spec(), end).map_err(tag("end".into()))?,
            shape,
        })
    }

    /// All-zero network: yields `log_s = 0, t = 0`, i.e. an identity coupling.
    pub fn zeros(shape: WnShape) -> Result<Self> {
        Self::new(
            shape,
            ConvWeights::zeros(&shape.start_spec()),
            (0..shape.n_layers).map(|i| ConvWeights::zeros(&shape.in_spec(i))).collect(),
            ConvWeights::zeros(&shape.cond_spec()),
            (0..shape.n_layers).map(|i| ConvWeights::zeros(&shape.res_skip_spec(i))).collect(),
            ConvWeights::zeros(&shape.end_spec()),
        )
    }

    /// Conv weights i.i.d. `N(0, std^2)` except `end`, which uses `end_std`;
    /// each tensor comes from its own substream (numbered in canonical
    /// order). Biases are zero.
    pub fn random(shape: WnShape, stream: &GaussianStream, std: f32, end_std: f32) -> Result<Self> {
        let mut w = Self::zeros(shape)?;
        let mut index = 0u64;
        for (layer_name, layer) in w.layers_mut() {
            let sigma = if layer_name == "end" { end_std } else { std };
            for (name, t) in layer.weights_mut().tensors_mut() {
                if !name.ends_with("bias") {
                    stream.substream(index).fill(0, sigma as f64, t);
                }
                index += 1;
            }
        }
        Ok(w)
    }

    pub fn shape(&self) -> &WnShape {
        &self.shape
    }

    pub fn variant(&self) -> WnVariant {
        self.shape.variant
    }

    /// Layers in canonical order with their names relative to `wn.`.
    pub fn layers(&self) -> Vec<(String, &Conv1d)> {
        let mut v = vec![("start".to_string(), &self.start)];
        v.extend(self.in_layers.iter().enumerate().map(|(i, l)| (format!("in{i}"), l)));
        v.push(("cond".to_string(), &self.cond_layer));
        v.extend(self.res_skip_layers.iter().enumerate().map(|(i, l)| (format!("res_skip{i}"), l)));
        v.push(("end".to_string(), &self.end));
        v
    }

    pub fn layers_mut(&mut self) -> Vec<(String, &mut Conv1d)> {
        let mut v = vec![("start".to_string(), &mut self.start)];
        v.extend(self.in_layers.iter_mut().enumerate().map(|(i, l)| (format!("in{i}"), l)));
        v.push(("cond".to_string(), &mut self.cond_layer));
        v.extend(self.res_skip_layers.iter_mut().enumerate().map(|(i, l)| (format!("res_skip{i}"), l)));
        v.push(("end".to_string(), &mut self.end));
        v
    }

    pub fn cond_layer(&self) -> &Conv1d {
        &self.cond_layer
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(_, l)| l.weights().param_count()).sum()
    }
}

/// `(log s, t)` produced by a WN network; both are `c_flow/2 x L`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingCoeffs {
    pub log_s: FeatureMap,
    pub t: FeatureMap,
}

/// WN with raw conditioning: `cond_layer` is applied to `mel` here.
/// `mel` must already be aligned to `x_a`'s length.
pub fn wn(x_a: &FeatureMap, mel: &FeatureMap, weights: &WnWeights) -> Result<CouplingCoeffs> {
    if mel.length() != x_a.length() {
        return Err(shape_err!(
            "conditioning length {} does not match x_a length {}",
            mel.length(),
            x_a.length()
        ));
    }
    let cond = weights.cond_layer.forward(mel)?;
    wn_projected(x_a, &cond, weights)
}

/// WN with conditioning that has already been through `cond_layer`
/// (`2 W n_layers` channels, one `2W` slice per layer).
pub fn wn_projected(x_a: &FeatureMap, cond: &FeatureMap, weights: &WnWeights) -> Result<CouplingCoeffs> {
    let s = &weights.shape;
    if x_a.channels() != s.half_channels {
        return Err(shape_err!(
            "WN expects {} input channels, got {}",
            s.half_channels,
            x_a.channels()
        ));
    }
    if cond.channels() != 2 * s.width * s.n_layers || cond.length() != x_a.length() {
        return Err(shape_err!(
            "projected conditioning is {:?}, expected ({}, {})",
            cond.shape(),
            2 * s.width * s.n_layers,
            x_a.length()
        ));
    }
    let w = s.width;
    let mut h = weights.start.forward(x_a)?;
    let mut skip = FeatureMap::zeros(w, x_a.length());
    for i in 0..s.n_layers {
        let mut acts = weights.in_layers[i].forward(&h)?;
        acts.add_channels_from(cond, i * 2 * w)?;
        let gated = gated_activation(&acts.slice_channels(0..w)?, &acts.slice_channels(w..2 * w)?)?;
        let r = weights.res_skip_layers[i].forward(&gated)?;
        let last = i + 1 == s.n_layers;
        match s.variant {
            WnVariant::WaveGlow if !last => {
                h.add_channels_from(&r, 0)?;
                skip.add_channels_from(&r, w)?;
            }
            WnVariant::SqueezeWave if !last => {
                h.add_assign(&r)?;
                skip.add_assign(&r)?;
            }
            _ => skip.add_assign(&r)?,
        }
    }
    let out = weights.end.forward(&skip)?;
    let half = s.half_channels;
    Ok(CouplingCoeffs {
        log_s: out.slice_channels(0..half)?,
        t: out.slice_channels(half..2 * half)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(variant: WnVariant) -> WnShape {
        WnShape {
            variant,
            half_channels: 2,
            width: 8,
            n_layers: 2,
            kernel_size: 3,
            cond_channels: 3,
        }
    }

    fn random_weights(shape: WnShape, seed: u64, std: f32) -> WnWeights {
        let mut w = WnWeights::zeros(shape).unwrap();
        let g = GaussianStream::new(seed);
        for (j, (_, layer)) in w.layers_mut().into_iter().enumerate() {
            for (k, (_, t)) in layer.weights_mut().tensors_mut().into_iter().enumerate() {
                let s = g.substream((j * 8 + k) as u64);
                for (i, v) in t.iter_mut().enumerate() {
                    *v = std * s.normal(i as u64) as f32;
                }
            }
        }
        w
    }

    #[test]
    fn zero_network_gives_identity_coefficients() {
        for v in [WnVariant::WaveGlow, WnVariant::SqueezeWave] {
            let w = WnWeights::zeros(shape(v)).unwrap();
            let x = FeatureMap::from_fn(2, 5, |c, t| (c + t) as f32);
            let mel = FeatureMap::from_fn(3, 5, |c, t| (c * t) as f32);
            let out = wn(&x, &mel, &w).unwrap();
            assert!(out.log_s.data().iter().chain(out.t.data()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn res_skip_width_halves_in_squeezewave() {
        let wg = shape(WnVariant::WaveGlow);
        let sw = shape(WnVariant::SqueezeWave);
        for i in 0..wg.n_layers - 1 {
            assert_eq!(2 * sw.res_skip_channels(i), wg.res_skip_channels(i));
        }
        assert!(sw.in_spec(0).separable && sw.in_spec(1).dilation == 1);
        assert!(!wg.in_spec(0).separable);
        assert_eq!(wg.in_spec(3).dilation, 8);
    }

    /// Index of the last position influenced by a delta at the origin.
    fn reach(v: WnVariant, layers: usize) -> usize {
        let s = WnShape {
            n_layers: layers,
            ..shape(v)
        };
        let w = random_weights(s, 9, 0.5);
        let len = 64;
        let mut x = FeatureMap::zeros(2, len);
        x.set(0, 0, 1.0);
        let base = wn(&FeatureMap::zeros(2, len), &FeatureMap::zeros(3, len), &w).unwrap();
        let out = wn(&x, &FeatureMap::zeros(3, len), &w).unwrap();
        (0..len)
            .filter(|&t| (0..2).any(|c| out.t.get(c, t) != base.t.get(c, t)))
            .max()
            .unwrap()
    }

    #[test]
    fn receptive_field_reflects_dilation_schedule() {
        // Each k=3 layer with dilation d extends the reach by d.
        assert_eq!(reach(WnVariant::WaveGlow, 4), 1 + 2 + 4 + 8);
        assert_eq!(reach(WnVariant::SqueezeWave, 4), 4);
    }

    /// Straight-line loop nest with no layer abstractions.
    fn scalar_wn(x: &FeatureMap, mel: &FeatureMap, w: &WnWeights) -> (Vec<f64>, Vec<f64>) {
        let s = *w.shape();
        let (width, l) = (s.width, x.length());
        let dense = |layer: &Conv1d, inp: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            let spec = *layer.spec();
            let (k, d, p) = (spec.kernel_size as isize, spec.dilation as isize, spec.padding as isize);
            let mut out = vec![vec![0.0; l]; spec.out_channels];
            match layer.weights() {
                ConvWeights::Dense { weight, bias } => {
                    for o in 0..spec.out_channels {
                        for t in 0..l as isize {
                            let mut acc = bias[o] as f64;
                            for c in 0..spec.in_channels {
                                for kk in 0..k {
                                    let idx = t + kk * d - p;
                                    if idx >= 0 && idx < l as isize {
                                        acc += weight[(o * spec.in_channels + c) * k as usize + kk as usize] as f64
                                            * inp[c][idx as usize];
                                    }
                                }
                            }
                            out[o][t as usize] = acc;
                        }
                    }
                }
                ConvWeights::Separable { dw_weight, dw_bias, pw_weight, pw_bias } => {
                    let mut mid = vec![vec![0.0; l]; spec.in_channels];
                    for c in 0..spec.in_channels {
                        for t in 0..l as isize {
                            let mut acc = dw_bias[c] as f64;
                            for kk in 0..k {
                                let idx = t + kk * d - p;
                                if idx >= 0 && idx < l as isize {
                                    acc += dw_weight[c * k as usize + kk as usize] as f64 * inp[c][idx as usize];
                                }
                            }
                            mid[c][t as usize] = acc;
                        }
                    }
                    for o in 0..spec.out_channels {
                        for t in 0..l {
                            let mut acc = pw_bias[o] as f64;
                            for c in 0..spec.in_channels {
                                acc += pw_weight[o * spec.in_channels + c] as f64 * mid[c][t];
                            }
                            out[o][t] = acc;
                        }
                    }
                }
            }
            out
        };
        let rows = |m: &FeatureMap| -> Vec<Vec<f64>> {
            (0..m.channels()).map(|c| m.row(c).iter().map(|&v| v as f64).collect()).collect()
        };
        let mut h = dense(&w.start, &rows(x));
        let cond = dense(&w.cond_layer, &rows(mel));
        let mut skip = vec![vec![0.0; l]; width];
        for i in 0..s.n_layers {
            let a = dense(&w.in_layers[i], &h);
            let mut g = vec![vec![0.0; l]; width];
            for c in 0..width {
                for t in 0..l {
                    let za = a[c][t] + cond[i * 2 * width + c][t];
                    let zb = a[width + c][t] + cond[i * 2 * width + width + c][t];
                    g[c][t] = za.tanh() / (1.0 + (-zb).exp());
                }
            }
            let r = dense(&w.res_skip_layers[i], &g);
            for c in 0..width {
                for t in 0..l {
                    if i + 1 < s.n_layers {
                        match s.variant {
                            WnVariant::WaveGlow => {
                                h[c][t] += r[c][t];
                                skip[c][t] += r[width + c][t];
                            }
                            WnVariant::SqueezeWave => {
                                h[c][t] += r[c][t];
                                skip[c][t] += r[c][t];
                            }
                        }
                    } else {
                        skip[c][t] += r[c][t];
                    }
                }
            }
        }
        let out = dense(&w.end, &skip);
        let half = s.half_channels;
        (
            out[..half].iter().flatten().copied().collect(),
            out[half..].iter().flatten().copied().collect(),
        )
    }

    #[test]
    fn matches_scalar_loop_nest() {
        for (seed, v) in [(1, WnVariant::WaveGlow), (2, WnVariant::SqueezeWave), (3, WnVariant::WaveGlow)] {
            let s = shape(v);
            let w = random_weights(s, seed, 0.4);
            let g = GaussianStream::new(100 + seed);
            let x = FeatureMap::from_vec(2, 7, g.vec(0, 14, 1.0)).unwrap();
            let mel = FeatureMap::from_vec(3, 7, g.vec(100, 21, 1.0)).unwrap();
            let out = wn(&x, &mel, &w).unwrap();
            let (log_s, t) = scalar_wn(&x, &mel, &w);
            for (a, b) in out.log_s.data().iter().zip(&log_s).chain(out.t.data().iter().zip(&t)) {
                assert!((*a as f64 - b).abs() < 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_misaligned_inputs() {
        let w = WnWeights::zeros(shape(WnVariant::SqueezeWave)).unwrap();
        let x = FeatureMap::zeros(2, 5);
        assert!(wn(&x, &FeatureMap::zeros(3, 4), &w).is_err());
        assert!(wn(&FeatureMap::zeros(4, 5), &FeatureMap::zeros(3, 5), &w).is_err());
        assert!(wn(&x, &FeatureMap::zeros(2, 5), &w).is_err());
        let s = shape(WnVariant::WaveGlow);
        let bad_in = ConvWeights::zeros(&shape(WnVariant::SqueezeWave).in_spec(0));
        let err = WnWeights::new(
            s,
            ConvWeights::zeros(&s.start_spec()),
            vec![bad_in, ConvWeights::zeros(&s.in_spec(1))],
            ConvWeights::zeros(&s.cond_spec()),
            (0..2).map(|i| ConvWeights::zeros(&s.res_skip_spec(i))).collect(),
            ConvWeights::zeros(&s.end_spec()),
        );
        assert!(err.is_err());
    }
}
