use super::FeatureMap;
use crate::error::{shape_err, Result};

/// Repeats every frame `ceil(target / length)` times, then truncates to
/// exactly `target_length` frames.
pub fn upsample_nearest(input: &FeatureMap, target_length: usize) -> Result<FeatureMap> {
    let length = input.length();
    if target_length < length {
        return Err(shape_err!(
            "cannot upsample {length} frames down to {target_length}"
        ));
    }
    if target_length == length {
        return Ok(input.clone());
    }
    let factor = target_length.div_ceil(length);
    Ok(FeatureMap::from_fn(input.channels(), target_length, |c, t| {
        input.get(c, t / factor)
    }))
}

/// WaveNet gate: `tanh(a) * sigmoid(b)`, element-wise.
pub fn gated_activation(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    if a.shape() != b.shape() {
        return Err(shape_err!(
            "gate inputs differ in shape: {:?} vs {:?}",
            a.shape(),
            b.shape()
        ));
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x.tanh() * sigmoid(y))
        .collect();
    FeatureMap::from_vec(a.channels(), a.length(), data)
}

#[inline]
pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}
