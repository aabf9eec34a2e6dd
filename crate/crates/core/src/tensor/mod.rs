//! Minimal 1-D neural-network kernels.
//!
//! Everything operates on [`FeatureMap`], a `channels x length` array of `f32`
//! stored channel-major. Convolutions accumulate in `f64` and round once on
//! store.

mod conv;
mod gemm;
pub mod macs;
mod ops;

use std::ops::Range;

pub use conv::{
    conv1d, depthwise_separable_conv1d, Conv1d, ConvSpec, ConvTranspose1d, ConvWeights,
};
pub use ops::{gated_activation, upsample_nearest};
pub(crate) use gemm::matmul as matmul_f64;

use crate::error::{shape_err, Result};

/// A `channels x length` array of 32-bit floats; element `(c, t)` lives at
/// `c * length + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    length: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, length: usize) -> Self {
        Self {
            channels,
            length,
            data: vec![0.0; channels * length],
        }
    }

    pub fn from_vec(channels: usize, length: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(shape_err!("feature map must be non-empty, got {channels}x{length}"));
        }
        if data.len() != channels * length {
            return Err(shape_err!(
                "{} values cannot fill a {channels}x{length} feature map",
                data.len()
            ));
        }
        Ok(Self {
            channels,
            length,
            data,
        })
    }

    /// Builds a map from equally long rows, one per channel.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let length = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != length) {
            return Err(shape_err!("ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::from_vec(rows.len(), length, data)
    }

    pub fn from_fn(channels: usize, length: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(channels * length);
        for c in 0..channels {
            for t in 0..length {
                data.push(f(c, t));
            }
        }
        Self {
            channels,
            length,
            data,
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn length(&self) -> usize {
        self.length
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> f32 {
        self.data[c * self.length + t]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, v: f32) {
        self.data[c * self.length + t] = v;
    }

    #[inline]
    pub fn row(&self, c: usize) -> &[f32] {
        &self.data[c * self.length..(c + 1) * self.length]
    }

    #[inline]
    pub fn row_mut(&mut self, c: usize) -> &mut [f32] {
        &mut self.data[c * self.length..(c + 1) * self.length]
    }

    /// Copies out channels `range`.
    pub fn slice_channels(&self, range: Range<usize>) -> Result<FeatureMap> {
        if range.start >= range.end || range.end > self.channels {
            return Err(shape_err!(
                "channel range {range:?} out of bounds for {} channels",
                self.channels
            ));
        }
        let data = self.data[range.start * self.length..range.end * self.length].to_vec();
        Ok(FeatureMap {
            channels: range.len(),
            length: self.length,
            data,
        })
    }

    /// Copies out time steps `range` of every channel.
    pub fn slice_time(&self, range: Range<usize>) -> Result<FeatureMap> {
        if range.start >= range.end || range.end > self.length {
            return Err(shape_err!(
                "time range {range:?} out of bounds for length {}",
                self.length
            ));
        }
        let mut data = Vec::with_capacity(self.channels * range.len());
        for c in 0..self.channels {
            data.extend_from_slice(&self.row(c)[range.clone()]);
        }
        Ok(FeatureMap {
            channels: self.channels,
            length: range.len(),
            data,
        })
    }

    /// Stacks maps of equal length along the channel axis.
    pub fn concat_channels(parts: &[&FeatureMap]) -> Result<FeatureMap> {
        let Some(first) = parts.first() else {
            return Err(shape_err!("nothing to concatenate"));
        };
        let length = first.length;
        if parts.iter().any(|p| p.length != length) {
            return Err(shape_err!("cannot concatenate channels of unequal length"));
        }
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(channels * length);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(FeatureMap {
            channels,
            length,
            data,
        })
    }

    /// Adds `other`'s channels `offset..offset + self.channels` into `self`.
    pub fn add_channels_from(&mut self, other: &FeatureMap, offset: usize) -> Result<()> {
        if other.length != self.length || offset + self.channels > other.channels {
            return Err(shape_err!(
                "cannot add channels {}..{} of a {}x{} map into a {}x{} map",
                offset,
                offset + self.channels,
                other.channels,
                other.length,
                self.channels,
                self.length
            ));
        }
        let src = &other.data[offset * self.length..(offset + self.channels) * self.length];
        for (d, s) in self.data.iter_mut().zip(src) {
            *d += *s;
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &FeatureMap) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape_err!(
                "cannot add {:?} to {:?}",
                other.shape(),
                self.shape()
            ));
        }
        for (d, s) in self.data.iter_mut().zip(&other.data) {
            *d += *s;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    /// Largest element-wise absolute difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &FeatureMap) -> f32 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f32, |m, (a, b)| m.max((a - b).abs()))
    }
}
