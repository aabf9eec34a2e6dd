//! On-device inference for WaveGlow/SqueezeWave-family flow vocoders.
//!
//! The crate is layered bottom-up:
//!
//! - [`tensor`]: 1-D kernels (dense, dilated and depthwise-separable convolution,
//!   transposed convolution, nearest upsampling, gated activation) over [`FeatureMap`].
//! - [`flow`]: invertible 1x1 convolution, the WN coupling network in both variants,
//!   and the affine coupling transform.
//! - [`vocoder`]: model configs and presets, audio grouping, early outputs, the
//!   density (forward) and synthesis (inverse) passes, NLL, and the model file format.
//! - [`analyzer`]: the analytical MAC / parameter cost model.
//! - [`audio`]: WAV I/O and the log-mel front end.
//! - [`bench`] and [`verify`]: throughput measurement and invertibility checks.

pub mod analyzer;
pub mod audio;
pub mod bench;
pub mod container;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod rng;
pub mod tensor;
pub mod verify;
pub mod vocoder;

pub use error::{Error, Result};
pub use tensor::FeatureMap;
