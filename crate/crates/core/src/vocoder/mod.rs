//! Complete vocoders: configs and presets, weights and the model file
//! format, and the density and synthesis passes.

mod config;
mod model;
mod pass;

pub use config::{ModelConfig, DEFAULT_HOP, DEFAULT_N_MELS, DEFAULT_SAMPLE_RATE, PRESET_NAMES};
pub use model::{load_model, save_model, InitOptions, Model};
pub use pass::{
    forward, group_audio, infer, infer_from_latent, infer_threads, nll, pad_frames, prepare_conditioning,
    sample_latent, ungroup_audio, Conditioning, LatentVector, MEL_FLOOR,
};
