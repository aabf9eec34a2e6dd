//! WAV I/O and the log-mel front end: centered 1024-point STFT with a
//! periodic Hann window and hop 256, magnitude spectrum, 80 Slaney-style
//! area-normalized mel bands over 0-8 kHz, and `ln(max(x, 1e-5))`.

mod fft;
mod mel;
mod wav;

pub use fft::{fft_in_place, rfft_magnitude};
pub use mel::{
    hann_window, hz_to_mel, load_mel, log_mel_from_magnitude, mel_band_edges, mel_filterbank, mel_from_bytes,
    mel_spectrogram, mel_spectrogram_with, mel_to_bytes, mel_to_hz, save_mel, stft_magnitude, MelParams,
};
pub use wav::{read_wav, write_wav, Waveform};
