//! Log-mel analysis and pitch tracking.
//!
//! Frames are centred on multiples of the hop with reflect padding, so a
//! waveform of `n` samples yields `n / hop + 1` frames. Mel energies are
//! natural-log power on an HTK mel filterbank, floored at `log_floor`.

mod mel;
mod pitch;

pub use mel::{log_mel, mel_spectrogram, MelExtractor, MelSpectrogram};
pub use pitch::{estimate_f0, PitchConfig, PitchTrack};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct StftConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub win: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl StftConfig {
    /// 8 kHz, small enough for desk-scale runs.
    pub fn desk() -> Self {
        StftConfig {
            sample_rate: 8000,
            n_fft: 512,
            hop: 100,
            win: 400,
            n_mels: 40,
            fmin: 0.0,
            fmax: 4000.0,
            log_floor: 1e-5,
        }
    }

    /// 24 kHz analysis.
    pub fn paper() -> Self {
        StftConfig {
            sample_rate: 24000,
            n_fft: 2048,
            hop: 300,
            win: 1200,
            n_mels: 80,
            fmin: 0.0,
            fmax: 12000.0,
            log_floor: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("dsp: {m}")));
        if !self.n_fft.is_power_of_two() {
            return fail(format!("n_fft {} is not a power of two", self.n_fft));
        }
        if !(self.hop >= 1 && self.hop <= self.win && self.win <= self.n_fft) {
            return fail(format!(
                "need 1 <= hop <= win <= n_fft, got {} {} {}",
                self.hop, self.win, self.n_fft
            ));
        }
        if self.n_mels == 0 {
            return fail("n_mels must be positive".into());
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= f64::from(self.sample_rate) / 2.0) {
            return fail(format!("need 0 <= fmin < fmax <= sr/2, got {} {}", self.fmin, self.fmax));
        }
        if !(self.log_floor > 0.0) {
            return fail("log_floor must be positive".into());
        }
        Ok(())
    }

    pub fn frame_period(&self) -> f64 {
        self.hop as f64 / f64::from(self.sample_rate)
    }

    pub fn n_frames(&self, len: usize) -> usize {
        len / self.hop + 1
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// `n_mels + 2` filter edge frequencies, evenly spaced on the mel scale.
pub fn mel_band_edges(cfg: &StftConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect()
}
