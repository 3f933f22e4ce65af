//! Objective metrics: mel-cepstral distortion, log-F0 RMSE, voicing error
//! and semitone accuracy.

use std::f64::consts::{LN_10, PI};

use crate::dsp::{estimate_f0, MelExtractor, MelSpectrogram, PitchConfig, PitchTrack, StftConfig};
use crate::error::{Error, Result};

pub const MCD_ORDER: usize = 13;

/// `10 / ln 10 * sqrt(2)`, the per-frame MCD scale.
fn mcd_scale() -> f64 {
    10.0 / LN_10 * 2f64.sqrt()
}

/// Orthonormal DCT-II coefficients `c_1..=c_order` of one log-mel frame.
pub fn mel_cepstrum(log_mel: &[f64], order: usize) -> Vec<f64> {
    let n = log_mel.len() as f64;
    (1..=order)
        .map(|d| {
            let s: f64 = log_mel
                .iter()
                .enumerate()
                .map(|(i, x)| x * (PI * d as f64 * (i as f64 + 0.5) / n).cos())
                .sum();
            (2.0 / n).sqrt() * s
        })
        .collect()
}

/// Per-frame distortion between two cepstral vectors of equal length.
pub fn frame_distortion(a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    mcd_scale() * sq.sqrt()
}

/// Mean MCD over frame pairs of cepstra.
pub fn mcd_cepstra(reference: &[Vec<f64>], generated: &[Vec<f64>]) -> Result<f64> {
    if reference.is_empty() || reference.len() != generated.len() {
        return Err(Error::Metric(format!(
            "mcd needs equal, nonzero frame counts, got {} and {}",
            reference.len(),
            generated.len()
        )));
    }
    let total: f64 = reference.iter().zip(generated).map(|(a, b)| frame_distortion(a, b)).sum();
    Ok(total / reference.len() as f64)
}

/// MCD between two log-mel matrices.
pub fn mcd_mel(reference: &MelSpectrogram, generated: &MelSpectrogram, order: usize) -> Result<f64> {
    if reference.n_mels != generated.n_mels || order >= reference.n_mels {
        return Err(Error::Metric(format!(
            "mcd order {order} needs matching mel bins above it, got {} and {}",
            reference.n_mels, generated.n_mels
        )));
    }
    let cep = |m: &MelSpectrogram| (0..m.n_frames).map(|t| mel_cepstrum(m.frame(t), order)).collect::<Vec<_>>();
    mcd_cepstra(&cep(reference), &cep(generated))
}

/// MCD between two waveforms analysed with `stft`.
pub fn mcd(reference: &[f64], generated: &[f64], stft: &StftConfig, order: usize) -> Result<f64> {
    let ext = MelExtractor::new(stft)?;
    mcd_mel(&ext.compute(reference)?, &ext.compute(generated)?, order)
}

fn check_lengths(a: &PitchTrack, b: &PitchTrack) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!("track lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

fn both_voiced<'a>(a: &'a PitchTrack, b: &'a PitchTrack) -> impl Iterator<Item = (f64, f64)> + 'a {
    a.f0.iter()
        .zip(&a.voiced)
        .zip(b.f0.iter().zip(&b.voiced))
        .filter(|((_, va), (_, vb))| **va && **vb)
        .map(|((fa, _), (fb, _))| (*fa, *fb))
}

pub fn f0_rmse(reference: &PitchTrack, generated: &PitchTrack) -> Result<f64> {
    check_lengths(reference, generated)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (r, g) in both_voiced(reference, generated) {
        sum += (r.ln() - g.ln()).powi(2);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Metric("no mutually voiced frames".into()));
    }
    Ok((sum / n as f64).sqrt())
}

pub fn vuv_error(reference: &PitchTrack, generated: &PitchTrack) -> Result<f64> {
    check_lengths(reference, generated)?;
    if reference.is_empty() {
        return Err(Error::Metric("no frames".into()));
    }
    let diff = reference.voiced.iter().zip(&generated.voiced).filter(|(a, b)| a != b).count();
    Ok(diff as f64 / reference.len() as f64)
}

fn within_semitone(r: f64, g: f64) -> bool {
    (12.0 * (g / r).log2()).abs() < 0.5
}

pub fn semitone_accuracy(reference: &PitchTrack, generated: &PitchTrack) -> Result<f64> {
    check_lengths(reference, generated)?;
    let (mut hit, mut n) = (0usize, 0usize);
    for (r, g) in both_voiced(reference, generated) {
        hit += usize::from(within_semitone(r, g));
        n += 1;
    }
    if n == 0 {
        return Err(Error::Metric("no mutually voiced frames".into()));
    }
    Ok(hit as f64 / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub mcd: f64,
    /// Natural-log Hz.
    pub f0_rmse: f64,
    pub vuv_e: f64,
    pub sa: f64,
    pub n_frames: usize,
    pub n_voiced_both: usize,
}

/// Frame-pooled running sums; utterances contribute in proportion to length.
#[derive(Clone, Debug, Default)]
pub struct MetricAccumulator {
    mcd_sum: f64,
    frames: usize,
    log_sq_sum: f64,
    voiced_both: usize,
    vuv_diff: usize,
    vuv_frames: usize,
    semitone_hits: usize,
}

impl MetricAccumulator {
    pub fn add(
        &mut self,
        ref_mel: &MelSpectrogram,
        gen_mel: &MelSpectrogram,
        ref_f0: &PitchTrack,
        gen_f0: &PitchTrack,
    ) -> Result<()> {
        let mcd = mcd_mel(ref_mel, gen_mel, MCD_ORDER)?;
        check_lengths(ref_f0, gen_f0)?;
        self.mcd_sum += mcd * ref_mel.n_frames as f64;
        self.frames += ref_mel.n_frames;
        for (r, g) in both_voiced(ref_f0, gen_f0) {
            self.log_sq_sum += (r.ln() - g.ln()).powi(2);
            self.voiced_both += 1;
            self.semitone_hits += usize::from(within_semitone(r, g));
        }
        self.vuv_diff += ref_f0.voiced.iter().zip(&gen_f0.voiced).filter(|(a, b)| a != b).count();
        self.vuv_frames += ref_f0.len();
        Ok(())
    }

    /// Without any mutually voiced frame, F0 RMSE is reported as
    /// `no_voiced_rmse` and SA as 0.
    pub fn report(&self, no_voiced_rmse: f64) -> Result<EvalReport> {
        if self.frames == 0 || self.vuv_frames == 0 {
            return Err(Error::Metric("nothing evaluated".into()));
        }
        let (f0_rmse, sa) = if self.voiced_both == 0 {
            (no_voiced_rmse, 0.0)
        } else {
            (
                (self.log_sq_sum / self.voiced_both as f64).sqrt(),
                self.semitone_hits as f64 / self.voiced_both as f64,
            )
        };
        Ok(EvalReport {
            mcd: self.mcd_sum / self.frames as f64,
            f0_rmse,
            vuv_e: self.vuv_diff as f64 / self.vuv_frames as f64,
            sa,
            n_frames: self.frames,
            n_voiced_both: self.voiced_both,
        })
    }
}

/// Analyses reference/generated waveform pairs and pools their metrics.
pub struct Evaluator {
    mel: MelExtractor,
    pitch: PitchConfig,
    total: MetricAccumulator,
}

impl Evaluator {
    pub fn new(stft: &StftConfig) -> Result<Self> {
        let pitch = PitchConfig::for_rate(stft.sample_rate, stft.hop);
        pitch.validate()?;
        Ok(Evaluator {
            mel: MelExtractor::new(stft)?,
            pitch,
            total: MetricAccumulator::default(),
        })
    }

    pub fn pitch_config(&self) -> &PitchConfig {
        &self.pitch
    }

    /// Penalty F0 RMSE when nothing is mutually voiced: the width of the
    /// search band, the largest error the tracker can produce.
    pub fn no_voiced_rmse(&self) -> f64 {
        (self.pitch.fmax / self.pitch.fmin).ln()
    }

    /// Scores one pair, truncating both to the shorter waveform.
    pub fn add(&mut self, reference: &[f64], generated: &[f64]) -> Result<EvalReport> {
        let len = reference.len().min(generated.len());
        if len == 0 {
            return Err(Error::Metric("empty waveform".into()));
        }
        let (r, g) = (&reference[..len], &generated[..len]);
        let (rm, gm) = (self.mel.compute(r)?, self.mel.compute(g)?);
        let (rf, gf) = (estimate_f0(r, &self.pitch)?, estimate_f0(g, &self.pitch)?);
        let mut one = MetricAccumulator::default();
        one.add(&rm, &gm, &rf, &gf)?;
        self.total.add(&rm, &gm, &rf, &gf)?;
        one.report(self.no_voiced_rmse())
    }

    pub fn report(&self) -> Result<EvalReport> {
        self.total.report(self.no_voiced_rmse())
    }
}
