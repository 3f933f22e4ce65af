use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{event_frame_counts, midi_to_hz, MusicScore, PhonemeInventory, Pitch, ScoreEvent};
use crate::error::{Error, Result};
use super::Utterance;

/// Parameters of the synthetic singing corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub inventory_size: usize,
    pub midi_lo: u8,
    pub midi_hi: u8,
    pub min_notes: usize,
    pub max_notes: usize,
    /// Seconds.
    pub dur_lo: f64,
    pub dur_hi: f64,
    pub rest_prob: f64,
    pub sample_rate: u32,
    pub hop: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 70,
            inventory_size: 5,
            midi_lo: 55,
            midi_hi: 74,
            min_notes: 3,
            max_notes: 6,
            dur_lo: 0.15,
            dur_hi: 0.45,
            rest_prob: 0.1,
            sample_rate: 8000,
            hop: 100,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Input(m.to_string()));
        if self.inventory_size == 0 {
            return fail("empty phoneme inventory");
        }
        if self.midi_lo > self.midi_hi || self.midi_hi > 127 {
            return fail("inverted or out-of-range pitch range");
        }
        if self.min_notes == 0 || self.min_notes > self.max_notes {
            return fail("invalid note-count range");
        }
        if !(self.dur_lo > 0.0 && self.dur_lo <= self.dur_hi) {
            return fail("invalid duration range");
        }
        if !(0.0..1.0).contains(&self.rest_prob) {
            return fail("rest probability must lie in [0, 1)");
        }
        if self.sample_rate == 0 || self.hop == 0 {
            return fail("sample rate and hop must be positive");
        }
        Ok(())
    }

    pub fn frame_period(&self) -> f64 {
        self.hop as f64 / f64::from(self.sample_rate)
    }
}

/// Formant centres (Hz) and bandwidths giving each phoneme its own envelope.
fn formants(symbol_index: usize) -> [(f64, f64, f64); 3] {
    const TABLE: [[f64; 3]; 8] = [
        [800.0, 1200.0, 2500.0],
        [300.0, 2300.0, 3000.0],
        [350.0, 800.0, 2300.0],
        [500.0, 1900.0, 2600.0],
        [500.0, 900.0, 2400.0],
        [250.0, 1700.0, 2600.0],
        [250.0, 1100.0, 2300.0],
        [360.0, 1300.0, 2700.0],
    ];
    let f = TABLE.get(symbol_index).copied().unwrap_or_else(|| {
        // deterministic spread for inventories beyond the table
        let x = (symbol_index as f64 * 0.618_033_988_75).fract();
        [300.0 + 600.0 * x, 900.0 + 1500.0 * (1.0 - x), 2300.0 + 700.0 * x]
    });
    [(f[0], 150.0, 1.0), (f[1], 200.0, 0.5), (f[2], 250.0, 0.25)]
}

fn harmonic_gain(symbol_index: usize, freq: f64, harmonic: usize) -> f64 {
    let resonance: f64 = formants(symbol_index)
        .iter()
        .map(|&(fc, bw, g)| g * (-0.5 * ((freq - fc) / bw).powi(2)).exp())
        .sum();
    (0.2 + resonance) / harmonic as f64
}

/// Renders a score as a harmonic source with per-phoneme envelopes.
/// The waveform has `frames * hop` samples, quantized to 16-bit steps.
pub fn render_score(score: &MusicScore, inventory: &PhonemeInventory, sample_rate: u32, hop: usize) -> Result<Vec<f64>> {
    let sr = f64::from(sample_rate);
    let counts = event_frame_counts(score, hop as f64 / sr);
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Input("score expands to zero frames".into()));
    }
    let mut wave = vec![0.0; total * hop];
    let mut start = 0;
    let mut phase = 0.0f64;
    for (event, &frames) in score.events.iter().zip(&counts) {
        let len = frames * hop;
        let seg = &mut wave[start..start + len];
        start += len;
        let Pitch::Midi(m) = event.pitch else {
            continue;
        };
        let sym = inventory
            .id(&event.phoneme)
            .ok_or_else(|| Error::Input(format!("unknown phoneme `{}`", event.phoneme)))?
            - 1;
        let f0 = midi_to_hz(m);
        let n_harm = ((0.45 * sr) / f0).floor().max(1.0) as usize;
        let gains: Vec<f64> = (1..=n_harm).map(|h| harmonic_gain(sym, h as f64 * f0, h)).collect();
        let norm = 0.6 / gains.iter().sum::<f64>();
        let ramp = ((0.015 * sr) as usize).min(len / 4).max(1);
        let step = 2.0 * PI * f0 / sr;
        for (n, out) in seg.iter_mut().enumerate() {
            let env = if n < ramp {
                0.5 - 0.5 * (PI * n as f64 / ramp as f64).cos()
            } else if n >= len - ramp {
                0.5 - 0.5 * (PI * (len - 1 - n) as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            let s: f64 = gains
                .iter()
                .enumerate()
                .map(|(h, g)| g * ((h + 1) as f64 * phase).sin())
                .sum();
            *out = env * norm * s;
            phase = (phase + step) % (2.0 * PI);
        }
    }
    Ok(wave.into_iter().map(quantize_i16).collect())
}

pub(crate) fn quantize_i16(x: f64) -> f64 {
    to_i16(x) as f64 / 32768.0
}

pub(crate) fn to_i16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn random_score(cfg: &SynthConfig, inventory: &PhonemeInventory, rng: &mut ChaCha8Rng) -> MusicScore {
    let n = rng.random_range(cfg.min_notes..=cfg.max_notes);
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        // milliseconds keep the text form short and exact
        let ms = rng.random_range((cfg.dur_lo * 1000.0).round() as u32..=(cfg.dur_hi * 1000.0).round() as u32);
        let d = f64::from(ms) / 1000.0;
        let rest = i > 0 && rng.random_bool(cfg.rest_prob);
        if rest {
            events.push(ScoreEvent::rest(d));
        } else {
            let sym = &inventory.symbols()[rng.random_range(0..inventory.symbols().len())];
            events.push(ScoreEvent::note(sym, rng.random_range(cfg.midi_lo..=cfg.midi_hi), d));
        }
    }
    MusicScore { events, tempo: None }
}

/// `count` utterances with ids `utt0000`, `utt0001`, ...; deterministic in `seed`.
pub fn generate_synthetic_dataset(cfg: &SynthConfig, seed: u64) -> Result<Vec<Utterance>> {
    cfg.validate()?;
    let inventory = PhonemeInventory::with_size(cfg.inventory_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.count)
        .map(|i| {
            let score = random_score(cfg, &inventory, &mut rng);
            let waveform = render_score(&score, &inventory, cfg.sample_rate, cfg.hop)?;
            Ok(Utterance {
                id: format!("utt{i:04}"),
                score,
                waveform,
                sample_rate: cfg.sample_rate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let cfg = SynthConfig { count: 3, ..SynthConfig::default() };
        let a = generate_synthetic_dataset(&cfg, 7).unwrap();
        let b = generate_synthetic_dataset(&cfg, 7).unwrap();
        let c = generate_synthetic_dataset(&cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn length_matches_frames() {
        let cfg = SynthConfig { count: 5, ..SynthConfig::default() };
        for u in generate_synthetic_dataset(&cfg, 1).unwrap() {
            let frames = (u.score.total_duration() / cfg.frame_period()).round() as usize;
            assert_eq!(u.waveform.len(), frames * cfg.hop);
            let dur = u.waveform.len() as f64 / f64::from(u.sample_rate);
            assert!((dur - u.score.total_duration()).abs() <= cfg.frame_period());
            assert!(u.waveform.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn rest_only_is_silent() {
        let inv = PhonemeInventory::default();
        let score = MusicScore::new(vec![ScoreEvent::rest(0.5)]).unwrap();
        let w = render_score(&score, &inv, 8000, 100).unwrap();
        assert_eq!(w.len(), 4000);
        assert!(w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            SynthConfig { inventory_size: 0, ..SynthConfig::default() },
            SynthConfig { midi_lo: 80, midi_hi: 60, ..SynthConfig::default() },
            SynthConfig { dur_lo: 0.0, ..SynthConfig::default() },
        ];
        for cfg in bad {
            assert!(generate_synthetic_dataset(&cfg, 0).is_err());
        }
    }

    #[test]
    fn phonemes_have_distinct_envelopes() {
        let g: Vec<Vec<f64>> = (0..5)
            .map(|s| (1..=10).map(|h| harmonic_gain(s, 200.0 * h as f64, h)).collect())
            .collect();
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(g[i], g[j]);
            }
        }
    }
}
