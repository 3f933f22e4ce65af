//! Music scores: the line-oriented text format, frame-level expansion, and a
//! synthetic singing corpus with exact labels.
//!
//! One event per line, `phoneme midi_pitch duration_seconds`; rests are
//! written `REST - duration`. `#` starts a comment. An optional
//! `@tempo <bpm>` line carries tempo metadata.

pub(crate) mod dataset;
pub(crate) mod synth;

use std::fmt::Write as _;

pub use dataset::{dataset_inventory, read_dataset, read_meta, write_dataset, DatasetMeta};
pub use synth::{generate_synthetic_dataset, render_score, SynthConfig};

use crate::error::{Error, Result};

pub const REST: &str = "REST";

/// Symbols the acoustic model can embed. Id 0 is reserved for `REST`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
}

const DEFAULT_SYMBOLS: [&str; 8] = ["a", "i", "u", "e", "o", "n", "m", "l"];

impl PhonemeInventory {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Input("empty phoneme inventory".into()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if s == REST || s.is_empty() || s.contains(char::is_whitespace) || s.starts_with(['#', '@']) {
                return Err(Error::Input(format!("invalid phoneme symbol `{s}`")));
            }
            if symbols[..i].contains(s) {
                return Err(Error::Input(format!("duplicate phoneme symbol `{s}`")));
            }
        }
        Ok(PhonemeInventory { symbols })
    }

    /// The first `size` of the built-in symbols, extended with `p8`, `p9`, ...
    pub fn with_size(size: usize) -> Result<Self> {
        let symbols = (0..size)
            .map(|i| DEFAULT_SYMBOLS.get(i).map_or_else(|| format!("p{i}"), |s| s.to_string()))
            .collect();
        Self::new(symbols)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Embedding table size, including `REST`.
    pub fn vocab_size(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        if symbol == REST {
            return Some(0);
        }
        self.symbols.iter().position(|s| s == symbol).map(|i| i + 1)
    }
}

impl Default for PhonemeInventory {
    fn default() -> Self {
        Self::with_size(DEFAULT_SYMBOLS.len()).expect("built-in inventory is valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pitch {
    Midi(u8),
    Rest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreEvent {
    pub phoneme: String,
    pub pitch: Pitch,
    /// Seconds.
    pub duration: f64,
}

impl ScoreEvent {
    pub fn note(phoneme: &str, midi: u8, duration: f64) -> Self {
        ScoreEvent {
            phoneme: phoneme.to_string(),
            pitch: Pitch::Midi(midi),
            duration,
        }
    }

    pub fn rest(duration: f64) -> Self {
        ScoreEvent {
            phoneme: REST.to_string(),
            pitch: Pitch::Rest,
            duration,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MusicScore {
    pub events: Vec<ScoreEvent>,
    pub tempo: Option<f64>,
}

impl MusicScore {
    pub fn new(events: Vec<ScoreEvent>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::EmptyScore);
        }
        Ok(MusicScore { events, tempo: None })
    }

    pub fn total_duration(&self) -> f64 {
        self.events.iter().map(|e| e.duration).sum()
    }
}

/// A score with its rendered (or recorded) waveform.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub score: MusicScore,
    /// Samples in `[-1, 1)`.
    pub waveform: Vec<f64>,
    pub sample_rate: u32,
}

pub fn midi_to_hz(midi: u8) -> f64 {
    440.0 * 2f64.powf((f64::from(midi) - 69.0) / 12.0)
}

pub fn parse_score(bytes: &[u8], inventory: &PhonemeInventory) -> Result<MusicScore> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("not UTF-8: {e}"),
    })?;
    let mut events = Vec::new();
    let mut tempo = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "@tempo" {
            let [_, bpm] = fields[..] else {
                return Err(err("expected `@tempo <bpm>`".into()));
            };
            let bpm: f64 = bpm.parse().map_err(|_| err(format!("invalid tempo `{bpm}`")))?;
            if !(bpm > 0.0 && bpm.is_finite()) {
                return Err(err(format!("tempo must be positive, got {bpm}")));
            }
            tempo = Some(bpm);
            continue;
        }
        let [phoneme, pitch, duration] = fields[..] else {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        };
        if inventory.id(phoneme).is_none() {
            return Err(err(format!("unknown phoneme `{phoneme}`")));
        }
        let pitch = match (phoneme == REST, pitch) {
            (true, "-") => Pitch::Rest,
            (true, _) => return Err(err("REST events carry no pitch; use `-`".into())),
            (false, "-") => return Err(err(format!("phoneme `{phoneme}` needs a pitch"))),
            (false, p) => match p.parse::<u8>() {
                Ok(m) if m <= 127 => Pitch::Midi(m),
                _ => return Err(err(format!("invalid midi pitch `{p}`"))),
            },
        };
        let duration: f64 = duration
            .parse()
            .map_err(|_| err(format!("invalid duration `{duration}`")))?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(err(format!("duration must be positive, got {duration}")));
        }
        events.push(ScoreEvent {
            phoneme: phoneme.to_string(),
            pitch,
            duration,
        });
    }
    let mut score = MusicScore::new(events)?;
    score.tempo = tempo;
    Ok(score)
}

/// Normalized text form: no comments, single spaces, shortest round-trip numbers.
pub fn serialize_score(score: &MusicScore) -> String {
    let mut out = String::new();
    if let Some(bpm) = score.tempo {
        let _ = writeln!(out, "@tempo {bpm}");
    }
    for e in &score.events {
        match e.pitch {
            Pitch::Midi(m) => {
                let _ = writeln!(out, "{} {} {}", e.phoneme, m, e.duration);
            }
            Pitch::Rest => {
                let _ = writeln!(out, "{} - {}", e.phoneme, e.duration);
            }
        }
    }
    out
}

/// Per-frame supervision derived from a score.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTargets {
    pub phoneme_ids: Vec<usize>,
    /// Natural-log Hz; 0 on unvoiced frames.
    pub log_f0: Vec<f64>,
    pub voiced: Vec<bool>,
    /// Frame count of each event.
    pub durations: Vec<usize>,
}

impl FrameTargets {
    pub fn n_frames(&self) -> usize {
        self.phoneme_ids.len()
    }

    /// Reference pitch in Hz per frame, 0 where unvoiced.
    pub fn f0_hz(&self) -> Vec<f64> {
        self.log_f0
            .iter()
            .zip(&self.voiced)
            .map(|(&l, &v)| if v { l.exp() } else { 0.0 })
            .collect()
    }
}

/// Frame counts of consecutive events, rounded on cumulative boundaries so
/// that they sum to `round(total / frame_period)`.
pub fn event_frame_counts(score: &MusicScore, frame_period: f64) -> Vec<usize> {
    let mut elapsed = 0.0;
    let mut prev = 0usize;
    score
        .events
        .iter()
        .map(|e| {
            elapsed += e.duration;
            let boundary = (elapsed / frame_period).round() as usize;
            let count = boundary.saturating_sub(prev);
            prev = prev.max(boundary);
            count
        })
        .collect()
}

pub fn score_to_frame_targets(
    score: &MusicScore,
    inventory: &PhonemeInventory,
    frame_period: f64,
) -> Result<FrameTargets> {
    if !(frame_period > 0.0) {
        return Err(Error::Input(format!("frame period must be positive, got {frame_period}")));
    }
    let durations = event_frame_counts(score, frame_period);
    let total: usize = durations.iter().sum();
    if total == 0 {
        return Err(Error::Input("score expands to zero frames".into()));
    }
    let mut targets = FrameTargets {
        phoneme_ids: Vec::with_capacity(total),
        log_f0: Vec::with_capacity(total),
        voiced: Vec::with_capacity(total),
        durations,
    };
    for (event, &count) in score.events.iter().zip(&targets.durations) {
        let id = inventory
            .id(&event.phoneme)
            .ok_or_else(|| Error::Input(format!("unknown phoneme `{}`", event.phoneme)))?;
        let (log_f0, voiced) = match event.pitch {
            Pitch::Midi(m) => (midi_to_hz(m).ln(), true),
            Pitch::Rest => (0.0, false),
        };
        for _ in 0..count {
            targets.phoneme_ids.push(id);
            targets.log_f0.push(log_f0);
            targets.voiced.push(voiced);
        }
    }
    Ok(targets)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn inv() -> PhonemeInventory {
        PhonemeInventory::default()
    }

    #[test]
    fn parses_three_line_file() {
        let text = "a 60 0.25\n# a comment\ni 62 0.25   \n\nREST - 0.5\n";
        let score = parse_score(text.as_bytes(), &inv()).unwrap();
        assert_eq!(score.events.len(), 3);
        assert_eq!(score.total_duration(), 1.0);
        assert_eq!(score.events[2], ScoreEvent::rest(0.5));
        assert_eq!(serialize_score(&score), "a 60 0.25\ni 62 0.25\nREST - 0.5\n");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("", "empty score"),
            ("# only comments\n", "empty score"),
            ("a 60 0.25\nzz 60 0.25\n", "line 2: unknown phoneme `zz`"),
            ("a 60 0\n", "line 1: duration must be positive, got 0"),
            ("a 60 -1\n", "line 1: duration must be positive, got -1"),
            ("a 60\n", "line 1: expected 3 fields, found 2"),
            ("a 128 0.2\n", "line 1: invalid midi pitch `128`"),
            ("a 60 0.2\nREST 60 0.2\n", "line 2: REST events carry no pitch; use `-`"),
            ("a - 0.2\n", "line 1: phoneme `a` needs a pitch"),
        ];
        for (text, expected) in cases {
            let err = parse_score(text.as_bytes(), &inv()).unwrap_err();
            assert_eq!(err.to_string(), expected, "input {text:?}");
        }
    }

    #[test]
    fn tempo_directive() {
        let score = parse_score(b"@tempo 96\na 60 0.5\n", &inv()).unwrap();
        assert_eq!(score.tempo, Some(96.0));
        assert_eq!(serialize_score(&score), "@tempo 96\na 60 0.5\n");
    }

    #[test]
    fn frame_expansion() {
        let one = MusicScore::new(vec![ScoreEvent::note("a", 69, 0.30)]).unwrap();
        let t = score_to_frame_targets(&one, &inv(), 0.0125).unwrap();
        assert_eq!(t.durations, vec![24]);
        assert!((t.log_f0[0].exp() - 440.0).abs() < 1e-9);

        let two = MusicScore::new(vec![ScoreEvent::note("a", 60, 0.31), ScoreEvent::note("i", 62, 0.30)]).unwrap();
        let t = score_to_frame_targets(&two, &inv(), 0.0125).unwrap();
        assert_eq!(t.durations, vec![25, 24]);
        assert_eq!(t.n_frames(), 49);

        let tiny = MusicScore::new(vec![ScoreEvent::note("a", 60, 0.001)]).unwrap();
        assert!(score_to_frame_targets(&tiny, &inv(), 0.0125).is_err());
        assert!(score_to_frame_targets(&one, &inv(), 0.0).is_err());
    }

    #[test]
    fn midi_reference() {
        assert_eq!(midi_to_hz(69), 440.0);
        assert!((midi_to_hz(57) - 220.0).abs() < 1e-9);
    }

    /// Boundary enumeration: an event owns the frames whose index falls in
    /// `[round(start / fp), round(end / fp))`.
    fn boundary_oracle(durations: &[f64], fp: f64) -> Vec<usize> {
        let mut start = 0.0;
        durations
            .iter()
            .map(|d| {
                let end = start + d;
                let lo = (start / fp).round() as usize;
                let hi = (end / fp).round() as usize;
                start = end;
                (lo..hi.max(lo)).count()
            })
            .collect()
    }

    #[test]
    fn cumulative_rounding_matches_boundary_oracle() {
        let durs = [0.31, 0.30];
        let score = MusicScore::new(durs.iter().map(|&d| ScoreEvent::note("a", 60, d)).collect()).unwrap();
        assert_eq!(event_frame_counts(&score, 0.0125), boundary_oracle(&durs, 0.0125));
    }

    fn arb_score() -> impl Strategy<Value = MusicScore> {
        prop::collection::vec((0usize..9, 40u8..90, 1u32..4000), 1..12).prop_map(|items| {
            let inv = PhonemeInventory::default();
            let events = items
                .into_iter()
                .map(|(p, m, ms)| {
                    let d = f64::from(ms) / 1000.0;
                    if p == 0 {
                        ScoreEvent::rest(d)
                    } else {
                        ScoreEvent::note(&inv.symbols()[p - 1], m, d)
                    }
                })
                .collect();
            MusicScore::new(events).unwrap()
        })
    }

    proptest! {
        #[test]
        fn frame_counts_conserve_total(score in arb_score()) {
            let fp = 0.0125;
            let counts = event_frame_counts(&score, fp);
            let total: usize = counts.iter().sum();
            prop_assert_eq!(total, (score.total_duration() / fp).round() as usize);
            let durs: Vec<f64> = score.events.iter().map(|e| e.duration).collect();
            prop_assert_eq!(counts, boundary_oracle(&durs, fp));
        }

        #[test]
        fn text_round_trip(score in arb_score()) {
            let text = serialize_score(&score);
            let parsed = parse_score(text.as_bytes(), &PhonemeInventory::default()).unwrap();
            prop_assert_eq!(&parsed, &score);
            prop_assert_eq!(serialize_score(&parsed), text);
        }
    }
}
