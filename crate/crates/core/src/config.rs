//! Run configuration and its line-oriented text form.
//!
//! ```text
//! preset = desk
//!
//! [schedule]
//! pattern = step
//! t_start = 15
//! ...
//! ```
//!
//! A file starts from a preset (`desk` unless a top-level `preset` line says
//! otherwise) and overrides individual keys. Unknown sections or keys are
//! errors. [`TrainConfig::echo`] writes every key in a fixed order and parses
//! back to the same value.

use std::fmt;
use std::str::FromStr;

use crate::am::{AmConfig, EncoderKind};
use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::nn::AdamWConfig;
use crate::schedule::{Pattern, ScheduleConfig};
use crate::voc::VocConfig;

/// Whether vocoder losses reach the acoustic model through the predicted mel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointGradient {
    Flow,
    Detach,
}

/// How `p` combines the two vocoder branches within an iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixMode {
    /// Both branches on the same batch, weighted by `p`.
    Deterministic,
    /// One branch per iteration, predicted with probability `p`.
    Bernoulli,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $s),+ }
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($ty::$variant),)+
                    _ => Err(Error::Config(format!("unknown {} `{s}`", stringify!($ty)))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

text_enum!(JointGradient { Flow => "flow", Detach => "detach" });
text_enum!(MixMode { Deterministic => "deterministic", Bernoulli => "bernoulli" });

#[derive(Clone, Debug, PartialEq)]
pub struct TrainParams {
    pub optimizer: AdamWConfig,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_decay_gamma: f64,
    pub batch_size: usize,
    pub epochs: u32,
    pub iters_per_epoch: u32,
    pub seed: u64,
    pub joint_gradient: JointGradient,
    pub mix_mode: MixMode,
    /// Length of the random training crops, in frames.
    pub segment_frames: usize,
    /// Checkpoints retained on disk; older ones are pruned.
    pub keep_checkpoints: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataParams {
    /// The last `n_val` utterances (by id) are held out.
    pub n_val: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub schedule: ScheduleConfig,
    pub weights: LossWeights,
    pub am: AmConfig,
    pub voc: VocConfig,
    pub stft: StftConfig,
    pub train: TrainParams,
    pub data: DataParams,
}

impl TrainConfig {
    /// Toy models on the 8 kHz synthetic corpus; jt-ft switching at a quarter
    /// of the run.
    pub fn desk() -> Self {
        let stft = StftConfig::desk();
        let epochs = 60;
        TrainConfig {
            schedule: ScheduleConfig::step(epochs / 4, epochs),
            weights: LossWeights::default(),
            am: AmConfig::toy(9, stft.n_mels),
            voc: VocConfig::desk(),
            stft,
            train: TrainParams {
                optimizer: AdamWConfig {
                    lr: 2e-4,
                    beta1: 0.8,
                    beta2: 0.99,
                    eps: 1e-9,
                    weight_decay: 0.0,
                },
                lr_decay_gamma: 0.999875,
                batch_size: 4,
                epochs,
                iters_per_epoch: 25,
                seed: 777,
                joint_gradient: JointGradient::Flow,
                mix_mode: MixMode::Deterministic,
                segment_frames: 16,
                keep_checkpoints: 3,
            },
            data: DataParams { n_val: 10 },
        }
    }

    /// Full-scale optimisation settings at 24 kHz.
    pub fn paper() -> Self {
        let stft = StftConfig::paper();
        let epochs = 500;
        let desk = Self::desk();
        TrainConfig {
            schedule: ScheduleConfig::step(epochs / 4, epochs),
            am: AmConfig {
                hidden_dim: 256,
                n_layers: 4,
                ..AmConfig::toy(9, stft.n_mels)
            },
            voc: VocConfig {
                upsample_factors: vec![5, 5, 4, 3],
                channels: 256,
                resblock_dilations: vec![1, 3, 5],
                periods: vec![2, 3, 5, 7, 11],
                n_scales: 3,
                disc_channels: 32,
            },
            stft,
            train: TrainParams {
                optimizer: AdamWConfig {
                    lr: 1.25e-5,
                    ..desk.train.optimizer
                },
                batch_size: 16,
                epochs,
                iters_per_epoch: 500,
                ..desk.train
            },
            ..desk
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            _ => Err(Error::Config(format!("unknown preset `{name}` (expected desk or paper)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        self.schedule.validate()?;
        self.weights.validate()?;
        self.am.validate()?;
        self.stft.validate()?;
        self.voc.validate(self.stft.hop)?;
        let t = &self.train;
        let o = &t.optimizer;
        if !(o.lr > 0.0 && o.lr.is_finite()) {
            return fail(format!("train: lr must be positive, got {}", o.lr));
        }
        if !(o.weight_decay >= 0.0 && o.weight_decay.is_finite()) {
            return fail("train: weight_decay must be >= 0".into());
        }
        if !((0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2)) {
            return fail("train: betas must lie in [0, 1)".into());
        }
        if !(o.eps > 0.0) {
            return fail("train: eps must be positive".into());
        }
        if !(t.lr_decay_gamma > 0.0 && t.lr_decay_gamma <= 1.0) {
            return fail(format!("train: lr_decay_gamma must lie in (0, 1], got {}", t.lr_decay_gamma));
        }
        if t.batch_size == 0 || t.iters_per_epoch == 0 || t.segment_frames == 0 || t.keep_checkpoints == 0 {
            return fail("train: batch_size, iters_per_epoch, segment_frames and keep_checkpoints must be >= 1".into());
        }
        if t.epochs != self.schedule.t_max {
            return fail(format!(
                "train.epochs = {} but schedule.t_max = {}",
                t.epochs, self.schedule.t_max
            ));
        }
        if self.am.n_mels != self.stft.n_mels {
            return fail(format!("am.n_mels = {} but dsp.n_mels = {}", self.am.n_mels, self.stft.n_mels));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Vec::new();
        let mut preset = None;
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse { line: line_no, msg: format!("malformed section `{line}`") })?;
                if !SECTIONS.contains(&name) {
                    return Err(Error::Parse { line: line_no, msg: format!("unknown section `[{name}]`") });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected `key = value`, got `{line}`") })?;
            let (key, value) = (key.trim(), value.trim());
            match &section {
                None if key == "preset" => preset = Some(value.to_string()),
                None => return Err(Error::Parse { line: line_no, msg: format!("key `{key}` outside a section") }),
                Some(s) => lines.push((line_no, s.clone(), key.to_string(), value.to_string())),
            }
        }
        let mut cfg = Self::preset(preset.as_deref().unwrap_or("desk"))?;
        for (line, section, key, value) in lines {
            cfg.set(&section, &key, &value).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides one `section.key`; the value uses the file syntax.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("unknown key `{section}.{key}`"));
        match section {
            "schedule" => {
                let s = &mut self.schedule;
                match key {
                    "pattern" => s.pattern = value.parse::<Pattern>()?,
                    "k" => s.k = num(key, value)?,
                    "r" => s.r = num(key, value)?,
                    "t_start" => s.t_start = num(key, value)?,
                    "t_end" => s.t_end = num(key, value)?,
                    "t_max" => s.t_max = num(key, value)?,
                    _ => return Err(bad()),
                }
            }
            "losses" => {
                let w = &mut self.weights;
                let slot = match key {
                    "lambda_d" => &mut w.lambda_d,
                    "lambda_ma" => &mut w.lambda_ma,
                    "lambda_adv" => &mut w.lambda_adv,
                    "lambda_f" => &mut w.lambda_f,
                    "lambda_m" => &mut w.lambda_m,
                    _ => return Err(bad()),
                };
                *slot = num(key, value)?;
            }
            "am" => {
                let a = &mut self.am;
                match key {
                    "encoder" => a.encoder_kind = value.parse::<EncoderKind>()?,
                    "hidden_dim" => a.hidden_dim = num(key, value)?,
                    "n_layers" => a.n_layers = num(key, value)?,
                    "phoneme_vocab" => a.phoneme_vocab = num(key, value)?,
                    "n_mels" => a.n_mels = num(key, value)?,
                    _ => return Err(bad()),
                }
            }
            "voc" => {
                let v = &mut self.voc;
                match key {
                    "upsample_factors" => v.upsample_factors = list(key, value)?,
                    "channels" => v.channels = num(key, value)?,
                    "resblock_dilations" => v.resblock_dilations = list(key, value)?,
                    "periods" => v.periods = list(key, value)?,
                    "n_scales" => v.n_scales = num(key, value)?,
                    "disc_channels" => v.disc_channels = num(key, value)?,
                    _ => return Err(bad()),
                }
            }
            "dsp" => {
                let d = &mut self.stft;
                match key {
                    "sample_rate" => d.sample_rate = num(key, value)?,
                    "n_fft" => d.n_fft = num(key, value)?,
                    "hop" => d.hop = num(key, value)?,
                    "win" => d.win = num(key, value)?,
                    "n_mels" => d.n_mels = num(key, value)?,
                    "fmin" => d.fmin = num(key, value)?,
                    "fmax" => d.fmax = num(key, value)?,
                    "log_floor" => d.log_floor = num(key, value)?,
                    _ => return Err(bad()),
                }
            }
            "train" => {
                let t = &mut self.train;
                match key {
                    "lr" => t.optimizer.lr = num(key, value)?,
                    "weight_decay" => t.optimizer.weight_decay = num(key, value)?,
                    "beta1" => t.optimizer.beta1 = num(key, value)?,
                    "beta2" => t.optimizer.beta2 = num(key, value)?,
                    "eps" => t.optimizer.eps = num(key, value)?,
                    "lr_decay_gamma" => t.lr_decay_gamma = num(key, value)?,
                    "batch_size" => t.batch_size = num(key, value)?,
                    "epochs" => t.epochs = num(key, value)?,
                    "iters_per_epoch" => t.iters_per_epoch = num(key, value)?,
                    "seed" => t.seed = num(key, value)?,
                    "joint_gradient" => t.joint_gradient = value.parse()?,
                    "mix_mode" => t.mix_mode = value.parse()?,
                    "segment_frames" => t.segment_frames = num(key, value)?,
                    "keep_checkpoints" => t.keep_checkpoints = num(key, value)?,
                    _ => return Err(bad()),
                }
            }
            "data" => match key {
                "n_val" => self.data.n_val = num(key, value)?,
                _ => return Err(bad()),
            },
            _ => return Err(Error::Config(format!("unknown section `{section}`"))),
        }
        Ok(())
    }

    /// Scales the run to `epochs`, keeping the schedule proportional.
    pub fn with_epochs(mut self, epochs: u32) -> Self {
        let old = self.schedule.t_max;
        let scale = |t: u32| ((u64::from(t) * u64::from(epochs) + u64::from(old) / 2) / u64::from(old)) as u32;
        self.schedule.t_start = scale(self.schedule.t_start);
        self.schedule.t_end = scale(self.schedule.t_end).max(self.schedule.t_start);
        self.schedule.t_max = epochs;
        self.train.epochs = epochs;
        self
    }

    pub fn echo(&self) -> String {
        let s = &self.schedule;
        let w = &self.weights;
        let a = &self.am;
        let v = &self.voc;
        let d = &self.stft;
        let t = &self.train;
        let o = &t.optimizer;
        let join = |xs: &[usize]| xs.iter().map(usize::to_string).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{name}]\n"));
            for (k, val) in entries {
                out.push_str(&format!("{k} = {val}\n"));
            }
        };
        section(
            "schedule",
            vec![
                ("pattern", s.pattern.as_str().to_string()),
                ("k", s.k.to_string()),
                ("r", s.r.to_string()),
                ("t_start", s.t_start.to_string()),
                ("t_end", s.t_end.to_string()),
                ("t_max", s.t_max.to_string()),
            ],
        );
        section(
            "losses",
            vec![
                ("lambda_d", w.lambda_d.to_string()),
                ("lambda_ma", w.lambda_ma.to_string()),
                ("lambda_adv", w.lambda_adv.to_string()),
                ("lambda_f", w.lambda_f.to_string()),
                ("lambda_m", w.lambda_m.to_string()),
            ],
        );
        section(
            "am",
            vec![
                ("encoder", a.encoder_kind.as_str().to_string()),
                ("hidden_dim", a.hidden_dim.to_string()),
                ("n_layers", a.n_layers.to_string()),
                ("phoneme_vocab", a.phoneme_vocab.to_string()),
                ("n_mels", a.n_mels.to_string()),
            ],
        );
        section(
            "voc",
            vec![
                ("upsample_factors", join(&v.upsample_factors)),
                ("channels", v.channels.to_string()),
                ("resblock_dilations", join(&v.resblock_dilations)),
                ("periods", join(&v.periods)),
                ("n_scales", v.n_scales.to_string()),
                ("disc_channels", v.disc_channels.to_string()),
            ],
        );
        section(
            "dsp",
            vec![
                ("sample_rate", d.sample_rate.to_string()),
                ("n_fft", d.n_fft.to_string()),
                ("hop", d.hop.to_string()),
                ("win", d.win.to_string()),
                ("n_mels", d.n_mels.to_string()),
                ("fmin", d.fmin.to_string()),
                ("fmax", d.fmax.to_string()),
                ("log_floor", d.log_floor.to_string()),
            ],
        );
        section(
            "train",
            vec![
                ("lr", o.lr.to_string()),
                ("weight_decay", o.weight_decay.to_string()),
                ("beta1", o.beta1.to_string()),
                ("beta2", o.beta2.to_string()),
                ("eps", o.eps.to_string()),
                ("lr_decay_gamma", t.lr_decay_gamma.to_string()),
                ("batch_size", t.batch_size.to_string()),
                ("epochs", t.epochs.to_string()),
                ("iters_per_epoch", t.iters_per_epoch.to_string()),
                ("seed", t.seed.to_string()),
                ("joint_gradient", t.joint_gradient.to_string()),
                ("mix_mode", t.mix_mode.to_string()),
                ("segment_frames", t.segment_frames.to_string()),
                ("keep_checkpoints", t.keep_checkpoints.to_string()),
            ],
        );
        section("data", vec![("n_val", self.data.n_val.to_string())]);
        out
    }
}

const SECTIONS: [&str; 7] = ["schedule", "losses", "am", "voc", "dsp", "train", "data"];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

/// One axis of an ablation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    /// `section.key`, or `schedule.t_start_me` for a fraction of the run.
    pub key: String,
    pub values: Vec<String>,
}

/// Ablation grid file:
///
/// ```text
/// set schedule.pattern = linear
/// vary schedule.k = 0, 0.25, 0.5, 0.75, 1
/// seeds = 1, 2, 3
/// ```
///
/// Cells are the cartesian product of the `vary` axes, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub overrides: Vec<(String, String)>,
    pub axes: Vec<GridAxis>,
    pub seeds: Vec<u64>,
}

/// A resolved grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub label: String,
    pub config: TrainConfig,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = GridSpec {
            overrides: Vec::new(),
            axes: Vec::new(),
            seeds: Vec::new(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (head, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `=` in `{line}`")))?;
            let (head, value) = (head.trim(), value.trim());
            let mut words = head.split_whitespace();
            match (words.next(), words.next(), words.next()) {
                (Some("seeds"), None, None) => {
                    spec.seeds = value
                        .split(',')
                        .map(|s| s.trim().parse::<u64>().map_err(|_| err(format!("invalid seed `{s}`"))))
                        .collect::<Result<_>>()?;
                }
                (Some("set"), Some(key), None) => {
                    split_key(key).map_err(|e| err(e.to_string()))?;
                    spec.overrides.push((key.to_string(), value.to_string()));
                }
                (Some("vary"), Some(key), None) => {
                    split_key(key).map_err(|e| err(e.to_string()))?;
                    let values: Vec<String> = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    if values.is_empty() {
                        return Err(err(format!("`vary {key}` has no values")));
                    }
                    spec.axes.push(GridAxis { key: key.to_string(), values });
                }
                _ => return Err(err(format!("expected `set`, `vary` or `seeds`, got `{head}`"))),
            }
        }
        if spec.seeds.is_empty() {
            return Err(Error::Parse { line: 0, msg: "grid lists no seeds".into() });
        }
        Ok(spec)
    }

    /// Applies the overrides and every axis combination to `base`.
    pub fn cells(&self, base: &TrainConfig) -> Result<Vec<GridCell>> {
        let mut start = base.clone();
        for (key, value) in &self.overrides {
            apply(&mut start, key, value)?;
        }
        let mut cells = vec![(Vec::<String>::new(), start)];
        for axis in &self.axes {
            let mut next = Vec::new();
            for (labels, cfg) in &cells {
                for value in &axis.values {
                    let mut cfg = cfg.clone();
                    apply(&mut cfg, &axis.key, value)?;
                    let mut labels = labels.clone();
                    labels.push(axis_label(&axis.key, value));
                    next.push((labels, cfg));
                }
            }
            cells = next;
        }
        cells
            .into_iter()
            .map(|(labels, config)| {
                config.validate()?;
                let label = if labels.is_empty() { "base".to_string() } else { labels.join(" ") };
                Ok(GridCell { label, config })
            })
            .collect()
    }
}

fn split_key(key: &str) -> Result<(&str, &str)> {
    key.split_once('.')
        .ok_or_else(|| Error::Config(format!("expected `section.key`, got `{key}`")))
}

fn axis_label(key: &str, value: &str) -> String {
    match key {
        "schedule.t_start_me" => format!("{value} ME"),
        _ => format!("{}={value}", split_key(key).map_or(key, |(_, k)| k)),
    }
}

fn apply(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let (section, name) = split_key(key)?;
    match (section, name) {
        ("schedule", "t_start_me") => {
            let frac: f64 = num(name, value)?;
            if !(0.0..=1.0).contains(&frac) {
                return Err(Error::Config(format!("t_start_me {frac} outside [0, 1]")));
            }
            let t = (frac * f64::from(cfg.schedule.t_max)).round() as u32;
            cfg.schedule.t_start = t;
            cfg.schedule.t_end = cfg.schedule.t_end.max(t);
            if matches!(cfg.schedule.pattern, Pattern::Step) {
                cfg.schedule.t_end = t;
            }
            Ok(())
        }
        ("train", "epochs") => {
            *cfg = cfg.clone().with_epochs(num(name, value)?);
            Ok(())
        }
        _ => cfg.set(section, name, value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        TrainConfig::desk().validate().unwrap();
        TrainConfig::paper().validate().unwrap();
        let p = TrainConfig::paper();
        assert_eq!(p.train.optimizer.lr, 1.25e-5);
        assert_eq!(p.train.optimizer.weight_decay, 0.0);
        assert_eq!(p.train.lr_decay_gamma, 0.999875);
        assert_eq!((p.train.epochs, p.train.iters_per_epoch, p.train.seed, p.train.batch_size), (500, 500, 777, 16));
    }

    #[test]
    fn echo_round_trips_byte_stable() {
        for cfg in [TrainConfig::desk(), TrainConfig::paper()] {
            let echo = cfg.echo();
            let back = TrainConfig::parse(&echo).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.echo(), echo);
        }
    }

    #[test]
    fn overrides_and_preset_line() {
        let cfg = TrainConfig::parse("preset = paper\n[train]\nseed = 5 # comment\n").unwrap();
        assert_eq!(cfg.train.seed, 5);
        assert_eq!(cfg.stft.sample_rate, 24000);
        let cfg = TrainConfig::parse("[voc]\nperiods = 2, 5\n").unwrap();
        assert_eq!(cfg.voc.periods, vec![2, 5]);
    }

    #[test]
    fn rejects_unknown_and_inconsistent() {
        for text in [
            "[train]\nlearning_rate = 1\n",
            "[bogus]\n",
            "seed = 1\n",
            "[train]\nepochs = 10\n",
            "[dsp]\nn_mels = 20\n",
            "[train]\nlr = -1\n",
            "[train]\nlr_decay_gamma = 1.5\n",
            "[schedule]\npattern = cosine\n",
        ] {
            assert!(TrainConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn with_epochs_keeps_fractions() {
        let cfg = TrainConfig::desk().with_epochs(8);
        assert_eq!((cfg.schedule.t_start, cfg.schedule.t_max, cfg.train.epochs), (2, 8, 8));
        cfg.validate().unwrap();
    }

    #[test]
    fn grid_cells() {
        let grid = GridSpec::parse(
            "set schedule.pattern = step\nvary schedule.t_start_me = 0, 0.25, 0.5, 0.75, 1\nseeds = 1, 2\n",
        )
        .unwrap();
        let cells = grid.cells(&TrainConfig::desk()).unwrap();
        let labels: Vec<_> = cells.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["0 ME", "0.25 ME", "0.5 ME", "0.75 ME", "1 ME"]);
        let starts: Vec<_> = cells.iter().map(|c| c.config.schedule.t_start).collect();
        assert_eq!(starts, [0, 15, 30, 45, 60]);
        assert_eq!(grid.seeds, [1, 2]);
        assert!(GridSpec::parse("vary schedule.k = 0\n").is_err());
        assert!(GridSpec::parse("set k = 1\nseeds = 1\n").is_err());
    }
}
