//! Mixing weight `p(t)` between predicted and ground-truth acoustic features.
//!
//! `p(t)` is the coefficient of the loss terms computed on features predicted
//! by the acoustic model; `1 - p(t)` weights the terms computed on ground-truth
//! features. It is zero before `t_start`, rises to `k` over
//! `[t_start, t_end)` following the configured growth pattern, and stays at `k`
//! from `t_end` on. `t` is an integer epoch index and `p` is held constant
//! within an epoch.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Growth pattern of `p(t)` on the transition interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pattern {
    /// Vocoder sees ground truth only (`k = 0`).
    TwoStage,
    /// Predicted features from epoch 0 (`k = 1`, `t_start = 0`).
    JtScratch,
    /// Instantaneous switch at `t_start`.
    Step,
    Linear,
    Logistic,
}

impl Pattern {
    pub const ALL: [Pattern; 5] = [
        Pattern::TwoStage,
        Pattern::JtScratch,
        Pattern::Step,
        Pattern::Linear,
        Pattern::Logistic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::TwoStage => "two_stage",
            Pattern::JtScratch => "jt_scratch",
            Pattern::Step => "step",
            Pattern::Linear => "linear",
            Pattern::Logistic => "logistic",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Schedule(format!("unknown pattern `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub pattern: Pattern,
    /// Final proportion ratio.
    pub k: f64,
    /// Logistic steepness; only read by [`Pattern::Logistic`].
    pub r: f64,
    pub t_start: u32,
    pub t_end: u32,
    pub t_max: u32,
}

impl ScheduleConfig {
    pub fn two_stage(t_max: u32) -> Self {
        ScheduleConfig {
            pattern: Pattern::TwoStage,
            k: 0.0,
            r: 0.0,
            t_start: 0,
            t_end: 0,
            t_max,
        }
    }

    pub fn jt_scratch(t_max: u32) -> Self {
        ScheduleConfig {
            pattern: Pattern::JtScratch,
            k: 1.0,
            ..Self::two_stage(t_max)
        }
    }

    /// Switch from ground truth to predicted features at `t_start`.
    pub fn step(t_start: u32, t_max: u32) -> Self {
        ScheduleConfig {
            pattern: Pattern::Step,
            k: 1.0,
            r: 0.0,
            t_start,
            t_end: t_start,
            t_max,
        }
    }

    pub fn linear(k: f64, t_start: u32, t_end: u32, t_max: u32) -> Self {
        ScheduleConfig {
            pattern: Pattern::Linear,
            k,
            r: 0.0,
            t_start,
            t_end,
            t_max,
        }
    }

    pub fn logistic(k: f64, r: f64, t_start: u32, t_end: u32, t_max: u32) -> Self {
        ScheduleConfig {
            pattern: Pattern::Logistic,
            k,
            r,
            t_start,
            t_end,
            t_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Schedule(msg));
        if self.t_max == 0 {
            return fail("t_max must be positive".into());
        }
        if !(self.t_start <= self.t_end && self.t_end <= self.t_max) {
            return fail(format!(
                "need 0 <= t_start <= t_end <= t_max, got {} {} {}",
                self.t_start, self.t_end, self.t_max
            ));
        }
        if !(0.0..=1.0).contains(&self.k) {
            return fail(format!("k must lie in [0, 1], got {}", self.k));
        }
        match self.pattern {
            Pattern::Step if self.t_end != self.t_start => {
                fail("step pattern requires t_end == t_start".into())
            }
            Pattern::TwoStage if self.k != 0.0 => fail("two_stage pattern requires k = 0".into()),
            Pattern::JtScratch if self.k != 1.0 || self.t_start != 0 || self.t_end != 0 => {
                fail("jt_scratch pattern requires k = 1 and t_start = t_end = 0".into())
            }
            Pattern::Logistic if !(self.r > 0.0) => {
                fail(format!("logistic pattern requires r > 0, got {}", self.r))
            }
            _ if !self.r.is_finite() => fail("r must be finite".into()),
            _ => Ok(()),
        }
    }

    /// `p` at continuous time `t`, without range checks.
    pub fn p_at(&self, t: f64) -> f64 {
        if t < f64::from(self.t_start) {
            return 0.0;
        }
        if t >= f64::from(self.t_end) {
            return self.k;
        }
        let u = (t - f64::from(self.t_start)) / f64::from(self.t_end - self.t_start);
        let shape = match self.pattern {
            Pattern::Linear => u,
            Pattern::Logistic => normalized_logistic(u, self.r),
            // empty interior: t_start == t_end
            Pattern::Step | Pattern::TwoStage | Pattern::JtScratch => 1.0,
        };
        self.k * shape.clamp(0.0, 1.0)
    }
}

/// `g(u) = 1 / (1 + exp(-r (u - 1/2)))` rescaled so that `s(0) = 0`, `s(1) = 1`.
fn normalized_logistic(u: f64, r: f64) -> f64 {
    let g = |u: f64| 1.0 / (1.0 + (-r * (u - 0.5)).exp());
    let (g0, g1) = (g(0.0), g(1.0));
    (g(u) - g0) / (g1 - g0)
}

/// The mixing weight in effect during one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixWeight {
    pub p: f64,
    pub epoch: u32,
}

impl MixWeight {
    pub fn new(p: f64, epoch: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Schedule(format!("mix weight {p} outside [0, 1]")));
        }
        Ok(MixWeight { p, epoch })
    }
}

pub fn evaluate_schedule(cfg: &ScheduleConfig, epoch: u32) -> Result<MixWeight> {
    cfg.validate()?;
    if epoch >= cfg.t_max {
        return Err(Error::Schedule(format!(
            "epoch {epoch} outside [0, {})",
            cfg.t_max
        )));
    }
    Ok(MixWeight {
        p: cfg.p_at(f64::from(epoch)),
        epoch,
    })
}

/// Training regime a schedule reduces to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    TwoStage,
    JtScratch,
    JtFt,
    Mixed,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::TwoStage => "two-stage",
            Regime::JtScratch => "jt-scratch",
            Regime::JtFt => "jt-ft",
            Regime::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `k = 0` is two-stage. A switch to `k = 1` at epoch 0 is jt-scratch,
/// inside the run it is jt-ft, and at `t_max` it never happens (two-stage).
/// Everything else mixes both feature sources.
pub fn classify_schedule(cfg: &ScheduleConfig) -> Result<Regime> {
    cfg.validate()?;
    if cfg.k == 0.0 || cfg.pattern == Pattern::TwoStage {
        return Ok(Regime::TwoStage);
    }
    let instantaneous = matches!(cfg.pattern, Pattern::Step | Pattern::JtScratch);
    Ok(match (instantaneous, cfg.k == 1.0) {
        (true, true) if cfg.t_start == 0 => Regime::JtScratch,
        (true, true) if cfg.t_start >= cfg.t_max => Regime::TwoStage,
        (true, true) => Regime::JtFt,
        _ => Regime::Mixed,
    })
}

/// `resolution` samples of `p` at `t_i = i * t_max / resolution`.
pub fn schedule_curve(cfg: &ScheduleConfig, resolution: usize) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    if resolution < 2 {
        return Err(Error::Schedule(format!("resolution must be >= 2, got {resolution}")));
    }
    let t_max = f64::from(cfg.t_max);
    Ok((0..resolution)
        .map(|i| {
            let t = i as f64 * t_max / resolution as f64;
            (t, cfg.p_at(t))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn two_stage_is_zero_everywhere() {
        let cfg = ScheduleConfig::two_stage(50);
        for t in 0..50 {
            assert_eq!(evaluate_schedule(&cfg, t).unwrap().p, 0.0);
        }
    }

    #[test]
    fn linear_midpoint() {
        let cfg = ScheduleConfig::linear(1.0, 0, 100, 200);
        assert_eq!(evaluate_schedule(&cfg, 50).unwrap().p, 0.5);
    }

    #[test]
    fn step_switches_at_t_start() {
        let cfg = ScheduleConfig::step(125, 500);
        assert_eq!(evaluate_schedule(&cfg, 124).unwrap().p, 0.0);
        assert_eq!(evaluate_schedule(&cfg, 125).unwrap().p, 1.0);
    }

    #[test]
    fn logistic_midpoint_is_half() {
        let cfg = ScheduleConfig::logistic(1.0, 10.0, 0, 100, 100);
        let p = evaluate_schedule(&cfg, 50).unwrap().p;
        assert!((p - 0.5).abs() < 1e-12, "{p}");
    }

    #[test]
    fn rejects_out_of_range_epoch_and_bad_logistic() {
        let cfg = ScheduleConfig::linear(1.0, 0, 10, 10);
        assert!(evaluate_schedule(&cfg, 10).is_err());
        let flat = ScheduleConfig::logistic(1.0, 0.0, 0, 10, 10);
        assert!(evaluate_schedule(&flat, 3).is_err());
        let falling = ScheduleConfig::logistic(1.0, -2.0, 0, 10, 10);
        assert!(falling.validate().is_err());
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let mut cfg = ScheduleConfig::step(5, 10);
        cfg.t_end = 6;
        assert!(cfg.validate().is_err());
        let mut cfg = ScheduleConfig::two_stage(10);
        cfg.k = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ScheduleConfig::jt_scratch(10);
        cfg.t_start = 2;
        cfg.t_end = 2;
        assert!(cfg.validate().is_err());
        assert!(ScheduleConfig::linear(1.2, 0, 5, 10).validate().is_err());
        assert!(ScheduleConfig::linear(1.0, 6, 5, 10).validate().is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(classify_schedule(&ScheduleConfig::two_stage(10)).unwrap(), Regime::TwoStage);
        assert_eq!(classify_schedule(&ScheduleConfig::step(0, 500)).unwrap(), Regime::JtScratch);
        assert_eq!(classify_schedule(&ScheduleConfig::jt_scratch(500)).unwrap(), Regime::JtScratch);
        assert_eq!(classify_schedule(&ScheduleConfig::step(125, 500)).unwrap(), Regime::JtFt);
        assert_eq!(classify_schedule(&ScheduleConfig::step(500, 500)).unwrap(), Regime::TwoStage);
        assert_eq!(
            classify_schedule(&ScheduleConfig::linear(0.0, 0, 10, 10)).unwrap(),
            Regime::TwoStage
        );
        assert_eq!(
            classify_schedule(&ScheduleConfig::linear(1.0, 0, 10, 10)).unwrap(),
            Regime::Mixed
        );
        let mut partial = ScheduleConfig::step(3, 10);
        partial.k = 0.5;
        assert_eq!(classify_schedule(&partial).unwrap(), Regime::Mixed);
    }

    #[test]
    fn curves() {
        let flat = schedule_curve(&ScheduleConfig::two_stage(40), 64).unwrap();
        assert_eq!(flat.len(), 64);
        assert!(flat.iter().all(|&(_, p)| p == 0.0));

        let step = schedule_curve(&ScheduleConfig::step(10, 40), 40).unwrap();
        let jumps = step.windows(2).filter(|w| w[1].1 != w[0].1).count();
        assert_eq!(jumps, 1);

        let lin = schedule_curve(&ScheduleConfig::linear(1.0, 0, 40, 40), 400).unwrap();
        assert_eq!(lin[0], (0.0, 0.0));
        let (t_last, p_last) = *lin.last().unwrap();
        assert!(t_last < 40.0 && p_last > 0.99);

        assert!(schedule_curve(&ScheduleConfig::two_stage(4), 1).is_err());
    }

    fn arb_config() -> impl Strategy<Value = ScheduleConfig> {
        (1u32..60, 0usize..5, 0.0..=1.0f64, 0.1..20.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(
            |(t_max, pat, k, r, a, b)| {
                let t_start = (a * f64::from(t_max)).floor() as u32;
                let t_end = t_start + (b * f64::from(t_max - t_start)).floor() as u32;
                match pat {
                    0 => ScheduleConfig::two_stage(t_max),
                    1 => ScheduleConfig::jt_scratch(t_max),
                    2 => ScheduleConfig { k, ..ScheduleConfig::step(t_start, t_max) },
                    3 => ScheduleConfig::linear(k, t_start, t_end, t_max),
                    _ => ScheduleConfig::logistic(k, r, t_start, t_end, t_max),
                }
            },
        )
    }

    proptest! {
        #[test]
        fn bounded_monotone_and_pinned(cfg in arb_config()) {
            cfg.validate().unwrap();
            let mut prev = 0.0;
            for t in 0..cfg.t_max {
                let p = evaluate_schedule(&cfg, t).unwrap().p;
                prop_assert!((0.0..=cfg.k).contains(&p));
                prop_assert!(p >= prev);
                if t < cfg.t_start { prop_assert_eq!(p, 0.0); }
                if t >= cfg.t_end { prop_assert_eq!(p, cfg.k); }
                prev = p;
            }
        }

        #[test]
        fn classification_ignores_t_max_rescaling(cfg in arb_config(), factor in 2u32..5) {
            let scaled = ScheduleConfig {
                t_start: cfg.t_start * factor,
                t_end: cfg.t_end * factor,
                t_max: cfg.t_max * factor,
                ..cfg
            };
            prop_assert_eq!(classify_schedule(&cfg).unwrap(), classify_schedule(&scaled).unwrap());
        }

        #[test]
        fn shapes_agree_at_interval_ends(k in 0.0..=1.0f64, r in 0.1..30.0f64) {
            let lin = ScheduleConfig::linear(k, 10, 20, 30);
            let log = ScheduleConfig::logistic(k, r, 10, 20, 30);
            prop_assert!((lin.p_at(10.0) - log.p_at(10.0)).abs() < 1e-12);
            let near_end = 20.0 - 1e-9;
            prop_assert!((lin.p_at(near_end) - k).abs() < 1e-6);
            prop_assert!((log.p_at(near_end) - k).abs() < 1e-6);
        }
    }
}
