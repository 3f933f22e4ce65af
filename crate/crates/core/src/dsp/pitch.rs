use crate::error::{Error, Result};

/// Autocorrelation pitch tracker settings.
#[derive(Clone, Debug, PartialEq)]
pub struct PitchConfig {
    pub sample_rate: u32,
    pub hop: usize,
    /// Analysis window in samples, centred on each frame.
    pub window: usize,
    pub fmin: f64,
    pub fmax: f64,
    /// Minimum normalized correlation at the chosen lag.
    pub clarity: f64,
    /// Frames quieter than this RMS are unvoiced.
    pub min_rms: f64,
    /// A lobe peak counts once it reaches this fraction of the highest one.
    pub key_ratio: f64,
}

impl PitchConfig {
    pub fn for_rate(sample_rate: u32, hop: usize) -> Self {
        PitchConfig {
            sample_rate,
            hop,
            window: (sample_rate as usize * 32).div_ceil(1000),
            fmin: 70.0,
            fmax: 1000.0,
            clarity: 0.5,
            min_rms: 1e-3,
            key_ratio: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = f64::from(self.sample_rate) / 2.0;
        if self.hop == 0 || self.sample_rate == 0 {
            return Err(Error::Config("pitch: hop and sample rate must be positive".into()));
        }
        if !(self.fmin > 0.0 && self.fmin < self.fmax && self.fmax < nyquist) {
            return Err(Error::Config(format!(
                "pitch: need 0 < fmin < fmax < {nyquist}, got {} {}",
                self.fmin, self.fmax
            )));
        }
        if self.window <= self.max_lag() {
            return Err(Error::Config("pitch: window shorter than the longest period".into()));
        }
        Ok(())
    }

    fn min_lag(&self) -> usize {
        ((f64::from(self.sample_rate) / self.fmax).floor() as usize).max(2)
    }

    fn max_lag(&self) -> usize {
        (f64::from(self.sample_rate) / self.fmin).ceil() as usize
    }
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self::for_rate(8000, 100)
    }
}

/// Per-frame F0 in Hz (0 where unvoiced).
#[derive(Clone, Debug, PartialEq)]
pub struct PitchTrack {
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl PitchTrack {
    pub fn new(f0: Vec<f64>) -> Self {
        let voiced = f0.iter().map(|&f| f > 0.0).collect();
        PitchTrack { f0, voiced }
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.f0.truncate(len);
        self.voiced.truncate(len);
    }
}

// Normalized square difference: 2 r(tau) / (m(tau)), values in [-1, 1].
fn nsdf(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let w = frame.len();
    let energy: Vec<f64> = {
        // prefix sums of squares
        let mut acc = Vec::with_capacity(w + 1);
        acc.push(0.0);
        for &x in frame {
            acc.push(acc.last().unwrap() + x * x);
        }
        acc
    };
    (0..=max_lag)
        .map(|tau| {
            let r: f64 = frame[..w - tau].iter().zip(&frame[tau..]).map(|(a, b)| a * b).sum();
            let m = energy[w - tau] + (energy[w] - energy[tau]);
            if m > 0.0 {
                2.0 * r / m
            } else {
                0.0
            }
        })
        .collect()
}

// Peak lag (fractional) and its height, or None.
fn pick_lag(n: &[f64], min_lag: usize, key_ratio: f64) -> Option<(f64, f64)> {
    let start = n.iter().position(|&v| v < 0.0)?;
    let mut peaks = Vec::new();
    let mut tau = start;
    while tau < n.len() {
        if n[tau] <= 0.0 {
            tau += 1;
            continue;
        }
        let lobe_start = tau;
        while tau < n.len() && n[tau] > 0.0 {
            tau += 1;
        }
        // lobes cut off by the search limit are not complete
        if tau == n.len() {
            break;
        }
        let best = (lobe_start..tau).max_by(|&a, &b| n[a].total_cmp(&n[b])).unwrap();
        if best >= min_lag && best > 0 && best + 1 < n.len() {
            peaks.push(best);
        }
    }
    let top = peaks.iter().map(|&p| n[p]).fold(f64::NEG_INFINITY, f64::max);
    let chosen = *peaks.iter().find(|&&p| n[p] >= key_ratio * top)?;
    let (a, b, c) = (n[chosen - 1], n[chosen], n[chosen + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let height = b - 0.25 * (a - c) * shift;
    Some((chosen as f64 + shift, height))
}

/// Estimates F0 on frames centred at multiples of `hop`, giving
/// `len / hop + 1` frames like the mel extractor.
pub fn estimate_f0(wave: &[f64], cfg: &PitchConfig) -> Result<PitchTrack> {
    cfg.validate()?;
    if wave.is_empty() {
        return Err(Error::Input("empty waveform".into()));
    }
    let n_frames = wave.len() / cfg.hop + 1;
    let half = cfg.window / 2;
    let max_lag = cfg.max_lag();
    let sr = f64::from(cfg.sample_rate);
    let mut frame = vec![0.0; cfg.window];
    let f0 = (0..n_frames)
        .map(|j| {
            let centre = j * cfg.hop;
            for (n, v) in frame.iter_mut().enumerate() {
                let pos = (centre + n) as isize - half as isize;
                *v = if pos >= 0 && (pos as usize) < wave.len() {
                    wave[pos as usize]
                } else {
                    0.0
                };
            }
            let rms = (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt();
            if rms < cfg.min_rms {
                return 0.0;
            }
            match pick_lag(&nsdf(&frame, max_lag), cfg.min_lag(), cfg.key_ratio) {
                Some((lag, height)) if height >= cfg.clarity => {
                    let f = sr / lag;
                    if (cfg.fmin..=cfg.fmax).contains(&f) {
                        f
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            }
        })
        .collect();
    Ok(PitchTrack::new(f0))
}
