use std::f64::consts::PI;
use std::fmt::Write as _;
use std::rc::Rc;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{mel_band_edges, StftConfig};
use crate::autograd::{Tensor, Var};
use crate::error::{Error, Result};

/// A frames x mel-bins matrix of log energies.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    pub n_frames: usize,
    pub n_mels: usize,
    /// Row-major, one frame per row.
    pub values: Vec<f64>,
}

impl MelSpectrogram {
    pub fn new(n_frames: usize, n_mels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_frames * n_mels {
            return Err(Error::Shape(format!(
                "mel matrix of {n_frames}x{n_mels} needs {} values, got {}",
                n_frames * n_mels,
                values.len()
            )));
        }
        Ok(MelSpectrogram { n_frames, n_mels, values })
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[self.n_frames, self.n_mels], self.values.clone())
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match *t.shape() {
            [f, m] => Self::new(f, m, t.data().to_vec()),
            ref s => Err(Error::Shape(format!("expected a [frames, mels] tensor, got {s:?}"))),
        }
    }

    /// Frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> MelSpectrogram {
        MelSpectrogram {
            n_frames: end - start,
            n_mels: self.n_mels,
            values: self.values[start * self.n_mels..end * self.n_mels].to_vec(),
        }
    }

    /// One frame per line, space separated, shortest round-trip numbers.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in 0..self.n_frames {
            for (i, v) in self.frame(t).iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut n_mels = None;
        let mut n_frames = 0;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("invalid number `{s}`") }))
                .collect::<Result<_>>()?;
            match n_mels {
                None => n_mels = Some(row.len()),
                Some(m) if m != row.len() => {
                    return Err(Error::Parse { line: i + 1, msg: format!("expected {m} values, found {}", row.len()) });
                }
                _ => {}
            }
            values.extend(row);
            n_frames += 1;
        }
        Self::new(n_frames, n_mels.unwrap_or(0), values)
    }
}

/// Reflects `i` into `[0, len)` as many times as needed.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

struct Filter {
    first_bin: usize,
    weights: Vec<f64>,
}

/// Precomputed window, filterbank and FFT plans for one [`StftConfig`].
pub struct MelExtractor {
    cfg: StftConfig,
    /// Hann window of length `win`, centred in `n_fft`.
    window: Vec<f64>,
    win_offset: usize,
    filters: Rc<Vec<Filter>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl MelExtractor {
    pub fn new(cfg: &StftConfig) -> Result<Self> {
        cfg.validate()?;
        let n_bins = cfg.n_fft / 2 + 1;
        let bin_hz = f64::from(cfg.sample_rate) / cfg.n_fft as f64;
        let edges = mel_band_edges(cfg);
        let filters = (0..cfg.n_mels)
            .map(|m| {
                let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let w: Vec<f64> = (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        ((f - lo) / (c - lo)).min((hi - f) / (hi - c)).max(0.0)
                    })
                    .collect();
                let first = w.iter().position(|&v| v > 0.0).unwrap_or(0);
                let last = w.iter().rposition(|&v| v > 0.0).map_or(first, |l| l + 1);
                Filter {
                    first_bin: first,
                    weights: w[first..last].to_vec(),
                }
            })
            .collect();
        // periodic Hann
        let window = (0..cfg.win)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / cfg.win as f64).cos())
            .collect();
        let mut planner = FftPlanner::new();
        Ok(MelExtractor {
            cfg: cfg.clone(),
            window,
            win_offset: (cfg.n_fft - cfg.win) / 2,
            filters: Rc::new(filters),
            forward: planner.plan_fft_forward(cfg.n_fft),
            inverse: planner.plan_fft_inverse(cfg.n_fft),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    /// Centre frequency in Hz of every mel filter.
    pub fn center_frequencies(&self) -> Vec<f64> {
        mel_band_edges(&self.cfg)[1..=self.cfg.n_mels].to_vec()
    }

    // Sample index feeding window tap n of frame j.
    fn source(&self, j: usize, n: usize, len: usize) -> usize {
        let pos = (j * self.cfg.hop + self.win_offset + n) as isize - (self.cfg.n_fft / 2) as isize;
        reflect(pos, len)
    }

    /// Returns (log-mel, linear mel, spectrum) for one waveform.
    fn analyse(&self, wave: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<Complex<f64>>) {
        let n_fft = self.cfg.n_fft;
        let n_bins = n_fft / 2 + 1;
        let n_frames = self.cfg.n_frames(wave.len());
        let n_mels = self.cfg.n_mels;
        let mut spectra = Vec::with_capacity(n_frames * n_bins);
        let mut mel = vec![0.0; n_frames * n_mels];
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for j in 0..n_frames {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (n, &w) in self.window.iter().enumerate() {
                buf[self.win_offset + n].re = w * wave[self.source(j, n, wave.len())];
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (m, f) in self.filters.iter().enumerate() {
                mel[j * n_mels + m] = f
                    .weights
                    .iter()
                    .zip(&buf[f.first_bin..])
                    .map(|(w, c)| w * c.norm_sqr())
                    .sum();
            }
            spectra.extend_from_slice(&buf[..n_bins]);
        }
        let floor = self.cfg.log_floor;
        let log = mel.iter().map(|&v| v.max(floor).ln()).collect();
        (log, mel, spectra)
    }

    pub fn compute(&self, wave: &[f64]) -> Result<MelSpectrogram> {
        if wave.is_empty() {
            return Err(Error::Input("empty waveform".into()));
        }
        let (log, _, _) = self.analyse(wave);
        MelSpectrogram::new(self.cfg.n_frames(wave.len()), self.cfg.n_mels, log)
    }

    /// Differentiable log-mel of a batch `[B, T] -> [B, frames, n_mels]`.
    pub fn forward<'t>(&self, wave: Var<'t>) -> Var<'t> {
        let value = wave.value();
        let [bsz, len] = *value.shape() else {
            panic!("log_mel expects [B, T], got {:?}", value.shape());
        };
        assert!(len > 0, "log_mel on an empty waveform");
        let n_frames = self.cfg.n_frames(len);
        let (n_mels, n_bins, n_fft) = (self.cfg.n_mels, self.cfg.n_fft / 2 + 1, self.cfg.n_fft);
        let mut out = Vec::with_capacity(bsz * n_frames * n_mels);
        let mut mels = Vec::with_capacity(bsz * n_frames * n_mels);
        let mut spectra = Vec::with_capacity(bsz * n_frames * n_bins);
        for b in 0..bsz {
            let (log, mel, spec) = self.analyse(&value.data()[b * len..(b + 1) * len]);
            out.extend(log);
            mels.extend(mel);
            spectra.extend(spec);
        }
        let filters = Rc::clone(&self.filters);
        let inverse = Arc::clone(&self.inverse);
        let window = self.window.clone();
        let (hop, win_offset, floor) = (self.cfg.hop, self.win_offset, self.cfg.log_floor);
        wave.tape().record(
            &[wave],
            Tensor::new(&[bsz, n_frames, n_mels], out),
            Box::new(move |g, _, _, _| {
                let mut gx = vec![0.0; bsz * len];
                let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
                let mut scratch = vec![Complex::new(0.0, 0.0); inverse.get_inplace_scratch_len()];
                let mut gp = vec![0.0; n_bins];
                for b in 0..bsz {
                    for j in 0..n_frames {
                        let row = (b * n_frames + j) * n_mels;
                        gp.iter_mut().for_each(|v| *v = 0.0);
                        let mut any = false;
                        for (m, f) in filters.iter().enumerate() {
                            let lin = mels[row + m];
                            // the floor clamps: no gradient below it
                            if lin <= floor {
                                continue;
                            }
                            let gm = g.data()[row + m] / lin;
                            any |= gm != 0.0;
                            for (k, w) in f.weights.iter().enumerate() {
                                gp[f.first_bin + k] += w * gm;
                            }
                        }
                        if !any {
                            continue;
                        }
                        let spec = &spectra[(b * n_frames + j) * n_bins..(b * n_frames + j + 1) * n_bins];
                        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
                        for k in 0..n_bins {
                            buf[k] = spec[k] * (2.0 * gp[k]);
                        }
                        inverse.process_with_scratch(&mut buf, &mut scratch);
                        for (n, &w) in window.iter().enumerate() {
                            let pos = (j * hop + win_offset + n) as isize - (n_fft / 2) as isize;
                            gx[b * len + reflect(pos, len)] += w * buf[win_offset + n].re;
                        }
                    }
                }
                vec![Some(Tensor::new(&[bsz, len], gx))]
            }),
        )
    }
}

/// One-shot log-mel extraction.
pub fn mel_spectrogram(wave: &[f64], cfg: &StftConfig) -> Result<MelSpectrogram> {
    MelExtractor::new(cfg)?.compute(wave)
}

/// Differentiable log-mel of a batch `[B, T]`.
pub fn log_mel<'t>(extractor: &MelExtractor, wave: Var<'t>) -> Var<'t> {
    extractor.forward(wave)
}
