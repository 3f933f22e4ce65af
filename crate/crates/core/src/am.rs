//! Toy acoustic model: phoneme/pitch encoder, duration predictor, length
//! regulator and a frame-wise mel decoder.

use std::rc::Rc;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use crate::autograd::{concat, Tensor, Var};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::nn::{init_uniform, Bound, Linear, ParamId, ParamStore};
use crate::score::{MusicScore, PhonemeInventory, Pitch};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    /// Bidirectional LSTM.
    Recurrent,
    /// Single-head self-attention blocks.
    SelfAttention,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Recurrent => "recurrent",
            EncoderKind::SelfAttention => "self_attention",
        }
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recurrent" => Ok(EncoderKind::Recurrent),
            "self_attention" => Ok(EncoderKind::SelfAttention),
            _ => Err(Error::Config(format!(
                "unknown encoder kind `{s}` (expected recurrent or self_attention)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmConfig {
    pub encoder_kind: EncoderKind,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub phoneme_vocab: usize,
    pub n_mels: usize,
}

impl AmConfig {
    pub fn toy(phoneme_vocab: usize, n_mels: usize) -> Self {
        AmConfig {
            encoder_kind: EncoderKind::SelfAttention,
            hidden_dim: 32,
            n_layers: 2,
            phoneme_vocab,
            n_mels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.n_layers == 0 || self.phoneme_vocab == 0 || self.n_mels == 0 {
            return Err(Error::Config("am: hidden_dim, n_layers, phoneme_vocab and n_mels must be >= 1".into()));
        }
        if self.encoder_kind == EncoderKind::Recurrent && self.hidden_dim % 2 != 0 {
            return Err(Error::Config("am: the recurrent encoder needs an even hidden_dim".into()));
        }
        Ok(())
    }
}

/// Per-phoneme model input. One phoneme per score event.
#[derive(Clone, Debug, PartialEq)]
pub struct AmInput {
    pub phoneme_ids: Vec<usize>,
    pub midi: Vec<Option<u8>>,
    /// Written note length in frames (unrounded).
    pub note_frames: Vec<f64>,
}

impl AmInput {
    pub fn from_score(score: &MusicScore, inventory: &PhonemeInventory, frame_period: f64) -> Result<Self> {
        let mut input = AmInput {
            phoneme_ids: Vec::with_capacity(score.events.len()),
            midi: Vec::with_capacity(score.events.len()),
            note_frames: Vec::with_capacity(score.events.len()),
        };
        for e in &score.events {
            let id = inventory
                .id(&e.phoneme)
                .ok_or_else(|| Error::Input(format!("unknown phoneme `{}`", e.phoneme)))?;
            input.phoneme_ids.push(id);
            input.midi.push(match e.pitch {
                Pitch::Midi(m) => Some(m),
                Pitch::Rest => None,
            });
            input.note_frames.push(e.duration / frame_period);
        }
        Ok(input)
    }

    pub fn len(&self) -> usize {
        self.phoneme_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phoneme_ids.is_empty()
    }

    fn pitch_features(&self) -> Tensor {
        let mut data = Vec::with_capacity(self.len() * 3);
        for (m, d) in self.midi.iter().zip(&self.note_frames) {
            match m {
                Some(m) => data.extend([1.0, (f64::from(*m) - 60.0) / 12.0]),
                None => data.extend([0.0, 0.0]),
            }
            data.push((1.0 + d).ln() / 3.0);
        }
        Tensor::new(&[self.len(), 3], data)
    }
}

/// Output of one forward pass.
pub struct AmOutput<'t> {
    /// `[frames, n_mels]`
    pub mel: Var<'t>,
    /// `ln(1 + dur_pred)` per phoneme, `[n]`.
    pub log_dur: Var<'t>,
    /// Durations the regulator used.
    pub durations: Vec<usize>,
}

impl AmOutput<'_> {
    /// Predicted frame counts, strictly positive.
    pub fn dur_pred(&self) -> Vec<f64> {
        self.log_dur.value().data().iter().map(|v| v.exp_m1()).collect()
    }

    pub fn n_frames(&self) -> usize {
        self.mel.shape()[0]
    }
}

fn rows<'t>(x: Var<'t>, start: usize, end: usize) -> Var<'t> {
    let w = x.shape()[1];
    x.gather(Rc::new((start * w..end * w).collect()), &[end - start, w])
}

fn cols<'t>(x: Var<'t>, start: usize, end: usize) -> Var<'t> {
    let [r, c] = x.shape()[..] else { unreachable!() };
    let idx = (0..r).flat_map(|i| (start..end).map(move |j| i * c + j)).collect();
    x.gather(Rc::new(idx), &[r, end - start])
}

/// Frame `j` takes row `k` of `hidden` when `j` falls in phoneme `k`'s span.
pub fn length_regulate<'t>(hidden: Var<'t>, durations: &[usize]) -> Result<Var<'t>> {
    let [n, h] = hidden.shape()[..] else {
        return Err(Error::Shape(format!("length_regulate needs [n, H], got {:?}", hidden.shape())));
    };
    if durations.len() != n {
        return Err(Error::Shape(format!("{} durations for {n} phonemes", durations.len())));
    }
    let total: usize = durations.iter().sum();
    if total == 0 {
        return Err(Error::Input("all durations are zero".into()));
    }
    let idx: Vec<usize> = durations
        .iter()
        .enumerate()
        .flat_map(|(k, &d)| (0..d).flat_map(move |_| k * h..(k + 1) * h))
        .collect();
    Ok(hidden.gather(Rc::new(idx), &[total, h]))
}

#[derive(Clone, Debug)]
struct AttentionBlock {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    ff1: Linear,
    ff2: Linear,
}

#[derive(Clone, Debug)]
struct LstmCell {
    w_x: ParamId,
    w_h: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug)]
enum Encoder {
    Attention(Vec<AttentionBlock>),
    Recurrent(Vec<(LstmCell, LstmCell)>),
}

#[derive(Clone, Debug)]
pub struct AcousticModel {
    pub cfg: AmConfig,
    pub params: ParamStore,
    embed: ParamId,
    pitch_proj: Linear,
    encoder: Encoder,
    dur_head: Linear,
    pos_proj: Linear,
    decoder: Vec<Linear>,
    head: Linear,
}

impl AcousticModel {
    pub fn new(cfg: &AmConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let h = cfg.hidden_dim;
        let mut s = ParamStore::new();
        let embed = s.add("am.embed", init_uniform(rng, &[cfg.phoneme_vocab, h], 1));
        let pitch_proj = Linear::new(&mut s, rng, "am.pitch", 3, h);
        let encoder = match cfg.encoder_kind {
            EncoderKind::SelfAttention => Encoder::Attention(
                (0..cfg.n_layers)
                    .map(|l| {
                        let n = |part: &str| format!("am.enc{l}.{part}");
                        AttentionBlock {
                            q: Linear::new(&mut s, rng, &n("q"), h, h),
                            k: Linear::new(&mut s, rng, &n("k"), h, h),
                            v: Linear::new(&mut s, rng, &n("v"), h, h),
                            o: Linear::new(&mut s, rng, &n("o"), h, h),
                            ff1: Linear::new(&mut s, rng, &n("ff1"), h, 2 * h),
                            ff2: Linear::new(&mut s, rng, &n("ff2"), 2 * h, h),
                        }
                    })
                    .collect(),
            ),
            EncoderKind::Recurrent => Encoder::Recurrent(
                (0..cfg.n_layers)
                    .map(|l| {
                        let mut cell = |dir: &str| {
                            let half = h / 2;
                            let name = format!("am.lstm{l}.{dir}");
                            let w_x = s.add(format!("{name}.w_x"), init_uniform(rng, &[h, 4 * half], h));
                            let w_h = s.add(format!("{name}.w_h"), init_uniform(rng, &[half, 4 * half], half));
                            // forget gate starts open
                            let b = Tensor::from_fn(&[4 * half], |i| if (half..2 * half).contains(&i) { 1.0 } else { 0.0 });
                            let bias = s.add(format!("{name}.bias"), b);
                            LstmCell { w_x, w_h, bias }
                        };
                        (cell("fwd"), cell("bwd"))
                    })
                    .collect(),
            ),
        };
        let dur_head = Linear::new(&mut s, rng, "am.dur", h, 1);
        let pos_proj = Linear::new(&mut s, rng, "am.pos", 3, h);
        let decoder = (0..cfg.n_layers)
            .map(|l| Linear::new(&mut s, rng, &format!("am.dec{l}"), h, h))
            .collect();
        let head = Linear::new(&mut s, rng, "am.head", h, cfg.n_mels);
        Ok(AcousticModel {
            cfg: cfg.clone(),
            params: s,
            embed,
            pitch_proj,
            encoder,
            dur_head,
            pos_proj,
            decoder,
            head,
        })
    }

    /// Sets the output-head bias, e.g. to the per-bin mean of the training mels.
    pub fn set_output_bias(&mut self, bias: &[f64]) -> Result<()> {
        if bias.len() != self.cfg.n_mels {
            return Err(Error::Shape(format!("{} bias values for {} mel bins", bias.len(), self.cfg.n_mels)));
        }
        self.params.get_mut(self.head.bias).data_mut().copy_from_slice(bias);
        Ok(())
    }

    pub fn zero_output_weights(&mut self) {
        self.params.get_mut(self.head.weight).data_mut().fill(0.0);
    }

    /// One hidden vector per phoneme, `[n, hidden_dim]`.
    pub fn encode<'t>(&self, p: &Bound<'t>, input: &AmInput) -> Result<Var<'t>> {
        let n = input.len();
        if n == 0 {
            return Err(Error::EmptyScore);
        }
        if input.midi.len() != n || input.note_frames.len() != n {
            return Err(Error::Shape("am input fields differ in length".into()));
        }
        let h = self.cfg.hidden_dim;
        if let Some(&bad) = input.phoneme_ids.iter().find(|&&id| id >= self.cfg.phoneme_vocab) {
            return Err(Error::Input(format!(
                "token {bad} out of vocabulary of size {}",
                self.cfg.phoneme_vocab
            )));
        }
        let tape = p.get(self.embed).tape();
        let idx: Vec<usize> = input.phoneme_ids.iter().flat_map(|&id| id * h..(id + 1) * h).collect();
        let emb = p.get(self.embed).gather(Rc::new(idx), &[n, h]);
        let pitch = self.pitch_proj.forward(p, tape.constant(input.pitch_features()));
        let mut x = emb + pitch;
        match &self.encoder {
            Encoder::Attention(blocks) => {
                x = x + tape.constant(sinusoid(n, h));
                let scale = 1.0 / (h as f64).sqrt();
                for b in blocks {
                    let q = b.q.forward(p, x);
                    let k = b.k.forward(p, x);
                    let v = b.v.forward(p, x);
                    let att = q.matmul(k.transpose2d()).scale(scale).softmax_last();
                    x = x + b.o.forward(p, att.matmul(v));
                    let ff = b.ff2.forward(p, b.ff1.forward(p, x).leaky_relu(0.1));
                    x = x + ff;
                }
            }
            Encoder::Recurrent(layers) => {
                for (fwd, bwd) in layers {
                    let f = run_lstm(p, fwd, x, false);
                    let b = run_lstm(p, bwd, x, true);
                    let parts: Vec<Var<'t>> = (0..n).flat_map(|t| [f[t], b[t]]).collect();
                    x = concat(&parts).reshape(&[n, h]);
                }
            }
        }
        Ok(x)
    }

    /// Teacher-forced when `durations` is given; otherwise regulates with
    /// `round(dur_pred)`.
    pub fn forward<'t>(&self, p: &Bound<'t>, input: &AmInput, durations: Option<&[usize]>) -> Result<AmOutput<'t>> {
        let hidden = self.encode(p, input)?;
        let n = input.len();
        let log_dur = self.dur_head.forward(p, hidden).softplus().reshape(&[n]);
        let durations: Vec<usize> = match durations {
            Some(d) => d.to_vec(),
            None => log_dur.value().data().iter().map(|v| v.exp_m1().round() as usize).collect(),
        };
        let frames = length_regulate(hidden, &durations)?;
        let tape = hidden.tape();
        let mut x = frames + self.pos_proj.forward(p, tape.constant(position_features(&durations)));
        for layer in &self.decoder {
            x = x + layer.forward(p, x).leaky_relu(0.1);
        }
        let mel = self.head.forward(p, x);
        Ok(AmOutput { mel, log_dur, durations })
    }
}

/// Components of the acoustic-model objective.
pub struct AmLoss<'t> {
    pub l_d: Var<'t>,
    pub l_ma: Var<'t>,
    pub l_am: Var<'t>,
}

/// `L_ma = MAE(mel, x)`, `L_d = MSE(ln(1 + dur_pred), ln(1 + gt))`.
pub fn am_loss<'t>(out: &AmOutput<'t>, x: Var<'t>, gt_durations: &[usize], w: &LossWeights) -> Result<AmLoss<'t>> {
    if out.mel.shape() != x.shape() {
        return Err(Error::Shape(format!("mel {:?} vs target {:?}", out.mel.shape(), x.shape())));
    }
    if gt_durations.len() != out.log_dur.shape()[0] {
        return Err(Error::Shape(format!(
            "{} target durations for {} phonemes",
            gt_durations.len(),
            out.log_dur.shape()[0]
        )));
    }
    let tape = x.tape();
    let target = tape.constant(Tensor::new(
        &[gt_durations.len()],
        gt_durations.iter().map(|&d| (d as f64).ln_1p()).collect(),
    ));
    let l_d = (out.log_dur - target).square().mean();
    let l_ma = (out.mel - x).abs().mean();
    let l_am = l_d.scale(w.lambda_d) + l_ma.scale(w.lambda_ma);
    Ok(AmLoss { l_d, l_ma, l_am })
}

fn sinusoid(n: usize, h: usize) -> Tensor {
    Tensor::from_fn(&[n, h], |i| {
        let (pos, d) = ((i / h) as f64, i % h);
        let rate = 1.0 / 100f64.powf((d / 2 * 2) as f64 / h as f64);
        if d % 2 == 0 {
            (pos * rate).sin()
        } else {
            (pos * rate).cos()
        }
    })
}

/// Per-frame `[u, 4u(1-u), 1/(1+d)]` with `u` the relative position in its phoneme.
fn position_features(durations: &[usize]) -> Tensor {
    let mut data = Vec::new();
    for &d in durations {
        for j in 0..d {
            let u = (j as f64 + 0.5) / d as f64;
            data.extend([u, 4.0 * u * (1.0 - u), 1.0 / (1.0 + d as f64)]);
        }
    }
    let frames = data.len() / 3;
    Tensor::new(&[frames, 3], data)
}

fn run_lstm<'t>(p: &Bound<'t>, cell: &LstmCell, x: Var<'t>, reverse: bool) -> Vec<Var<'t>> {
    let n = x.shape()[0];
    let half = p.get(cell.w_h).shape()[0];
    let tape = x.tape();
    let xw = x.matmul(p.get(cell.w_x)).add_bias_last(p.get(cell.bias));
    let mut h = tape.constant(Tensor::zeros(&[1, half]));
    let mut c = tape.constant(Tensor::zeros(&[1, half]));
    let mut out = vec![h; n];
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    for t in order {
        let gates = rows(xw, t, t + 1) + h.matmul(p.get(cell.w_h));
        let i = cols(gates, 0, half).sigmoid();
        let f = cols(gates, half, 2 * half).sigmoid();
        let g = cols(gates, 2 * half, 3 * half).tanh();
        let o = cols(gates, 3 * half, 4 * half).sigmoid();
        c = f * c + i * g;
        h = o * c.tanh();
        out[t] = h.reshape(&[half]);
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;

    use super::*;
    use crate::autograd::check::{numeric_gradient, relative_error};
    use crate::autograd::Tape;

    fn input() -> AmInput {
        AmInput {
            phoneme_ids: vec![1, 3],
            midi: vec![Some(62), None],
            note_frames: vec![3.2, 1.9],
        }
    }

    fn model(kind: EncoderKind) -> AcousticModel {
        let cfg = AmConfig {
            encoder_kind: kind,
            hidden_dim: 4,
            n_layers: 1,
            phoneme_vocab: 5,
            n_mels: 3,
        };
        AcousticModel::new(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    #[test]
    fn regulator_pattern() {
        let tape = Tape::new();
        let h = tape.constant(Tensor::new(&[3, 2], vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5]));
        let r = length_regulate(h, &[2, 3, 1]).unwrap().value();
        assert_eq!(r.shape(), &[6, 2]);
        let firsts: Vec<f64> = (0..6).map(|i| r.row(i)[0]).collect();
        assert_eq!(firsts, vec![1.0, 1.0, 2.0, 2.0, 2.0, 3.0]);
        let id = length_regulate(h, &[1, 1, 1]).unwrap().value();
        assert_eq!(id.data(), h.value().data());
        assert!(length_regulate(h, &[0, 0, 0]).is_err());
    }

    #[test]
    fn shapes_and_determinism() {
        for kind in [EncoderKind::SelfAttention, EncoderKind::Recurrent] {
            let m = model(kind);
            let tape = Tape::new();
            let p = m.params.bind(&tape, false);
            let enc = m.encode(&p, &input()).unwrap();
            assert_eq!(enc.shape(), vec![2, 4]);
            let a = m.forward(&p, &input(), Some(&[3, 2])).unwrap();
            let b = m.forward(&p, &input(), Some(&[3, 2])).unwrap();
            assert_eq!(a.mel.shape(), vec![5, 3]);
            assert_eq!(a.mel.value().data(), b.mel.value().data());
            assert!(a.dur_pred().iter().all(|&d| d > 0.0));
            let inf = m.forward(&p, &input(), None);
            if let Ok(inf) = inf {
                let want: usize = inf.dur_pred().iter().map(|d| d.round() as usize).sum();
                assert_eq!(inf.n_frames(), want);
            }
            let bad = AmInput { phoneme_ids: vec![9], midi: vec![None], note_frames: vec![1.0] };
            assert!(m.encode(&p, &bad).is_err());
        }
    }

    #[test]
    fn single_token_encoding_is_order_free() {
        // one token: the attention mix is the identity
        let m = model(EncoderKind::SelfAttention);
        let tape = Tape::new();
        let p = m.params.bind(&tape, false);
        let one = AmInput { phoneme_ids: vec![2], midi: vec![Some(60)], note_frames: vec![4.0] };
        let a = m.encode(&p, &one).unwrap().value();
        let b = m.encode(&p, &one).unwrap().value();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn zero_head_emits_bias() {
        let mut m = model(EncoderKind::Recurrent);
        m.zero_output_weights();
        m.set_output_bias(&[0.5, -1.0, 2.0]).unwrap();
        let tape = Tape::new();
        let p = m.params.bind(&tape, false);
        let out = m.forward(&p, &input(), Some(&[2, 2])).unwrap();
        for t in 0..4 {
            assert_eq!(out.mel.value().row(t), &[0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn loss_cases() {
        let m = model(EncoderKind::SelfAttention);
        let w = LossWeights::default();
        let tape = Tape::new();
        let p = m.params.bind(&tape, false);
        let out = m.forward(&p, &input(), Some(&[2, 1])).unwrap();
        let gt = [2usize, 1];
        let exact = AmOutput {
            mel: out.mel,
            log_dur: tape.constant(Tensor::new(&[2], vec![2f64.ln_1p(), 1f64.ln_1p()])),
            durations: gt.to_vec(),
        };
        let x = tape.constant((*out.mel.value()).clone());
        assert_eq!(am_loss(&exact, x, &gt, &w).unwrap().l_am.item(), 0.0);
        let shifted = tape.constant(out.mel.value().map(|v| v - 1.0));
        assert!((am_loss(&exact, shifted, &gt, &w).unwrap().l_am.item() - 1.0).abs() < 1e-12);

        // brute force against an independent summation
        let target = Tensor::from_fn(&[3, 3], |i| (i as f64 * 0.37).sin());
        let gt = [2usize, 4];
        let l = am_loss(&out, tape.constant(target.clone()), &gt, &w).unwrap();
        let mel = out.mel.value();
        let mut mae = 0.0;
        for i in 0..9 {
            mae += (mel.data()[i] - target.data()[i]).abs();
        }
        mae /= 9.0;
        let mut mse = 0.0;
        for (k, &g) in gt.iter().enumerate() {
            let pred = out.dur_pred()[k];
            mse += ((1.0 + pred).ln() - (1.0 + g as f64).ln()).powi(2);
        }
        mse /= 2.0;
        assert!((l.l_ma.item() - mae).abs() < 1e-12);
        assert!((l.l_d.item() - mse).abs() < 1e-12);
        assert!((l.l_am.item() - (mse + mae)).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [EncoderKind::SelfAttention, EncoderKind::Recurrent] {
            let m = model(kind);
            let target = Tensor::from_fn(&[5, 3], |i| (i as f64 * 0.61).cos() - 0.5);
            let gt = [3usize, 2];
            let w = LossWeights::default();
            let loss_at = |store: &ParamStore| {
                let tape = Tape::new();
                let p = store.bind(&tape, false);
                let out = m.forward(&p, &input(), Some(&gt)).unwrap();
                am_loss(&out, tape.constant(target.clone()), &gt, &w).unwrap().l_am.item()
            };
            let tape = Tape::new();
            let p = m.params.bind(&tape, true);
            let out = m.forward(&p, &input(), Some(&gt)).unwrap();
            let loss = am_loss(&out, tape.constant(target.clone()), &gt, &w).unwrap();
            let mut grads = tape.backward(loss.l_am);
            let analytic = p.grads(&mut grads);
            for (id, a) in m.params.ids().zip(&analytic) {
                let numeric = numeric_gradient(
                    |t| {
                        let mut s = m.params.clone();
                        *s.get_mut(id) = t.clone();
                        loss_at(&s)
                    },
                    m.params.get(id),
                    1e-3,
                );
                let a = a.as_ref().unwrap();
                for (x, y) in a.data().iter().zip(numeric.data()) {
                    assert!(relative_error(*x, *y, 1e-3) < 1e-4, "{} {kind:?}: {x} vs {y}", m.params.name(id));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn regulator_conserves_frames(d in prop::collection::vec(0usize..6, 1..8)) {
            prop_assume!(d.iter().sum::<usize>() > 0);
            let tape = Tape::new();
            let h = tape.constant(Tensor::from_fn(&[d.len(), 3], |i| i as f64));
            let out = length_regulate(h, &d).unwrap();
            prop_assert_eq!(out.shape()[0], d.iter().sum::<usize>());
        }
    }
}
