//! Toy GAN vocoder: a transposed-convolution generator and multi-period /
//! multi-scale discriminators.

use std::rc::Rc;

use rand_chacha::ChaCha8Rng;

use crate::autograd::{Conv1dSpec, Tape, Tensor, Var};
use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use crate::nn::{Bound, Conv1d, ParamStore, Upsample1d};

const SLOPE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct VocConfig {
    pub upsample_factors: Vec<usize>,
    /// Generator width after the input convolution; halves at every upsampling stage.
    pub channels: usize,
    pub resblock_dilations: Vec<usize>,
    pub periods: Vec<usize>,
    pub n_scales: usize,
    pub disc_channels: usize,
}

impl VocConfig {
    pub fn desk() -> Self {
        VocConfig {
            upsample_factors: vec![5, 5, 4],
            channels: 32,
            resblock_dilations: vec![1, 3],
            periods: vec![2, 3],
            n_scales: 2,
            disc_channels: 8,
        }
    }

    pub fn hop(&self) -> usize {
        self.upsample_factors.iter().product()
    }

    pub fn validate(&self, hop: usize) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("voc: {m}")));
        if self.upsample_factors.is_empty() || self.upsample_factors.contains(&0) {
            return fail("upsample factors must be positive".into());
        }
        if self.hop() != hop {
            return fail(format!("upsample factors multiply to {}, hop is {hop}", self.hop()));
        }
        if self.channels >> self.upsample_factors.len() == 0 {
            return fail(format!(
                "{} channels cannot halve over {} stages",
                self.channels,
                self.upsample_factors.len()
            ));
        }
        for (i, &p) in self.periods.iter().enumerate() {
            if p < 2 || self.periods[..i].contains(&p) {
                return fail("periods must be distinct and at least 2".into());
            }
        }
        if self.periods.is_empty() && self.n_scales == 0 {
            return fail("at least one discriminator is needed".into());
        }
        if self.disc_channels == 0 {
            return fail("disc_channels must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct ResBlock {
    convs: Vec<Conv1d>,
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub cfg: VocConfig,
    pub params: ParamStore,
    pre: Conv1d,
    ups: Vec<(Upsample1d, ResBlock)>,
    post: Conv1d,
    n_mels: usize,
}

impl Generator {
    pub fn new(cfg: &VocConfig, n_mels: usize, hop: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate(hop)?;
        let mut s = ParamStore::new();
        let pre = Conv1d::new(&mut s, rng, "gen.pre", (n_mels, cfg.channels, 7), Conv1dSpec::same(7, 1));
        let mut ch = cfg.channels;
        let mut ups = Vec::new();
        for (i, &u) in cfg.upsample_factors.iter().enumerate() {
            let up = Upsample1d::new(&mut s, rng, &format!("gen.up{i}"), ch, ch / 2, u);
            ch /= 2;
            let convs = cfg
                .resblock_dilations
                .iter()
                .enumerate()
                .map(|(j, &d)| Conv1d::new(&mut s, rng, &format!("gen.res{i}.{j}"), (ch, ch, 3), Conv1dSpec::same(3, d)))
                .collect();
            ups.push((up, ResBlock { convs }));
        }
        let post = Conv1d::new(&mut s, rng, "gen.post", (ch, 1, 7), Conv1dSpec::same(7, 1));
        Ok(Generator {
            cfg: cfg.clone(),
            params: s,
            pre,
            ups,
            post,
            n_mels,
        })
    }

    pub fn zero_output_weights(&mut self) {
        self.params.get_mut(self.post.weight).data_mut().fill(0.0);
    }

    /// `mel[B, n_mels, F] -> waveform[B, F * hop]`, bounded by `tanh`.
    pub fn forward<'t>(&self, p: &Bound<'t>, mel: Var<'t>) -> Var<'t> {
        let [b, m, f] = mel.shape()[..] else {
            panic!("generator input must be [B, n_mels, F], got {:?}", mel.shape());
        };
        assert_eq!(m, self.n_mels, "generator mel bins");
        let mut x = self.pre.forward(p, mel);
        for (up, res) in &self.ups {
            x = up.forward(p, x.leaky_relu(SLOPE));
            for conv in &res.convs {
                x = x + conv.forward(p, x.leaky_relu(SLOPE));
            }
        }
        self.post.forward(p, x.leaky_relu(SLOPE)).tanh().reshape(&[b, f * self.cfg.hop()])
    }

    /// Inference on a frames x bins matrix.
    pub fn generate(&self, mel: &MelSpectrogram) -> Result<Vec<f64>> {
        if mel.n_frames == 0 {
            return Err(Error::Input("empty mel".into()));
        }
        if mel.n_mels != self.n_mels {
            return Err(Error::Shape(format!("mel has {} bins, generator expects {}", mel.n_mels, self.n_mels)));
        }
        let tape = Tape::new();
        let p = self.params.bind(&tape, false);
        let x = mel_to_channels(tape.constant(mel.to_tensor()));
        Ok(self.forward(&p, x).value().data().to_vec())
    }
}

/// `[F, n_mels] -> [1, n_mels, F]`
pub fn mel_to_channels(mel: Var<'_>) -> Var<'_> {
    let [f, m] = mel.shape()[..] else {
        panic!("expected [F, n_mels], got {:?}", mel.shape());
    };
    mel.transpose2d().reshape(&[1, m, f])
}

/// Score maps and intermediate activations of every discriminator, periods first.
pub struct DiscOutput<'t> {
    pub scores: Vec<Var<'t>>,
    pub features: Vec<Vec<Var<'t>>>,
}

#[derive(Clone, Debug)]
struct Stack {
    layers: Vec<Conv1d>,
    post: Conv1d,
}

impl Stack {
    fn run<'t>(&self, p: &Bound<'t>, mut x: Var<'t>, feats: &mut Vec<Var<'t>>) -> Var<'t> {
        for l in &self.layers {
            x = l.forward(p, x).leaky_relu(SLOPE);
            feats.push(x);
        }
        self.post.forward(p, x)
    }

    fn out_len(&self, store: &ParamStore, mut len: usize) -> usize {
        for l in self.layers.iter().chain([&self.post]) {
            if len == 0 {
                return 0;
            }
            len = l.out_len(store, len);
        }
        len
    }
}

#[derive(Clone, Debug)]
pub struct Discriminators {
    pub params: ParamStore,
    periods: Vec<(usize, Stack)>,
    scales: Vec<Stack>,
}

// Averaging by 4 with stride 2, as a fixed convolution.
const POOL: Conv1dSpec = Conv1dSpec {
    stride: 2,
    dilation: 1,
    pad_left: 1,
    pad_right: 2,
};

impl Discriminators {
    pub fn new(cfg: &VocConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let c = cfg.disc_channels;
        let mut s = ParamStore::new();
        let periods = cfg
            .periods
            .iter()
            .map(|&per| {
                let n = |l: &str| format!("mpd{per}.{l}");
                let stack = Stack {
                    layers: vec![
                        Conv1d::new(&mut s, rng, &n("0"), (1, c, 5), Conv1dSpec::strided(5, 3)),
                        Conv1d::new(&mut s, rng, &n("1"), (c, 2 * c, 5), Conv1dSpec::strided(5, 3)),
                        Conv1d::new(&mut s, rng, &n("2"), (2 * c, 2 * c, 3), Conv1dSpec::same(3, 1)),
                    ],
                    post: Conv1d::new(&mut s, rng, &n("post"), (2 * c, 1, 3), Conv1dSpec::same(3, 1)),
                };
                (per, stack)
            })
            .collect();
        let scales = (0..cfg.n_scales)
            .map(|i| {
                let n = |l: &str| format!("msd{i}.{l}");
                Stack {
                    layers: vec![
                        Conv1d::new(&mut s, rng, &n("0"), (1, c, 15), Conv1dSpec::same(15, 1)),
                        Conv1d::new(&mut s, rng, &n("1"), (c, 2 * c, 9), Conv1dSpec::strided(9, 4)),
                        Conv1d::new(&mut s, rng, &n("2"), (2 * c, 2 * c, 5), Conv1dSpec::same(5, 1)),
                    ],
                    post: Conv1d::new(&mut s, rng, &n("post"), (2 * c, 1, 3), Conv1dSpec::same(3, 1)),
                }
            })
            .collect();
        Ok(Discriminators { params: s, periods, scales })
    }

    pub fn len(&self) -> usize {
        self.periods.len() + self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest waveform length every branch accepts.
    pub fn min_length(&self) -> usize {
        (1..).find(|&len| self.check_length(len).is_ok()).unwrap()
    }

    fn check_length(&self, len: usize) -> Result<()> {
        for (per, stack) in &self.periods {
            if len < *per || stack.out_len(&self.params, len.div_ceil(*per)) == 0 {
                return Err(Error::Input(format!("waveform of {len} samples too short for period {per}")));
            }
        }
        let mut l = len;
        for (i, stack) in self.scales.iter().enumerate() {
            if i > 0 {
                l = POOL.out_len(l, 4);
            }
            if l == 0 || stack.out_len(&self.params, l) == 0 {
                return Err(Error::Input(format!("waveform of {len} samples too short for scale {i}")));
            }
        }
        Ok(())
    }

    /// `w[B, T]`; period branches zero-pad `T` up to a multiple of the period.
    pub fn forward<'t>(&self, p: &Bound<'t>, w: Var<'t>) -> Result<DiscOutput<'t>> {
        let [b, t] = w.shape()[..] else {
            return Err(Error::Shape(format!("discriminator input must be [B, T], got {:?}", w.shape())));
        };
        self.check_length(t)?;
        let tape = w.tape();
        let mut out = DiscOutput { scores: Vec::new(), features: Vec::new() };
        for (per, stack) in &self.periods {
            let rows = t.div_ceil(*per);
            // [b, t] -> [b * per, 1, rows]; column j holds samples j, j + per, ...
            let idx: Vec<usize> = (0..b)
                .flat_map(|bi| {
                    (0..*per).flat_map(move |j| {
                        (0..rows).map(move |r| {
                            let s = r * per + j;
                            if s < t {
                                bi * t + s
                            } else {
                                crate::autograd::ZERO_INDEX
                            }
                        })
                    })
                })
                .collect();
            let grid = w.gather(Rc::new(idx), &[b * per, 1, rows]);
            let mut feats = Vec::new();
            out.scores.push(stack.run(p, grid, &mut feats));
            out.features.push(feats);
        }
        let mut x = w.reshape(&[b, 1, t]);
        let pool = tape.constant(Tensor::full(&[1, 1, 4], 0.25));
        for (i, stack) in self.scales.iter().enumerate() {
            if i > 0 {
                x = x.conv1d(pool, None, POOL);
            }
            let mut feats = Vec::new();
            out.scores.push(stack.run(p, x, &mut feats));
            out.features.push(feats);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::autograd::check::{numeric_gradient, relative_error};
    use crate::losses::{adversarial_generator_loss, discriminator_loss, feature_matching_loss};

    fn micro() -> VocConfig {
        VocConfig {
            upsample_factors: vec![2, 2],
            channels: 4,
            resblock_dilations: vec![1],
            periods: vec![2],
            n_scales: 1,
            disc_channels: 2,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(9)
    }

    fn random_mel(frames: usize, bins: usize, seed: u64) -> MelSpectrogram {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        MelSpectrogram::new(frames, bins, (0..frames * bins).map(|_| r.random_range(-3.0..0.0)).collect()).unwrap()
    }

    #[test]
    fn config_checks() {
        assert!(VocConfig::desk().validate(100).is_ok());
        assert!(VocConfig::desk().validate(80).is_err());
        let dup = VocConfig { periods: vec![2, 2], ..VocConfig::desk() };
        assert!(dup.validate(100).is_err());
        let one = VocConfig { periods: vec![1], ..VocConfig::desk() };
        assert!(one.validate(100).is_err());
    }

    #[test]
    fn generator_contracts() {
        let g = Generator::new(&VocConfig::desk(), 40, 100, &mut rng()).unwrap();
        let mel = random_mel(10, 40, 1);
        let a = g.generate(&mel).unwrap();
        assert_eq!(a.len(), 1000);
        assert!(a.iter().all(|v| v.abs() < 1.0));
        assert_eq!(a, g.generate(&mel).unwrap());
        assert!(g.generate(&MelSpectrogram::new(0, 40, vec![]).unwrap()).is_err());

        let mut z = g.clone();
        z.zero_output_weights();
        let bias = z.params.get(z.post.bias).data()[0];
        let w = z.generate(&mel).unwrap();
        assert!(w.iter().all(|&v| v == bias.tanh()));
    }

    #[test]
    fn discriminator_shapes() {
        let cfg = VocConfig::desk();
        let d = Discriminators::new(&cfg, &mut rng()).unwrap();
        let tape = Tape::new();
        let p = d.params.bind(&tape, false);
        let t = 1001;
        let w = tape.constant(Tensor::from_fn(&[2, t], |i| (i as f64 * 0.01).sin()));
        let out = d.forward(&p, w).unwrap();
        assert_eq!(out.scores.len(), 4);
        // period branches: ceil(t / p) rows, two stride-3 convolutions
        for (i, &per) in cfg.periods.iter().enumerate() {
            let rows = t.div_ceil(per);
            let l1 = (rows + 4 - 5) / 3 + 1;
            let l2 = (l1 + 4 - 5) / 3 + 1;
            assert_eq!(out.scores[i].shape(), vec![2 * per, 1, l2]);
            assert_eq!(out.features[i].len(), 3);
        }
        // scale branches: stride 4 once, plus the pooling for the second
        let s0 = (t + 8 - 9) / 4 + 1;
        assert_eq!(out.scores[2].shape(), vec![2, 1, s0]);
        let pooled = (t + 3 - 4) / 2 + 1;
        assert_eq!(out.scores[3].shape(), vec![2, 1, (pooled + 8 - 9) / 4 + 1]);
        let again = d.forward(&p, w).unwrap();
        for (a, b) in out.features.iter().flatten().zip(again.features.iter().flatten()) {
            assert_eq!(a.value().data(), b.value().data());
        }
        let short = tape.constant(Tensor::zeros(&[1, 1]));
        assert!(d.forward(&p, short).is_err());
        assert!(d.min_length() > 1);
    }

    #[test]
    fn period_padding_is_zero() {
        let cfg = VocConfig { periods: vec![3], n_scales: 0, ..micro() };
        let d = Discriminators::new(&cfg, &mut rng()).unwrap();
        let tape = Tape::new();
        let p = d.params.bind(&tape, false);
        // 7 samples pad to 9; the padded tail must equal an explicit zero tail
        let base: Vec<f64> = (0..7).map(|i| 0.1 * i as f64 + 0.05).collect();
        let padded = [base.clone(), vec![0.0, 0.0]].concat();
        let a = d.forward(&p, tape.constant(Tensor::new(&[1, 7], base))).unwrap();
        let b = d.forward(&p, tape.constant(Tensor::new(&[1, 9], padded))).unwrap();
        assert_eq!(a.scores[0].value().data(), b.scores[0].value().data());
    }

    fn all_nonzero(grads: &[Option<Tensor>]) -> bool {
        grads.iter().all(|g| g.as_ref().is_some_and(|t| t.data().iter().any(|&v| v != 0.0)))
    }

    #[test]
    fn end_to_end_gradients_reach_every_parameter() {
        let cfg = VocConfig::desk();
        let g = Generator::new(&cfg, 40, 100, &mut rng()).unwrap();
        let d = Discriminators::new(&cfg, &mut rng()).unwrap();
        let tape = Tape::new();
        let gp = g.params.bind(&tape, true);
        let dp = d.params.bind(&tape, true);
        let mel = mel_to_channels(tape.constant(random_mel(8, 40, 2).to_tensor()));
        let fake = g.forward(&gp, mel);
        let real = tape.constant(Tensor::from_fn(&[1, 800], |i| 0.3 * (i as f64 * 0.2).sin()));
        let fo = d.forward(&dp, fake).unwrap();
        let ro = d.forward(&dp, real).unwrap();
        let loss = adversarial_generator_loss(&fo.scores) + feature_matching_loss(&ro.features, &fo.features).unwrap();
        let mut grads = tape.backward(loss);
        assert!(all_nonzero(&gp.grads(&mut grads)));
        assert!(all_nonzero(&dp.grads(&mut grads)));
    }

    fn check_fd(store: &ParamStore, loss_at: impl Fn(&ParamStore) -> f64, analytic: &[Option<Tensor>]) {
        for (id, a) in store.ids().zip(analytic) {
            let numeric = numeric_gradient(
                |t| {
                    let mut s = store.clone();
                    *s.get_mut(id) = t.clone();
                    loss_at(&s)
                },
                store.get(id),
                1e-6,
            );
            for (x, y) in a.as_ref().unwrap().data().iter().zip(numeric.data()) {
                assert!(relative_error(*x, *y, 1e-5) < 1e-4, "{}: {x} vs {y}", store.name(id));
            }
        }
    }

    #[test]
    fn micro_gradients_match_finite_differences() {
        let cfg = micro();
        let g = Generator::new(&cfg, 3, 4, &mut rng()).unwrap();
        let d = Discriminators::new(&cfg, &mut rng()).unwrap();
        let mel = random_mel(6, 3, 4).to_tensor();
        let real = Tensor::from_fn(&[1, 24], |i| 0.4 * (i as f64 * 0.7).sin());
        let losses = |gs: &ParamStore, ds: &ParamStore, train_g: bool| {
            let tape = Tape::new();
            let gp = gs.bind(&tape, train_g);
            let dp = ds.bind(&tape, !train_g);
            let fake = g.forward(&gp, mel_to_channels(tape.constant(mel.clone())));
            let ro = d.forward(&dp, tape.constant(real.clone())).unwrap();
            let loss = if train_g {
                let fo = d.forward(&dp, fake).unwrap();
                adversarial_generator_loss(&fo.scores) + feature_matching_loss(&ro.features, &fo.features).unwrap()
            } else {
                let fo = d.forward(&dp, fake.detach()).unwrap();
                discriminator_loss(&ro.scores, &fo.scores).unwrap()
            };
            let value = loss.item();
            let mut grads = tape.backward(loss);
            let grads = if train_g { gp.grads(&mut grads) } else { dp.grads(&mut grads) };
            (value, grads)
        };
        let (_, gg) = losses(&g.params, &d.params, true);
        check_fd(&g.params, |s| losses(s, &d.params, true).0, &gg);
        let (_, dg) = losses(&g.params, &d.params, false);
        check_fd(&d.params, |s| losses(&g.params, s, false).0, &dg);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn generator_length_contract(frames in 1usize..=50) {
            let g = Generator::new(&micro(), 3, 4, &mut rng()).unwrap();
            let w = g.generate(&random_mel(frames, 3, frames as u64)).unwrap();
            prop_assert_eq!(w.len(), frames * 4);
        }
    }
}
