//! Least-squares GAN terms, feature matching, mel reconstruction and the
//! p-weighted mixtures that tie the acoustic model to the vocoder.
//!
//! Every mixed term is `p * pred + (1 - p) * gt`, where `pred` is computed
//! from the acoustic model's output and `gt` from ground-truth mels. A branch
//! that is not computed contributes an exact zero.

use crate::autograd::{Tape, Var};
use crate::dsp::MelExtractor;
use crate::error::{Error, Result};
use crate::schedule::MixWeight;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_ma: f64,
    pub lambda_adv: f64,
    pub lambda_f: f64,
    pub lambda_m: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_d: 1.0,
            lambda_ma: 1.0,
            lambda_adv: 1.0,
            lambda_f: 2.0,
            lambda_m: 45.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_d, self.lambda_ma, self.lambda_adv, self.lambda_f, self.lambda_m];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!("loss weights must be finite and >= 0, got {all:?}")));
        }
        Ok(())
    }
}

pub fn mix(p: MixWeight, pred: f64, gt: f64) -> f64 {
    pred * p.p + gt * (1.0 - p.p)
}

/// Differentiable [`mix`]; `None` stands for a branch that was skipped.
pub fn mix_var<'t>(tape: &'t Tape, p: MixWeight, pred: Option<Var<'t>>, gt: Option<Var<'t>>) -> Var<'t> {
    let pred = pred.unwrap_or_else(|| tape.scalar(0.0));
    let gt = gt.unwrap_or_else(|| tape.scalar(0.0));
    pred.scale(p.p) + gt.scale(1.0 - p.p)
}

fn mean_over<'t>(terms: Vec<Var<'t>>) -> Var<'t> {
    let n = terms.len() as f64;
    let mut it = terms.into_iter();
    let first = it.next().expect("at least one term");
    it.fold(first, |acc, t| acc + t).scale(1.0 / n)
}

/// Mean over discriminators of `mean((s - 1)^2)`.
pub fn adversarial_generator_loss<'t>(scores: &[Var<'t>]) -> Var<'t> {
    mean_over(scores.iter().map(|s| s.add_scalar(-1.0).square().mean()).collect())
}

/// Mean over discriminators of `mean((real - 1)^2) + mean(fake^2)`.
pub fn discriminator_loss<'t>(real: &[Var<'t>], fake: &[Var<'t>]) -> Result<Var<'t>> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::Shape(format!("{} real vs {} fake score maps", real.len(), fake.len())));
    }
    Ok(mean_over(
        real.iter()
            .zip(fake)
            .map(|(r, f)| r.add_scalar(-1.0).square().mean() + f.square().mean())
            .collect(),
    ))
}

/// Mean absolute feature difference per layer, averaged over each
/// discriminator's layers and then over discriminators. Real features are
/// detached.
pub fn feature_matching_loss<'t>(real: &[Vec<Var<'t>>], generated: &[Vec<Var<'t>>]) -> Result<Var<'t>> {
    if real.len() != generated.len() || real.is_empty() {
        return Err(Error::Shape("feature lists differ in discriminator count".into()));
    }
    let mut per_disc = Vec::with_capacity(real.len());
    for (r, g) in real.iter().zip(generated) {
        if r.len() != g.len() || r.is_empty() {
            return Err(Error::Shape("feature lists differ in layer count".into()));
        }
        let mut layers = Vec::with_capacity(r.len());
        for (rl, gl) in r.iter().zip(g) {
            if rl.shape() != gl.shape() {
                return Err(Error::Shape(format!("feature maps {:?} vs {:?}", rl.shape(), gl.shape())));
            }
            layers.push((*gl - rl.detach()).abs().mean());
        }
        per_disc.push(mean_over(layers));
    }
    Ok(mean_over(per_disc))
}

/// `L1(log_mel(generated), target)` with `generated[B, T]` and
/// `target[B, frames, n_mels]` precomputed from the ground-truth waveform.
pub fn mel_reconstruction_loss<'t>(ext: &MelExtractor, generated: Var<'t>, target: Var<'t>) -> Result<Var<'t>> {
    let mel = ext.forward(generated);
    if mel.shape() != target.shape() {
        return Err(Error::Shape(format!("mel frames {:?} vs target {:?}", mel.shape(), target.shape())));
    }
    Ok((mel - target).abs().mean())
}

/// Branch values of one generator step and the preceding discriminator step.
/// Branches that were not computed hold 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Components {
    pub l_d: f64,
    pub l_ma: f64,
    pub adv_pred: f64,
    pub adv_gt: f64,
    pub f_pred: f64,
    pub f_gt: f64,
    pub m_pred: f64,
    pub m_gt: f64,
    pub d_pred: f64,
    pub d_gt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l_d: f64,
    pub l_ma: f64,
    pub l_am: f64,
    pub l_adv_pred: f64,
    pub l_adv_gt: f64,
    pub l_adv_mix: f64,
    pub l_f_pred: f64,
    pub l_f_gt: f64,
    pub l_f_mix: f64,
    pub l_m_pred: f64,
    pub l_m_gt: f64,
    pub l_m_mix: f64,
    pub l_d_pred: f64,
    pub l_d_gt: f64,
    pub l_d_mix: f64,
    pub l_v: f64,
    /// Same value as `l_tot`.
    pub l_g: f64,
    pub l_tot: f64,
    pub p_used: MixWeight,
}

/// Fills every derived field with the same float operations, in the same
/// order, as the graph the trainer differentiates.
pub fn compose(p: MixWeight, c: &Components, w: &LossWeights) -> Result<LossBreakdown> {
    let named = [
        ("L_d", c.l_d),
        ("L_ma", c.l_ma),
        ("L_adv_pred", c.adv_pred),
        ("L_adv_gt", c.adv_gt),
        ("L_f_pred", c.f_pred),
        ("L_f_gt", c.f_gt),
        ("L_m_pred", c.m_pred),
        ("L_m_gt", c.m_gt),
        ("L_D_pred", c.d_pred),
        ("L_D_gt", c.d_gt),
    ];
    if let Some((name, _)) = named.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(name));
    }
    let l_am = c.l_d * w.lambda_d + c.l_ma * w.lambda_ma;
    let l_adv_mix = mix(p, c.adv_pred, c.adv_gt);
    let l_f_mix = mix(p, c.f_pred, c.f_gt);
    let l_m_mix = mix(p, c.m_pred, c.m_gt);
    let l_v = l_adv_mix * w.lambda_adv + l_f_mix * w.lambda_f + l_m_mix * w.lambda_m;
    let l_tot = l_am + l_v;
    let out = LossBreakdown {
        l_d: c.l_d,
        l_ma: c.l_ma,
        l_am,
        l_adv_pred: c.adv_pred,
        l_adv_gt: c.adv_gt,
        l_adv_mix,
        l_f_pred: c.f_pred,
        l_f_gt: c.f_gt,
        l_f_mix,
        l_m_pred: c.m_pred,
        l_m_gt: c.m_gt,
        l_m_mix,
        l_d_pred: c.d_pred,
        l_d_gt: c.d_gt,
        l_d_mix: mix(p, c.d_pred, c.d_gt),
        l_v,
        l_g: l_tot,
        l_tot,
        p_used: p,
    };
    for (name, v) in [("L_v", out.l_v), ("L_tot", out.l_tot), ("L_D_mix", out.l_d_mix)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
    }
    Ok(out)
}

impl LossBreakdown {
    /// `epoch iter p L_AM L_adv_mix L_f_mix L_m_mix L_D_mix L_v L_tot`
    pub fn log_line(&self, epoch: u32, iter: u32) -> String {
        format!(
            "{epoch} {iter} {} {:e} {:e} {:e} {:e} {:e} {:e} {:e}",
            self.p_used.p, self.l_am, self.l_adv_mix, self.l_f_mix, self.l_m_mix, self.l_d_mix, self.l_v, self.l_tot
        )
    }
}

pub const LOG_HEADER: &str = "epoch iter p L_AM L_adv_mix L_f_mix L_m_mix L_D_mix L_v L_tot";

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::autograd::Tensor;
    use crate::dsp::StftConfig;

    fn mw(p: f64) -> MixWeight {
        MixWeight::new(p, 0).unwrap()
    }

    fn consts<'t>(tape: &'t Tape, maps: &[Vec<f64>]) -> Vec<Var<'t>> {
        maps.iter().map(|m| tape.constant(Tensor::new(&[1, 1, m.len()], m.clone()))).collect()
    }

    #[test]
    fn mix_cases() {
        assert_eq!(mix(mw(0.5), 2.0, 4.0), 3.0);
        assert_eq!(mix(mw(0.0), 7.0, 5.0), 5.0);
        assert_eq!(mix(mw(1.0), 7.0, 5.0), 7.0);
        let tape = Tape::new();
        let p = mw(0.25);
        let v = mix_var(&tape, p, Some(tape.scalar(2.0)), Some(tape.scalar(6.0)));
        assert_eq!(v.item(), mix(p, 2.0, 6.0));
        let skipped = mix_var(&tape, mw(0.0), None, Some(tape.scalar(6.0)));
        assert_eq!(skipped.item(), 6.0);
    }

    #[test]
    fn generator_adversarial_cases() {
        let tape = Tape::new();
        assert_eq!(adversarial_generator_loss(&consts(&tape, &[vec![1.0; 4], vec![1.0; 2]])).item(), 0.0);
        assert_eq!(adversarial_generator_loss(&consts(&tape, &[vec![0.0; 3]])).item(), 1.0);
        assert_eq!(adversarial_generator_loss(&consts(&tape, &[vec![0.0, 1.0]])).item(), 0.5);
    }

    #[test]
    fn discriminator_cases() {
        let tape = Tape::new();
        let one = consts(&tape, &[vec![1.0; 3], vec![1.0; 5]]);
        let zero = consts(&tape, &[vec![0.0; 3], vec![0.0; 5]]);
        assert_eq!(discriminator_loss(&one, &zero).unwrap().item(), 0.0);
        assert_eq!(discriminator_loss(&zero, &one).unwrap().item(), 2.0);
        assert!(discriminator_loss(&one, &zero[..1]).is_err());

        let r = [vec![0.3, -0.2, 1.4], vec![0.9, 0.1]];
        let f = [vec![0.5, 0.0, -0.7], vec![0.2, 1.1]];
        let mut want = 0.0;
        for (rr, ff) in r.iter().zip(&f) {
            let a: f64 = rr.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / rr.len() as f64;
            let b: f64 = ff.iter().map(|v| v * v).sum::<f64>() / ff.len() as f64;
            want += a + b;
        }
        want /= 2.0;
        let got = discriminator_loss(&consts(&tape, &r), &consts(&tape, &f)).unwrap().item();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn feature_matching_cases() {
        let tape = Tape::new();
        let a = vec![consts(&tape, &[vec![0.5, 1.0], vec![2.0]]), consts(&tape, &[vec![-1.0, 3.0, 0.0]])];
        assert_eq!(feature_matching_loss(&a, &a).unwrap().item(), 0.0);
        let shifted: Vec<Vec<Var>> = a.iter().map(|d| d.iter().map(|v| v.add_scalar(1.0)).collect()).collect();
        assert!((feature_matching_loss(&a, &shifted).unwrap().item() - 1.0).abs() < 1e-15);

        let r = [vec![0.1, 0.7], vec![-0.4]];
        let g = [vec![0.6, -0.3], vec![0.2]];
        let want = (((0.5 + 1.0) / 2.0) + 0.6) / 2.0;
        let got = feature_matching_loss(&[consts(&tape, &r)], &[consts(&tape, &g)]).unwrap().item();
        assert!((got - want).abs() < 1e-12);
        assert!(feature_matching_loss(&a, &a[..1]).is_err());
    }

    #[test]
    fn feature_matching_detaches_real_branch() {
        let tape = Tape::new();
        let r = tape.leaf(Tensor::new(&[1, 1, 2], vec![0.2, 0.4]));
        let g = tape.leaf(Tensor::new(&[1, 1, 2], vec![0.5, 0.1]));
        let loss = feature_matching_loss(&[vec![r]], &[vec![g]]).unwrap();
        let grads = tape.backward(loss);
        assert!(grads.get(r).is_none());
        assert_eq!(grads.get(g).unwrap().data(), &[0.5, -0.5]);
    }

    #[test]
    fn mel_loss_cases() {
        let cfg = StftConfig::desk();
        let ext = MelExtractor::new(&cfg).unwrap();
        let tape = Tape::new();
        let w: Vec<f64> = (0..1200).map(|n| 0.2 * (2.0 * PI * 500.0 * n as f64 / 8000.0).sin()).collect();
        let target = ext.forward(tape.constant(Tensor::new(&[1, 1200], w.clone())));
        let same = tape.constant(Tensor::new(&[1, 1200], w.clone()));
        assert_eq!(mel_reconstruction_loss(&ext, same, target).unwrap().item(), 0.0);

        // doubling the waveform shifts the unfloored bins by 2 ln 2
        let doubled = tape.constant(Tensor::new(&[1, 1200], w.iter().map(|v| 2.0 * v).collect()));
        let a = ext.forward(doubled);
        let mask: Vec<bool> = a.value().data().iter().zip(target.value().data()).map(|(x, y)| *x > cfg.log_floor.ln() && *y > cfg.log_floor.ln()).collect();
        let diffs: Vec<f64> = a.value().data().iter().zip(target.value().data()).zip(&mask).filter(|(_, m)| **m).map(|((x, y), _)| x - y).collect();
        assert!(!diffs.is_empty());
        for d in diffs {
            assert!((d - 2.0 * 2f64.ln()).abs() < 1e-9);
        }

        let short = tape.constant(Tensor::new(&[1, 500], w[..500].to_vec()));
        assert!(mel_reconstruction_loss(&ext, short, target).is_err());
    }

    #[test]
    fn compose_paper_weights() {
        let c = Components { l_d: 0.5, l_ma: 0.5, adv_pred: 1.0, adv_gt: 1.0, f_pred: 1.0, f_gt: 1.0, m_pred: 1.0, m_gt: 1.0, ..Default::default() };
        let b = compose(mw(0.3), &c, &LossWeights::default()).unwrap();
        assert_eq!(b.l_am, 1.0);
        assert_eq!(b.l_v, 48.0);
        assert_eq!(b.l_g, 49.0);
        assert_eq!(b.l_tot, 49.0);
        let bad = Components { m_gt: f64::NAN, ..c };
        assert_eq!(compose(mw(0.3), &bad, &LossWeights::default()).unwrap_err().to_string(), "non-finite loss term `L_m_gt`");
    }

    #[test]
    fn log_line_format() {
        let b = compose(mw(0.5), &Components { l_ma: 2.0, ..Default::default() }, &LossWeights::default()).unwrap();
        assert_eq!(b.log_line(3, 7), "3 7 0.5 2e0 0e0 0e0 0e0 0e0 0e0 2e0");
        assert_eq!(LOG_HEADER.split(' ').count(), b.log_line(0, 0).split(' ').count());
    }

    fn arb_components() -> impl Strategy<Value = Components> {
        prop::collection::vec(0.0..10.0f64, 10).prop_map(|v| Components {
            l_d: v[0],
            l_ma: v[1],
            adv_pred: v[2],
            adv_gt: v[3],
            f_pred: v[4],
            f_gt: v[5],
            m_pred: v[6],
            m_gt: v[7],
            d_pred: v[8],
            d_gt: v[9],
        })
    }

    proptest! {
        #[test]
        fn mixture_fields_are_convex(c in arb_components(), k in 0usize..5) {
            let p = mw(k as f64 / 4.0);
            let b = compose(p, &c, &LossWeights::default()).unwrap();
            for (mixed, pred, gt) in [
                (b.l_adv_mix, b.l_adv_pred, b.l_adv_gt),
                (b.l_f_mix, b.l_f_pred, b.l_f_gt),
                (b.l_m_mix, b.l_m_pred, b.l_m_gt),
                (b.l_d_mix, b.l_d_pred, b.l_d_gt),
            ] {
                prop_assert_eq!(mixed, p.p * pred + (1.0 - p.p) * gt);
            }
            if k == 0 {
                prop_assert_eq!(b.l_adv_mix, c.adv_gt);
                prop_assert_eq!(b.l_m_mix, c.m_gt);
            }
            if k == 4 {
                prop_assert_eq!(b.l_f_mix, c.f_pred);
                prop_assert_eq!(b.l_d_mix, c.d_pred);
            }
        }

        #[test]
        fn compose_matches_graph_bit_for_bit(c in arb_components(), k in 0usize..5) {
            let p = mw(k as f64 / 4.0);
            let w = LossWeights::default();
            let tape = Tape::new();
            let s = |v: f64| tape.scalar(v);
            let l_am = s(c.l_d).scale(w.lambda_d) + s(c.l_ma).scale(w.lambda_ma);
            let adv = mix_var(&tape, p, Some(s(c.adv_pred)), Some(s(c.adv_gt)));
            let f = mix_var(&tape, p, Some(s(c.f_pred)), Some(s(c.f_gt)));
            let m = mix_var(&tape, p, Some(s(c.m_pred)), Some(s(c.m_gt)));
            let l_v = adv.scale(w.lambda_adv) + f.scale(w.lambda_f) + m.scale(w.lambda_m);
            let tot = l_am + l_v;
            let b = compose(p, &c, &w).unwrap();
            prop_assert_eq!(tot.item().to_bits(), b.l_tot.to_bits());
            prop_assert_eq!(l_v.item().to_bits(), b.l_v.to_bits());
        }
    }
}
