//! Trains the GAN vocoder alone on ground-truth mel crops (copy synthesis)
//! with the least-squares adversarial, feature-matching and mel losses, then
//! compares a resynthesized utterance with its reference.
//!
//! cargo run --release --example vocoder -- [steps]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svs_joint::autograd::{Tape, Tensor};
use svs_joint::config::TrainConfig;
use svs_joint::dsp::MelExtractor;
use svs_joint::losses::{adversarial_generator_loss, discriminator_loss, feature_matching_loss, mel_reconstruction_loss};
use svs_joint::metrics::Evaluator;
use svs_joint::nn::AdamW;
use svs_joint::score::{generate_synthetic_dataset, PhonemeInventory, SynthConfig};
use svs_joint::trainer::Corpus;
use svs_joint::voc::{mel_to_channels, Discriminators, Generator};

fn main() -> svs_joint::Result<()> {
    let steps: usize = std::env::args().nth(1).map_or(150, |s| s.parse().expect("step count"));
    let cfg = TrainConfig::desk();
    let data = SynthConfig { count: 12, ..SynthConfig::default() };
    let corpus = Corpus::new(
        generate_synthetic_dataset(&data, 2)?,
        PhonemeInventory::with_size(data.inventory_size)?,
        &cfg,
    )?;
    let (hop, seg) = (cfg.stft.hop, corpus.segment_frames(&cfg));
    let ext = MelExtractor::new(&cfg.stft)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut gen = Generator::new(&cfg.voc, cfg.stft.n_mels, hop, &mut rng)?;
    let mut disc = Discriminators::new(&cfg.voc, &mut rng)?;
    let (mut opt_g, mut opt_d) = (AdamW::new(&gen.params), AdamW::new(&disc.params));
    let opt = cfg.train.optimizer;
    let w = cfg.weights;

    println!("step\tL_D\tL_adv\tL_f\tL_m");
    for step in 0..steps {
        let ex = &corpus.train[rng.random_range(0..corpus.train.len())];
        let start = rng.random_range(0..=ex.n_frames() - seg);
        let tape = Tape::new();
        let g_p = gen.params.bind(&tape, true);
        let mel = mel_to_channels(tape.constant(ex.mel.slice(start, start + seg).to_tensor()));
        let real = tape.constant(Tensor::new(&[1, seg * hop], ex.wave[start * hop..(start + seg) * hop].to_vec()));
        let fake = gen.forward(&g_p, mel);

        let d_p = disc.params.bind(&tape, true);
        let real_out = disc.forward(&d_p, real)?;
        let fake_out = disc.forward(&d_p, fake.detach())?;
        let l_d = discriminator_loss(&real_out.scores, &fake_out.scores)?;
        let mut grads = tape.backward(l_d);
        opt_d.update(&mut disc.params, &d_p.grads(&mut grads), &opt, opt.lr);

        let d_p = disc.params.bind(&tape, false);
        let real_out = disc.forward(&d_p, real)?;
        let fake_out = disc.forward(&d_p, fake)?;
        let adv = adversarial_generator_loss(&fake_out.scores);
        let fm = feature_matching_loss(&real_out.features, &fake_out.features)?;
        let l_m = mel_reconstruction_loss(&ext, fake, ext.forward(real))?;
        let l_g = adv.scale(w.lambda_adv) + fm.scale(w.lambda_f) + l_m.scale(w.lambda_m);
        let mut grads = tape.backward(l_g);
        opt_g.update(&mut gen.params, &g_p.grads(&mut grads), &opt, opt.lr);
        if step % (steps / 10).max(1) == 0 || step + 1 == steps {
            println!("{step}\t{:.4}\t{:.4}\t{:.4}\t{:.4}", l_d.item(), adv.item(), fm.item(), l_m.item());
        }
    }

    let ex = &corpus.val[0];
    let wave = gen.generate(&ex.mel)?;
    let r = Evaluator::new(&cfg.stft)?.add(&ex.wave, &wave[..ex.wave.len().min(wave.len())])?;
    println!("{}: MCD {:.2} dB, F0 RMSE {:.3}, V/UV error {:.3}", ex.id, r.mcd, r.f0_rmse, r.vuv_e);
    Ok(())
}
