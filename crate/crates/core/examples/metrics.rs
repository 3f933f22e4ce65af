//! Objective metrics on controlled degradations of a rendered utterance:
//! identity, gain change, a pitch shift and added noise.
//!
//! cargo run --release --example metrics

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svs_joint::dsp::StftConfig;
use svs_joint::metrics::Evaluator;
use svs_joint::score::{generate_synthetic_dataset, render_score, PhonemeInventory, Pitch, SynthConfig};

fn main() -> svs_joint::Result<()> {
    let stft = StftConfig::desk();
    let data = SynthConfig { count: 1, ..SynthConfig::default() };
    let utt = generate_synthetic_dataset(&data, 11)?.remove(0);
    let inventory = PhonemeInventory::with_size(data.inventory_size)?;
    let reference = utt.waveform.clone();

    let mut shifted = utt.score.clone();
    for e in &mut shifted.events {
        if let Pitch::Midi(m) = e.pitch {
            e.pitch = Pitch::Midi(m + 2);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cases = [
        ("identity", reference.clone()),
        ("gain x0.5", reference.iter().map(|s| s * 0.5).collect::<Vec<_>>()),
        ("+2 semitones", render_score(&shifted, &inventory, stft.sample_rate, stft.hop)?),
        ("noise", reference.iter().map(|s| s + rng.random_range(-0.05..0.05)).collect()),
    ];
    println!("case\tMCD\tF0_RMSE\tVUV_E\tSA");
    for (name, wave) in cases {
        let n = wave.len().min(reference.len());
        let r = Evaluator::new(&stft)?.add(&reference[..n], &wave[..n])?;
        println!("{name}\t{:.3}\t{:.4}\t{:.3}\t{:.3}", r.mcd, r.f0_rmse, r.vuv_e, r.sa);
    }
    Ok(())
}
