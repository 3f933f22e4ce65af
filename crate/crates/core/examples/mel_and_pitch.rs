//! Log-mel analysis and F0 tracking of a rendered note sequence.
//!
//! cargo run --example mel_and_pitch

use svs_joint::dsp::{estimate_f0, mel_spectrogram, PitchConfig, StftConfig};
use svs_joint::score::{midi_to_hz, parse_score, render_score, PhonemeInventory};

fn main() -> svs_joint::Result<()> {
    let stft = StftConfig::desk();
    let inventory = PhonemeInventory::with_size(3)?;
    let score = parse_score(b"a 57 0.4\nREST - 0.2\ni 69 0.4\n", &inventory)?;
    let wave = render_score(&score, &inventory, stft.sample_rate, stft.hop)?;

    let mel = mel_spectrogram(&wave, &stft)?;
    println!("{} frames x {} mel bins", mel.n_frames, mel.n_mels);
    let track = estimate_f0(&wave, &PitchConfig::for_rate(stft.sample_rate, stft.hop))?;
    println!("expected {:.1} Hz and {:.1} Hz", midi_to_hz(57), midi_to_hz(69));
    println!("frame\tenergy\tf0");
    for t in (0..mel.n_frames).step_by(5) {
        let energy = mel.frame(t).iter().sum::<f64>() / mel.n_mels as f64;
        println!("{t}\t{energy:.2}\t{:.1}", track.f0.get(t).copied().unwrap_or(0.0));
    }
    Ok(())
}
