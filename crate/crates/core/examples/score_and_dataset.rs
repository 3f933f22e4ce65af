//! Score text format, frame-level targets, the synthetic renderer and the
//! on-disk dataset layout.
//!
//! cargo run --example score_and_dataset

use svs_joint::score::{
    generate_synthetic_dataset, parse_score, read_dataset, render_score, score_to_frame_targets, serialize_score,
    write_dataset, DatasetMeta, PhonemeInventory, SynthConfig,
};

const SCORE: &str = "\
@tempo 96
# phoneme midi seconds
a 60 0.30
i 64 0.25
REST - 0.10
o 67 0.40
";

fn main() -> svs_joint::Result<()> {
    let inventory = PhonemeInventory::with_size(5)?;
    let score = parse_score(SCORE.as_bytes(), &inventory)?;
    println!("{} events, {:.2} s", score.events.len(), score.total_duration());
    print!("{}", serialize_score(&score));

    let synth = SynthConfig::default();
    let targets = score_to_frame_targets(&score, &inventory, synth.frame_period())?;
    println!("durations (frames): {:?}", targets.durations);
    let voiced = targets.voiced.iter().filter(|&&v| v).count();
    println!("{} frames, {voiced} voiced", targets.n_frames());

    let wave = render_score(&score, &inventory, synth.sample_rate, synth.hop)?;
    let peak = wave.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    println!("rendered {} samples, peak {peak:.3}", wave.len());

    let cfg = SynthConfig { count: 4, ..synth };
    let utts = generate_synthetic_dataset(&cfg, 3)?;
    let dir = std::env::temp_dir().join(format!("svs_dataset_{}", std::process::id()));
    let meta = DatasetMeta {
        lines: vec![("phonemes".into(), inventory.symbols().join(" "))],
    };
    write_dataset(&dir, &utts, &meta)?;
    let back = read_dataset(&dir, &inventory)?;
    for u in &back {
        println!("{}: {} events, {} samples", u.id, u.score.events.len(), u.waveform.len());
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

