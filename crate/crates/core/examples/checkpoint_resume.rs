//! Trains for a few epochs with checkpoints, stops halfway, resumes from the
//! last checkpoint and checks that the result matches an uninterrupted run.
//!
//! cargo run --release --example checkpoint_resume

use svs_joint::config::TrainConfig;
use svs_joint::schedule::ScheduleConfig;
use svs_joint::score::{generate_synthetic_dataset, PhonemeInventory, SynthConfig};
use svs_joint::trainer::{train, Corpus, TrainOptions};

fn main() -> svs_joint::Result<()> {
    let mut cfg = TrainConfig::desk().with_epochs(4);
    cfg.schedule = ScheduleConfig::linear(1.0, 1, 3, 4);
    cfg.train.iters_per_epoch = 4;
    let data = SynthConfig { count: 16, ..SynthConfig::default() };
    let corpus = Corpus::new(
        generate_synthetic_dataset(&data, 1)?,
        PhonemeInventory::with_size(data.inventory_size)?,
        &cfg,
    )?;
    let dir = std::env::temp_dir().join(format!("svs_resume_{}", std::process::id()));
    let quiet = TrainOptions { skip_eval: true, ..TrainOptions::default() };

    let whole = train(&cfg, &corpus, &quiet)?.state;
    train(&cfg, &corpus, &TrainOptions { out_dir: Some(dir.clone()), stop_after: Some(2), ..quiet.clone() })?;
    let ckpt = dir.join("checkpoints").join("epoch_2");
    println!("stopped after 2 epochs; checkpoint at {}", ckpt.display());
    let resumed = train(&cfg, &corpus, &TrainOptions { resume_from: Some(ckpt), ..quiet })?.state;

    println!("uninterrupted AM fingerprint {:016x}", whole.am.params.fingerprint());
    println!("resumed       AM fingerprint {:016x}", resumed.am.params.fingerprint());
    println!("logs identical: {}", whole.log == resumed.log);
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
