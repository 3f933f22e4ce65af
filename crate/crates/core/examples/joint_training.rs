//! Trains the desk preset on a freshly generated synthetic corpus and prints
//! the validation metrics.
//!
//! cargo run --release --example joint_training -- [epochs] [iters]

use std::time::Instant;

use svs_joint::config::TrainConfig;
use svs_joint::score::{generate_synthetic_dataset, PhonemeInventory, SynthConfig};
use svs_joint::trainer::{train, Corpus, TrainOptions};

fn main() -> svs_joint::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u32>().expect("integer argument"));
    let epochs = args.next().unwrap_or(6);
    let iters = args.next().unwrap_or(5);

    let data = SynthConfig::default();
    let utts = generate_synthetic_dataset(&data, 1)?;
    let mut cfg = TrainConfig::desk().with_epochs(epochs);
    cfg.train.iters_per_epoch = iters;
    let corpus = Corpus::new(utts, PhonemeInventory::with_size(data.inventory_size)?, &cfg)?;

    let t0 = Instant::now();
    let opts = TrainOptions { verbose: true, ..TrainOptions::default() };
    let out = train(&cfg, &corpus, &opts)?;
    let secs = t0.elapsed().as_secs_f64();
    let n_iter = f64::from(epochs * iters);
    println!("{} iterations in {secs:.1} s ({:.0} ms each)", n_iter, 1e3 * secs / n_iter);
    if let Some((_, r)) = out.eval {
        println!(
            "validation: MCD {:.3} dB, F0 RMSE {:.3}, VUV_E {:.3}, SA {:.3}",
            r.mcd, r.f0_rmse, r.vuv_e, r.sa
        );
    }
    Ok(())
}
