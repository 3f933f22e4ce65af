//! Two-stage, jt-scratch and jt-ft on the same corpus and seeds; prints the
//! pooled validation metrics of each run.
//!
//! cargo run --release --example regime_comparison -- [seeds] [epochs] [lr]

use svs_joint::config::TrainConfig;
use svs_joint::schedule::ScheduleConfig;
use svs_joint::score::{generate_synthetic_dataset, PhonemeInventory, SynthConfig};
use svs_joint::trainer::{pretrain_and_finetune, train, Corpus, TrainOptions};

fn main() -> svs_joint::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| args.get(i).map(|a| a.parse::<f64>().expect("numeric argument"));
    let seeds = arg(0).unwrap_or(1.0) as u32;
    let epochs = arg(1).unwrap_or(60.0) as u32;

    let data = SynthConfig::default();
    let mut base = TrainConfig::desk().with_epochs(epochs);
    if let Some(lr) = arg(2) {
        base.train.optimizer.lr = lr;
    }
    let corpus = Corpus::new(
        generate_synthetic_dataset(&data, 1)?,
        PhonemeInventory::with_size(data.inventory_size)?,
        &base,
    )?;
    let opts = TrainOptions::default();
    println!("seed\tregime\tMCD\tF0_RMSE\tVUV_E\tSA");
    for seed in 1..=u64::from(seeds) {
        let mut cfg = base.clone();
        cfg.train.seed = seed;
        let runs = [
            ("two-stage", train(&TrainConfig { schedule: ScheduleConfig::two_stage(epochs), ..cfg.clone() }, &corpus, &opts)?),
            ("jt-scratch", train(&TrainConfig { schedule: ScheduleConfig::jt_scratch(epochs), ..cfg.clone() }, &corpus, &opts)?),
            ("jt-ft", pretrain_and_finetune(&cfg, epochs / 4, &corpus, &opts)?),
        ];
        for (name, out) in runs {
            let (_, r) = out.eval.expect("validation split is non-empty");
            println!("{seed}\t{name}\t{:.3}\t{:.3}\t{:.3}\t{:.3}", r.mcd, r.f0_rmse, r.vuv_e, r.sa);
        }
    }
    Ok(())
}
