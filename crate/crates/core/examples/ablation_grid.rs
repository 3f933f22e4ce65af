//! A small T_start ablation: four cells over one seed on a reduced config,
//! printed as the ablation TSV.
//!
//! cargo run --release --example ablation_grid -- [epochs]

use svs_joint::config::{GridSpec, TrainConfig};
use svs_joint::score::{generate_synthetic_dataset, PhonemeInventory, SynthConfig};
use svs_joint::trainer::{ablate, Corpus};

fn main() -> svs_joint::Result<()> {
    let epochs: u32 = std::env::args().nth(1).map_or(4, |s| s.parse().expect("epoch count"));
    let mut base = TrainConfig::desk().with_epochs(epochs);
    base.train.iters_per_epoch = 5;
    let grid = GridSpec::parse(
        "set schedule.pattern = step\n\
         vary schedule.t_start_me = 0, 0.25, 0.5, 1\n\
         seeds = 1\n",
    )?;
    let data = SynthConfig { count: 20, ..SynthConfig::default() };
    let corpus = Corpus::new(
        generate_synthetic_dataset(&data, 1)?,
        PhonemeInventory::with_size(data.inventory_size)?,
        &base,
    )?;
    let table = ablate(&base, &grid, &corpus, None, false)?;
    print!("{}", table.to_tsv());
    Ok(())
}
