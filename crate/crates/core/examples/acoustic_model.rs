//! Fits the acoustic model alone to one synthetic utterance and prints the
//! duration and mel losses as they fall.
//!
//! cargo run --release --example acoustic_model -- [steps]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svs_joint::am::{am_loss, AcousticModel};
use svs_joint::autograd::Tape;
use svs_joint::config::{DataParams, TrainConfig};
use svs_joint::nn::AdamW;
use svs_joint::score::{generate_synthetic_dataset, PhonemeInventory, SynthConfig};
use svs_joint::trainer::Corpus;

fn main() -> svs_joint::Result<()> {
    let steps: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("step count"));
    let cfg = TrainConfig { data: DataParams { n_val: 0 }, ..TrainConfig::desk() };
    let data = SynthConfig { count: 1, ..SynthConfig::default() };
    let corpus = Corpus::new(
        generate_synthetic_dataset(&data, 9)?,
        PhonemeInventory::with_size(data.inventory_size)?,
        &cfg,
    )?;
    let ex = &corpus.train[0];

    let mut am = AcousticModel::new(&cfg.am, &mut ChaCha8Rng::seed_from_u64(1))?;
    am.set_output_bias(&corpus.mean_mel())?;
    let mut opt_cfg = cfg.train.optimizer;
    opt_cfg.lr = 3e-3;
    let mut opt = AdamW::new(&am.params);

    println!("step\tL_d\tL_ma");
    for step in 0..steps {
        let tape = Tape::new();
        let p = am.params.bind(&tape, true);
        let out = am.forward(&p, &ex.input, Some(&ex.durations))?;
        let loss = am_loss(&out, tape.constant(ex.mel.to_tensor()), &ex.durations, &cfg.weights)?;
        if step % (steps / 10).max(1) == 0 || step + 1 == steps {
            println!("{step}\t{:.4}\t{:.4}", loss.l_d.item(), loss.l_ma.item());
        }
        let mut grads = tape.backward(loss.l_am);
        let g = p.grads(&mut grads);
        opt.update(&mut am.params, &g, &opt_cfg, opt_cfg.lr);
    }

    let tape = Tape::new();
    let p = am.params.bind(&tape, false);
    let out = am.forward(&p, &ex.input, None)?;
    let pred: Vec<String> = out.dur_pred().iter().map(|d| format!("{d:.1}")).collect();
    println!("target durations {:?}", ex.durations);
    println!("predicted        [{}]", pred.join(", "));
    Ok(())
}
