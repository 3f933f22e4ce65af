use super::*;
use crate::schedule::{classify_schedule, Regime};
use crate::score::{generate_synthetic_dataset, SynthConfig};
use crate::voc::VocConfig;

fn micro(schedule: ScheduleConfig) -> TrainConfig {
    let mut cfg = TrainConfig::desk();
    cfg.am.hidden_dim = 8;
    cfg.am.n_layers = 1;
    cfg.voc = VocConfig {
        channels: 8,
        resblock_dilations: vec![1],
        periods: vec![2],
        n_scales: 1,
        disc_channels: 4,
        ..VocConfig::desk()
    };
    cfg.train.epochs = schedule.t_max;
    cfg.schedule = schedule;
    cfg.train.iters_per_epoch = 2;
    cfg.train.batch_size = 2;
    cfg.train.segment_frames = 8;
    cfg.train.optimizer.lr = 1e-3;
    cfg.data.n_val = 2;
    cfg
}

fn corpus(cfg: &TrainConfig) -> Corpus {
    let data = SynthConfig {
        count: 6,
        max_notes: 3,
        ..SynthConfig::default()
    };
    let utts = generate_synthetic_dataset(&data, 5).unwrap();
    Corpus::new(utts, PhonemeInventory::with_size(data.inventory_size).unwrap(), cfg).unwrap()
}

fn quiet() -> TrainOptions {
    TrainOptions {
        skip_eval: true,
        ..TrainOptions::default()
    }
}

fn logged_p(log: &[String]) -> Vec<(u32, f64)> {
    log.iter()
        .map(|l| {
            let f: Vec<&str> = l.split(' ').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn zero_ratio_never_feeds_predicted_mels() {
    let cfg = micro(ScheduleConfig::linear(0.0, 0, 2, 3));
    let out = train(&cfg, &corpus(&cfg), &quiet()).unwrap();
    assert_eq!(out.state.pred_inputs, 0);
    assert_eq!(out.state.gt_inputs, 3 * 2 * 2);
    assert_eq!(out.state.log.len(), 6);
}

#[test]
fn logged_p_follows_the_schedule() {
    let cfg = micro(ScheduleConfig::linear(0.7, 1, 3, 4));
    let out = train(&cfg, &corpus(&cfg), &quiet()).unwrap();
    for (epoch, p) in logged_p(&out.state.log) {
        assert_eq!(p, evaluate_schedule(&cfg.schedule, epoch).unwrap().p);
    }
    assert!(out.state.pred_inputs > 0 && out.state.gt_inputs > 0);
}

#[test]
fn finetune_switches_at_t_start() {
    let cfg = micro(ScheduleConfig::two_stage(4));
    let c = corpus(&cfg);
    let out = pretrain_and_finetune(&cfg, 2, &c, &quiet()).unwrap();
    let first = logged_p(&out.state.log).into_iter().find(|&(_, p)| p == 1.0).unwrap().0;
    assert_eq!(first, 2);
    let direct = train(&finetune_config(&cfg, 2), &c, &quiet()).unwrap();
    assert_eq!(direct.state.log, out.state.log);
    assert_eq!(classify_schedule(&finetune_config(&cfg, 0).schedule).unwrap(), Regime::JtScratch);
    assert_eq!(classify_schedule(&finetune_config(&cfg, 4).schedule).unwrap(), Regime::TwoStage);
}

#[test]
fn same_seed_same_log() {
    let cfg = micro(ScheduleConfig::step(1, 2));
    let c = corpus(&cfg);
    let a = train(&cfg, &c, &quiet()).unwrap();
    let b = train(&cfg, &c, &quiet()).unwrap();
    assert_eq!(a.state.log, b.state.log);
    let mut other = cfg.clone();
    other.train.seed += 1;
    assert_ne!(train(&other, &c, &quiet()).unwrap().state.log, a.state.log);
}

#[test]
fn two_stage_vocoder_ignores_the_acoustic_model() {
    let cfg = micro(ScheduleConfig::two_stage(2));
    let c = corpus(&cfg);
    let real = train(&cfg, &c, &quiet()).unwrap().state;
    let stub = train(&cfg, &c, &TrainOptions { am_stub: true, ..quiet() }).unwrap().state;
    assert_eq!(real.gen.params.fingerprint(), stub.gen.params.fingerprint());
    assert_eq!(real.disc.params.fingerprint(), stub.disc.params.fingerprint());
    assert_ne!(real.am.params.fingerprint(), stub.am.params.fingerprint());
    let jt = micro(ScheduleConfig::jt_scratch(2));
    assert!(train(&jt, &c, &TrainOptions { am_stub: true, ..quiet() }).is_err());
}

#[test]
fn vocoder_gradient_reaches_the_acoustic_model_only_when_allowed() {
    let cfg = micro(ScheduleConfig::jt_scratch(2));
    let c = corpus(&cfg);
    let state = TrainState::init(&cfg, &c).unwrap();
    let batch = sample_batch(&cfg, &c, 0).unwrap();
    let all_zero = |g: &[Option<Tensor>]| g.iter().flatten().all(|t| t.data().iter().all(|&v| v == 0.0));
    let flow = |p: f64| vocoder_gradient_into_am(&cfg, &c, &state, &batch, MixWeight::new(p, 0).unwrap()).unwrap();
    assert!(all_zero(&flow(0.0)));
    assert!(!all_zero(&flow(0.5)));
    let mut det = cfg.clone();
    det.train.joint_gradient = JointGradient::Detach;
    for p in [0.0, 0.3, 1.0] {
        let g = vocoder_gradient_into_am(&det, &c, &state, &batch, MixWeight::new(p, 0).unwrap()).unwrap();
        assert!(all_zero(&g), "p = {p}");
    }
}

#[test]
fn cascade_freezes_the_acoustic_model() {
    let cfg = micro(ScheduleConfig::step(2, 4));
    let c = corpus(&cfg);
    let out = cascade_train(&cfg, &c, &quiet()).unwrap().state;
    let fp = &out.am_fingerprints;
    assert_ne!(fp[0], fp[1]);
    assert_eq!(fp[1], fp[2]);
    assert_eq!(fp[2], fp[3]);
    assert_eq!((out.pred_inputs, out.gt_inputs), (2 * 2 * 2, 0));
    let diff = cascade_config(&cfg);
    assert_eq!(diff.train.joint_gradient, JointGradient::Detach);
    assert_eq!(TrainConfig { train: cfg.train.clone(), ..diff }, cfg);
}

#[test]
fn resume_matches_continuous_run() {
    let cfg = micro(ScheduleConfig::linear(1.0, 1, 3, 4));
    let c = corpus(&cfg);
    let whole = train(&cfg, &c, &quiet()).unwrap().state;
    let dir = tempfile::tempdir().unwrap();
    let first = TrainOptions {
        out_dir: Some(dir.path().to_path_buf()),
        stop_after: Some(2),
        ..quiet()
    };
    train(&cfg, &c, &first).unwrap();
    let ckpt = dir.path().join("checkpoints").join("epoch_2");
    let second = TrainOptions {
        resume_from: Some(ckpt.clone()),
        ..quiet()
    };
    let resumed = train(&cfg, &c, &second).unwrap().state;
    assert_eq!(resumed.log, whole.log);
    assert_eq!(resumed.gen.params.fingerprint(), whole.gen.params.fingerprint());
    assert_eq!(resumed.am_fingerprints, whole.am_fingerprints);
    assert_eq!((resumed.pred_inputs, resumed.gt_inputs), (whole.pred_inputs, whole.gt_inputs));

    let mut other = cfg.clone();
    other.train.seed = 1;
    assert!(matches!(load_checkpoint(&ckpt, &other), Err(Error::Checkpoint(_))));
}

#[test]
fn run_directory_layout_and_pruning() {
    let mut cfg = micro(ScheduleConfig::step(1, 3));
    cfg.train.keep_checkpoints = 2;
    let c = corpus(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let opts = TrainOptions {
        out_dir: Some(dir.path().to_path_buf()),
        ..TrainOptions::default()
    };
    let out = train(&cfg, &c, &opts).unwrap();
    let echo = fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert_eq!(TrainConfig::parse(&echo).unwrap(), cfg);
    let log = fs::read_to_string(dir.path().join("log.txt")).unwrap();
    assert_eq!(log.lines().count(), 1 + 6);
    assert!(log.starts_with(LOG_HEADER));
    let eval = fs::read_to_string(dir.path().join("eval.txt")).unwrap();
    assert_eq!(eval.lines().count(), 1 + c.val.len() + 1);
    let mut kept: Vec<_> = fs::read_dir(dir.path().join("checkpoints"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    kept.sort();
    assert_eq!(kept, ["epoch_2", "epoch_3"]);
    let (_, pooled) = out.eval.unwrap();
    assert!(pooled.mcd.is_finite());
}

#[test]
fn non_finite_loss_aborts_with_checkpoint() {
    let mut cfg = micro(ScheduleConfig::two_stage(2));
    cfg.weights.lambda_m = 1e308;
    let c = corpus(&cfg);
    match train(&cfg, &c, &quiet()) {
        Err(Error::Diverged { epoch: 0, iter: 0, last_checkpoint: None, .. }) => {}
        other => panic!("expected divergence, got {:?}", other.map(|o| o.state.log)),
    }
}

#[test]
fn rejects_mismatched_sample_rate() {
    let cfg = micro(ScheduleConfig::two_stage(2));
    let data = SynthConfig {
        count: 4,
        sample_rate: 16000,
        ..SynthConfig::default()
    };
    let utts = generate_synthetic_dataset(&data, 1).unwrap();
    assert!(Corpus::new(utts, PhonemeInventory::with_size(5).unwrap(), &cfg).is_err());
}

#[test]
fn bernoulli_mode_picks_one_branch() {
    let mut cfg = micro(ScheduleConfig::linear(0.5, 0, 1, 3));
    cfg.train.mix_mode = MixMode::Bernoulli;
    let out = train(&cfg, &corpus(&cfg), &quiet()).unwrap().state;
    let ps: Vec<f64> = logged_p(&out.log).into_iter().map(|(_, p)| p).collect();
    assert!(ps.iter().all(|&p| p == 0.0 || p == 1.0));
    assert_eq!(out.pred_inputs + out.gt_inputs, 3 * 2 * 2);
}
