//! Scheduled joint training of the acoustic model and the vocoder.
//!
//! Each iteration draws a batch of random crops, runs the acoustic model
//! teacher-forced over the full utterances, feeds the vocoder with crops of
//! the predicted mel and/or the ground-truth mel, takes one discriminator
//! step and then one generator step on `L_tot`. The mixing weight `p` is
//! re-evaluated every epoch from the schedule.

mod ablate;
mod checkpoint;

pub use ablate::{ablate, AblationRow, AblationTable, ABLATION_HEADER};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use crate::config::{JointGradient, MixMode, TrainConfig};

use crate::am::{am_loss, AcousticModel, AmInput};
use crate::autograd::{concat, Tape, Tensor, Var};
use crate::dsp::{MelExtractor, MelSpectrogram};
use crate::error::{Error, Result};
use crate::losses::{
    adversarial_generator_loss, compose, discriminator_loss, feature_matching_loss, mel_reconstruction_loss,
    mix_var, Components, LossBreakdown, LOG_HEADER,
};
use crate::metrics::{EvalReport, Evaluator};
use crate::nn::{AdamW, Bound};
use crate::schedule::{evaluate_schedule, MixWeight, Pattern, ScheduleConfig};
use crate::score::{dataset_inventory, event_frame_counts, read_dataset, PhonemeInventory, Utterance};
use crate::voc::{DiscOutput, Discriminators, Generator};

/// Independent random streams derived from the run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    AmInit = 1,
    GenInit = 2,
    DiscInit = 3,
    Data = 4,
}

/// `index` selects a sub-stream, e.g. the epoch for [`Stream::Data`].
pub fn stream_rng(seed: u64, stream: Stream, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | u64::from(index));
    rng
}

/// One utterance prepared for training.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    pub input: AmInput,
    /// Ground-truth frames per phoneme.
    pub durations: Vec<usize>,
    /// Target mel, one frame per score frame.
    pub mel: MelSpectrogram,
    /// Waveform cut or zero-padded to `frames * hop` samples.
    pub wave: Vec<f64>,
}

impl Example {
    pub fn n_frames(&self) -> usize {
        self.mel.n_frames
    }
}

/// Train/validation split of a corpus.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub inventory: PhonemeInventory,
    pub train: Vec<Example>,
    pub val: Vec<Example>,
}

impl Corpus {
    /// Holds out the last `cfg.data.n_val` utterances by id.
    pub fn new(mut utterances: Vec<Utterance>, inventory: PhonemeInventory, cfg: &TrainConfig) -> Result<Self> {
        if utterances.len() <= cfg.data.n_val {
            return Err(Error::Input(format!(
                "{} utterances leave nothing to train on after holding out {}",
                utterances.len(),
                cfg.data.n_val
            )));
        }
        if cfg.am.phoneme_vocab < inventory.vocab_size() {
            return Err(Error::Config(format!(
                "am.phoneme_vocab = {} but the dataset needs {}",
                cfg.am.phoneme_vocab,
                inventory.vocab_size()
            )));
        }
        utterances.sort_by(|a, b| a.id.cmp(&b.id));
        let ext = MelExtractor::new(&cfg.stft)?;
        let examples = utterances
            .iter()
            .map(|u| prepare(u, &inventory, &ext))
            .collect::<Result<Vec<_>>>()?;
        let n_train = examples.len() - cfg.data.n_val;
        let mut train = examples;
        let val = train.split_off(n_train);
        Ok(Corpus { inventory, train, val })
    }

    pub fn load(dir: &Path, cfg: &TrainConfig) -> Result<Self> {
        let inventory = dataset_inventory(dir)?;
        let utterances = read_dataset(dir, &inventory)?;
        Self::new(utterances, inventory, cfg)
    }

    /// Crop length actually used: no longer than the shortest training item.
    pub fn segment_frames(&self, cfg: &TrainConfig) -> usize {
        let shortest = self.train.iter().map(Example::n_frames).min().unwrap_or(0);
        cfg.train.segment_frames.min(shortest)
    }

    /// Per-bin mean of the training mels.
    pub fn mean_mel(&self) -> Vec<f64> {
        let m = self.train[0].mel.n_mels;
        let mut sum = vec![0.0; m];
        let mut n = 0usize;
        for ex in &self.train {
            for t in 0..ex.mel.n_frames {
                for (s, v) in sum.iter_mut().zip(ex.mel.frame(t)) {
                    *s += v;
                }
            }
            n += ex.mel.n_frames;
        }
        sum.iter().map(|s| s / n as f64).collect()
    }
}

fn prepare(u: &Utterance, inventory: &PhonemeInventory, ext: &MelExtractor) -> Result<Example> {
    let stft = ext.config();
    if u.sample_rate != stft.sample_rate {
        return Err(Error::Input(format!(
            "{}: sample rate {} Hz, config expects {} Hz",
            u.id, u.sample_rate, stft.sample_rate
        )));
    }
    let fp = stft.frame_period();
    let durations = event_frame_counts(&u.score, fp);
    let frames: usize = durations.iter().sum();
    let audio_frames = u.waveform.len() / stft.hop;
    if frames == 0 || audio_frames.abs_diff(frames) > 1 {
        return Err(Error::Input(format!(
            "{}: score spans {frames} frames, audio {audio_frames} at hop {}",
            u.id, stft.hop
        )));
    }
    let full = ext.compute(&u.waveform)?;
    let mel = full.slice(0, frames);
    let mut wave = u.waveform.clone();
    wave.resize(frames * stft.hop, 0.0);
    Ok(Example {
        id: u.id.clone(),
        input: AmInput::from_score(&u.score, inventory, fp)?,
        durations,
        mel,
        wave,
    })
}

/// Models, optimiser states and the running log.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub epochs_done: u32,
    pub am: AcousticModel,
    pub gen: Generator,
    pub disc: Discriminators,
    pub opt_am: AdamW,
    pub opt_gen: AdamW,
    pub opt_disc: AdamW,
    /// Vocoder inputs taken from the acoustic model's output.
    pub pred_inputs: u64,
    /// Vocoder inputs taken from ground-truth mels.
    pub gt_inputs: u64,
    /// One [`LossBreakdown::log_line`] per iteration.
    pub log: Vec<String>,
    /// Acoustic-model parameter fingerprint after every epoch.
    pub am_fingerprints: Vec<u64>,
}

impl TrainState {
    /// Freshly initialised models; the output bias starts at the corpus mean.
    pub fn init(cfg: &TrainConfig, corpus: &Corpus) -> Result<Self> {
        let mut state = Self::fresh(cfg)?;
        state.am.set_output_bias(&corpus.mean_mel())?;
        Ok(state)
    }

    /// Initialisation without data, e.g. as a target for a checkpoint.
    pub fn fresh(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.train.seed;
        let am = AcousticModel::new(&cfg.am, &mut stream_rng(seed, Stream::AmInit, 0))?;
        let gen = Generator::new(&cfg.voc, cfg.stft.n_mels, cfg.stft.hop, &mut stream_rng(seed, Stream::GenInit, 0))?;
        let disc = Discriminators::new(&cfg.voc, &mut stream_rng(seed, Stream::DiscInit, 0))?;
        Ok(TrainState {
            epochs_done: 0,
            opt_am: AdamW::new(&am.params),
            opt_gen: AdamW::new(&gen.params),
            opt_disc: AdamW::new(&disc.params),
            am,
            gen,
            disc,
            pred_inputs: 0,
            gt_inputs: 0,
            log: Vec::new(),
            am_fingerprints: Vec::new(),
        })
    }

    /// Score to waveform. `durations` forces the frame counts, otherwise
    /// the predicted ones are used.
    pub fn synthesize(&self, input: &AmInput, durations: Option<&[usize]>) -> Result<(MelSpectrogram, Vec<f64>)> {
        let tape = Tape::new();
        let p = self.am.params.bind(&tape, false);
        let out = self.am.forward(&p, input, durations)?;
        if out.n_frames() == 0 {
            return Err(Error::Input("predicted durations are all zero".into()));
        }
        let mel = MelSpectrogram::from_tensor(&out.mel.value())?;
        let wave = self.gen.generate(&mel)?;
        Ok((mel, wave))
    }
}

/// What each model does during an epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Phase {
    run_am: bool,
    train_am: bool,
    train_voc: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Joint,
    /// AM alone until `t_start`, then the vocoder alone on the frozen AM's output.
    Cascade,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Run directory; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Checkpoint directory to continue from.
    pub resume_from: Option<PathBuf>,
    /// Stop once this many epochs are done (the config's epoch count still
    /// drives the schedule).
    pub stop_after: Option<u32>,
    /// Replace the acoustic model by a stub that never runs; needs `p = 0`
    /// throughout.
    pub am_stub: bool,
    /// Skip validation at the end.
    pub skip_eval: bool,
    /// Print one progress line per epoch to stderr.
    pub verbose: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    /// Per-utterance and pooled validation results, when evaluated.
    pub eval: Option<(Vec<(String, EvalReport)>, EvalReport)>,
}

pub fn train(cfg: &TrainConfig, corpus: &Corpus, opts: &TrainOptions) -> Result<TrainOutcome> {
    run(cfg, corpus, opts, Mode::Joint)
}

/// [`train`] on a step schedule switching to predicted features at `t_start`.
pub fn pretrain_and_finetune(cfg: &TrainConfig, t_start: u32, corpus: &Corpus, opts: &TrainOptions) -> Result<TrainOutcome> {
    train(&finetune_config(cfg, t_start), corpus, opts)
}

pub fn finetune_config(cfg: &TrainConfig, t_start: u32) -> TrainConfig {
    TrainConfig {
        schedule: ScheduleConfig::step(t_start, cfg.schedule.t_max),
        ..cfg.clone()
    }
}

/// The jt-ft configuration with gradients into the acoustic model cut.
pub fn cascade_config(cfg: &TrainConfig) -> TrainConfig {
    let mut c = cfg.clone();
    c.schedule = ScheduleConfig::step(cfg.schedule.t_start, cfg.schedule.t_max);
    c.train.joint_gradient = JointGradient::Detach;
    c
}

/// Trains the acoustic model alone until `t_start`, freezes it, then trains
/// the vocoder on its output only.
pub fn cascade_train(cfg: &TrainConfig, corpus: &Corpus, opts: &TrainOptions) -> Result<TrainOutcome> {
    run(&cascade_config(cfg), corpus, opts, Mode::Cascade)
}

fn phase(mode: Mode, schedule: &ScheduleConfig, epoch: u32, am_stub: bool) -> Phase {
    match mode {
        Mode::Joint => Phase {
            run_am: !am_stub,
            train_am: !am_stub,
            train_voc: true,
        },
        Mode::Cascade if epoch < schedule.t_start => Phase {
            run_am: true,
            train_am: true,
            train_voc: false,
        },
        Mode::Cascade => Phase {
            run_am: true,
            train_am: false,
            train_voc: true,
        },
    }
}

fn run(cfg: &TrainConfig, corpus: &Corpus, opts: &TrainOptions, mode: Mode) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.train.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    if opts.am_stub {
        let s = &cfg.schedule;
        let never = s.k == 0.0 || s.pattern == Pattern::TwoStage || s.t_start >= s.t_max;
        if !never || mode != Mode::Joint {
            return Err(Error::Config("the acoustic-model stub needs a schedule with p = 0 throughout".into()));
        }
    }
    let seg = corpus.segment_frames(cfg);
    let disc_min = Discriminators::new(&cfg.voc, &mut stream_rng(0, Stream::DiscInit, 0))?.min_length();
    if seg * cfg.stft.hop < disc_min {
        return Err(Error::Input(format!(
            "crops of {seg} frames are shorter than the discriminators accept ({disc_min} samples)"
        )));
    }
    let mut state = match &opts.resume_from {
        Some(dir) => load_checkpoint(dir, cfg)?,
        None => TrainState::init(cfg, corpus)?,
    };
    let ckpt_root = opts.out_dir.as_ref().map(|d| d.join("checkpoints"));
    if let Some(out) = &opts.out_dir {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_file(&out.join("config.txt"), &cfg.echo())?;
    }
    let ext = MelExtractor::new(&cfg.stft)?;
    let stop = opts.stop_after.unwrap_or(cfg.train.epochs).min(cfg.train.epochs);
    let mut last_checkpoint = opts.resume_from.clone();
    let trainer = Trainer { cfg, corpus, ext: &ext, seg };
    while state.epochs_done < stop {
        let epoch = state.epochs_done;
        let p = evaluate_schedule(&cfg.schedule, epoch)?;
        let ph = phase(mode, &cfg.schedule, epoch, opts.am_stub);
        let lr = cfg.train.optimizer.lr * cfg.train.lr_decay_gamma.powi(epoch as i32);
        let mut rng = stream_rng(cfg.train.seed, Stream::Data, epoch);
        for iter in 0..cfg.train.iters_per_epoch {
            let batch = trainer.sample_batch(&mut rng);
            let weight = match cfg.train.mix_mode {
                MixMode::Deterministic => p,
                MixMode::Bernoulli => {
                    let u: f64 = rng.random();
                    MixWeight::new(if u < p.p { 1.0 } else { 0.0 }, epoch)?
                }
            };
            let breakdown = trainer.step(&mut state, &batch, weight, ph, lr).map_err(|e| match e {
                Error::NonFinite(term) => Error::Diverged {
                    term,
                    epoch,
                    iter,
                    last_checkpoint: last_checkpoint.clone(),
                },
                other => other,
            })?;
            state.log.push(breakdown.log_line(epoch, iter));
        }
        state.epochs_done += 1;
        state.am_fingerprints.push(state.am.params.fingerprint());
        if opts.verbose {
            if let Some(line) = state.log.last() {
                eprintln!("epoch {}/{}: {line}", state.epochs_done, cfg.train.epochs);
            }
        }
        if let (Some(root), Some(out)) = (&ckpt_root, &opts.out_dir) {
            let dir = save_checkpoint(root, &state, cfg)?;
            prune_checkpoints(root, cfg.train.keep_checkpoints)?;
            write_log(&out.join("log.txt"), &state.log)?;
            last_checkpoint = Some(dir);
        }
    }
    if let Some(out) = &opts.out_dir {
        write_log(&out.join("log.txt"), &state.log)?;
    }
    let eval = if opts.skip_eval || corpus.val.is_empty() || state.epochs_done < cfg.train.epochs {
        None
    } else {
        let result = evaluate(&state, &corpus.val, cfg)?;
        if let Some(out) = &opts.out_dir {
            write_file(&out.join("eval.txt"), &eval_table(&result.0, &result.1))?;
        }
        Some(result)
    };
    Ok(TrainOutcome { state, eval })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_log(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = format!("{LOG_HEADER}\n");
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    write_file(path, &text)
}

/// Keeps the newest `keep` `epoch_N` directories.
fn prune_checkpoints(root: &Path, keep: usize) -> Result<()> {
    let mut epochs: Vec<(u32, PathBuf)> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            Some((name.strip_prefix("epoch_")?.parse().ok()?, e.path()))
        })
        .collect();
    epochs.sort();
    let n = epochs.len().saturating_sub(keep);
    for (_, dir) in &epochs[..n] {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

/// Validation with ground-truth durations, pooled over utterances.
pub fn evaluate(
    state: &TrainState,
    examples: &[Example],
    cfg: &TrainConfig,
) -> Result<(Vec<(String, EvalReport)>, EvalReport)> {
    let mut ev = Evaluator::new(&cfg.stft)?;
    let mut rows = Vec::with_capacity(examples.len());
    for ex in examples {
        let (_, wave) = state.synthesize(&ex.input, Some(&ex.durations))?;
        rows.push((ex.id.clone(), ev.add(&ex.wave, &wave)?));
    }
    Ok((rows, ev.report()?))
}

pub const EVAL_HEADER: &str = "id\tMCD\tF0_RMSE\tVUV_E\tSA\tframes";

/// TSV with one row per utterance and a final pooled `all` row.
pub fn eval_table(rows: &[(String, EvalReport)], pooled: &EvalReport) -> String {
    let mut out = format!("{EVAL_HEADER}\n");
    for (id, r) in rows.iter().map(|(id, r)| (id.as_str(), r)).chain([("all", pooled)]) {
        out.push_str(&format!(
            "{id}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
            r.mcd, r.f0_rmse, r.vuv_e, r.sa, r.n_frames
        ));
    }
    out
}

/// One random crop of a training example.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Crop {
    pub example: usize,
    pub start: usize,
}

struct Trainer<'a> {
    cfg: &'a TrainConfig,
    corpus: &'a Corpus,
    ext: &'a MelExtractor,
    seg: usize,
}

/// Vocoder inputs and targets for one batch.
struct Inputs<'t> {
    l_d: Option<Var<'t>>,
    l_ma: Option<Var<'t>>,
    pred: Option<Var<'t>>,
    gt: Option<Var<'t>>,
    real: Var<'t>,
    target: Var<'t>,
}

struct Branch<'t> {
    adv: Var<'t>,
    fm: Var<'t>,
    mel: Var<'t>,
}

impl Trainer<'_> {
    fn sample_batch(&self, rng: &mut ChaCha8Rng) -> Vec<Crop> {
        (0..self.cfg.train.batch_size)
            .map(|_| {
                let example = rng.random_range(0..self.corpus.train.len());
                let start = rng.random_range(0..=self.corpus.train[example].n_frames() - self.seg);
                Crop { example, start }
            })
            .collect()
    }

    fn inputs<'t>(
        &self,
        tape: &'t Tape,
        state: &TrainState,
        am_p: &Bound<'t>,
        batch: &[Crop],
        run_am: bool,
        branches: (bool, bool),
        detach: bool,
    ) -> Result<Inputs<'t>> {
        let (s, hop, m) = (self.seg, self.cfg.stft.hop, self.cfg.stft.n_mels);
        let b = batch.len();
        let mut l_d = Vec::new();
        let mut l_ma = Vec::new();
        let mut pred_parts = Vec::new();
        if run_am {
            for crop in batch {
                let ex = &self.corpus.train[crop.example];
                let out = state.am.forward(am_p, &ex.input, Some(&ex.durations))?;
                let x = tape.constant(ex.mel.to_tensor());
                let loss = am_loss(&out, x, &ex.durations, &self.cfg.weights)?;
                l_d.push(loss.l_d);
                l_ma.push(loss.l_ma);
                if branches.0 {
                    let rows = out.mel.gather(
                        std::rc::Rc::new((crop.start * m..(crop.start + s) * m).collect()),
                        &[s, m],
                    );
                    let rows = if detach { rows.detach() } else { rows };
                    pred_parts.push(rows.transpose2d());
                }
            }
        }
        let mean = |v: Vec<Var<'t>>| {
            let n = v.len() as f64;
            v.into_iter().reduce(|a, c| a + c).map(|t| t.scale(1.0 / n))
        };
        let pred = if branches.0 && run_am {
            Some(concat(&pred_parts).reshape(&[b, m, s]))
        } else {
            None
        };
        let gt = branches.1.then(|| {
            let mut data = Vec::with_capacity(b * m * s);
            for crop in batch {
                let mel = &self.corpus.train[crop.example].mel;
                for j in 0..m {
                    data.extend((crop.start..crop.start + s).map(|t| mel.frame(t)[j]));
                }
            }
            tape.constant(Tensor::new(&[b, m, s], data))
        });
        let mut real = Vec::with_capacity(b * s * hop);
        for crop in batch {
            let w = &self.corpus.train[crop.example].wave;
            real.extend_from_slice(&w[crop.start * hop..(crop.start + s) * hop]);
        }
        let real = tape.constant(Tensor::new(&[b, s * hop], real));
        let target = self.ext.forward(real);
        Ok(Inputs {
            l_d: mean(l_d),
            l_ma: mean(l_ma),
            pred,
            gt,
            real,
            target,
        })
    }

    fn branch<'t>(&self, disc: &Discriminators, d: &Bound<'t>, real: &DiscOutput<'t>, fake: Var<'t>, target: Var<'t>) -> Result<Branch<'t>> {
        let out = disc.forward(d, fake)?;
        Ok(Branch {
            adv: adversarial_generator_loss(&out.scores),
            fm: feature_matching_loss(&real.features, &out.features)?,
            mel: mel_reconstruction_loss(self.ext, fake, target)?,
        })
    }

    fn step(&self, state: &mut TrainState, batch: &[Crop], p: MixWeight, ph: Phase, lr: f64) -> Result<LossBreakdown> {
        let cfg = self.cfg;
        let w = &cfg.weights;
        let opt = &cfg.train.optimizer;
        let branches = if ph.train_voc { (p.p > 0.0 && ph.run_am, p.p < 1.0) } else { (false, false) };
        let detach = cfg.train.joint_gradient == JointGradient::Detach || !ph.train_am;
        let tape = Tape::new();
        let am_p = state.am.params.bind(&tape, ph.train_am);
        let g_p = state.gen.params.bind(&tape, ph.train_voc);
        let inp = self.inputs(&tape, state, &am_p, batch, ph.run_am, branches, detach)?;
        let fake_pred = inp.pred.map(|x| state.gen.forward(&g_p, x));
        let fake_gt = inp.gt.map(|x| state.gen.forward(&g_p, x));
        let mut c = Components {
            l_d: inp.l_d.map_or(0.0, |v| v.item()),
            l_ma: inp.l_ma.map_or(0.0, |v| v.item()),
            ..Components::default()
        };
        let (mut pred, mut gt) = (None, None);
        if ph.train_voc {
            let d_p = state.disc.params.bind(&tape, true);
            let real = state.disc.forward(&d_p, inp.real)?;
            let mut d_terms = [None, None];
            for (slot, fake) in d_terms.iter_mut().zip([fake_pred, fake_gt]) {
                if let Some(f) = fake {
                    let out = state.disc.forward(&d_p, f.detach())?;
                    *slot = Some(discriminator_loss(&real.scores, &out.scores)?);
                }
            }
            let [d_pred, d_gt] = d_terms;
            c.d_pred = d_pred.map_or(0.0, |v| v.item());
            c.d_gt = d_gt.map_or(0.0, |v| v.item());
            let l_d_mix = mix_var(&tape, p, d_pred, d_gt);
            if !l_d_mix.item().is_finite() {
                compose(p, &c, w)?;
            }
            let mut grads = tape.backward(l_d_mix);
            let g = d_p.grads(&mut grads);
            state.opt_disc.update(&mut state.disc.params, &g, opt, lr);

            let d_p = state.disc.params.bind(&tape, false);
            let real = state.disc.forward(&d_p, inp.real)?;
            pred = fake_pred.map(|f| self.branch(&state.disc, &d_p, &real, f, inp.target)).transpose()?;
            gt = fake_gt.map(|f| self.branch(&state.disc, &d_p, &real, f, inp.target)).transpose()?;
        }
        if let Some(b) = &pred {
            (c.adv_pred, c.f_pred, c.m_pred) = (b.adv.item(), b.fm.item(), b.mel.item());
        }
        if let Some(b) = &gt {
            (c.adv_gt, c.f_gt, c.m_gt) = (b.adv.item(), b.fm.item(), b.mel.item());
        }
        let breakdown = compose(p, &c, w)?;

        let zero = || tape.scalar(0.0);
        let l_am = inp.l_d.unwrap_or_else(zero).scale(w.lambda_d) + inp.l_ma.unwrap_or_else(zero).scale(w.lambda_ma);
        let adv = mix_var(&tape, p, pred.as_ref().map(|b| b.adv), gt.as_ref().map(|b| b.adv));
        let fm = mix_var(&tape, p, pred.as_ref().map(|b| b.fm), gt.as_ref().map(|b| b.fm));
        let mel = mix_var(&tape, p, pred.as_ref().map(|b| b.mel), gt.as_ref().map(|b| b.mel));
        let l_v = adv.scale(w.lambda_adv) + fm.scale(w.lambda_f) + mel.scale(w.lambda_m);
        let l_tot = l_am + l_v;
        assert_eq!(l_tot.item().to_bits(), breakdown.l_tot.to_bits());
        if ph.train_am || ph.train_voc {
            let mut grads = tape.backward(l_tot);
            if ph.train_am {
                let g = am_p.grads(&mut grads);
                state.opt_am.update(&mut state.am.params, &g, opt, lr);
            }
            if ph.train_voc {
                let g = g_p.grads(&mut grads);
                state.opt_gen.update(&mut state.gen.params, &g, opt, lr);
            }
        }
        let n = batch.len() as u64;
        if branches.0 {
            state.pred_inputs += n;
        }
        if branches.1 {
            state.gt_inputs += n;
        }
        Ok(breakdown)
    }
}

/// Gradient of `L_v` alone with respect to the acoustic-model parameters, with
/// both vocoder branches computed regardless of `p`. Used to check how
/// vocoder losses reach the acoustic model.
pub fn vocoder_gradient_into_am(
    cfg: &TrainConfig,
    corpus: &Corpus,
    state: &TrainState,
    batch: &[Crop],
    p: MixWeight,
) -> Result<Vec<Option<Tensor>>> {
    let ext = MelExtractor::new(&cfg.stft)?;
    let trainer = Trainer { cfg, corpus, ext: &ext, seg: corpus.segment_frames(cfg) };
    let w = &cfg.weights;
    let tape = Tape::new();
    let am_p = state.am.params.bind(&tape, true);
    let g_p = state.gen.params.bind(&tape, true);
    let d_p = state.disc.params.bind(&tape, false);
    let detach = cfg.train.joint_gradient == JointGradient::Detach;
    let inp = trainer.inputs(&tape, state, &am_p, batch, true, (true, true), detach)?;
    let real = state.disc.forward(&d_p, inp.real)?;
    let (Some(x_pred), Some(x_gt)) = (inp.pred, inp.gt) else {
        unreachable!("both branches requested");
    };
    let pred = trainer.branch(&state.disc, &d_p, &real, state.gen.forward(&g_p, x_pred), inp.target)?;
    let gt = trainer.branch(&state.disc, &d_p, &real, state.gen.forward(&g_p, x_gt), inp.target)?;
    let adv = mix_var(&tape, p, Some(pred.adv), Some(gt.adv));
    let fm = mix_var(&tape, p, Some(pred.fm), Some(gt.fm));
    let mel = mix_var(&tape, p, Some(pred.mel), Some(gt.mel));
    let l_v = adv.scale(w.lambda_adv) + fm.scale(w.lambda_f) + mel.scale(w.lambda_m);
    let mut grads = tape.backward(l_v);
    Ok(am_p.grads(&mut grads))
}

/// Training crops drawn exactly as the trainer draws them at `epoch`.
pub fn sample_batch(cfg: &TrainConfig, corpus: &Corpus, epoch: u32) -> Result<Vec<Crop>> {
    let ext = MelExtractor::new(&cfg.stft)?;
    let trainer = Trainer { cfg, corpus, ext: &ext, seg: corpus.segment_frames(cfg) };
    Ok(trainer.sample_batch(&mut stream_rng(cfg.train.seed, Stream::Data, epoch)))
}

#[cfg(test)]
mod tests;
