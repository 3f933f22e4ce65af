//! Command-line front end. Exit codes: 0 success, 1 usage or input error,
//! 2 training diverged.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::am::AmInput;
use crate::config::{GridSpec, TrainConfig};
use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::metrics::Evaluator;
use crate::plot::plot_schedule;
use crate::score::dataset::{read_manifest, read_waveform};
use crate::score::{
    dataset_inventory, generate_synthetic_dataset, parse_score, read_dataset, write_dataset, DatasetMeta,
    PhonemeInventory, SynthConfig,
};
use crate::trainer::{
    ablate, cascade_train, eval_table, load_checkpoint, train, Corpus, TrainOptions, TrainState,
};

#[derive(Debug, Parser)]
#[command(name = "svs-joint", version, about = "Scheduled joint training of a toy singing voice synthesizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Regime {
    /// Scheduled joint training.
    Joint,
    /// Acoustic model first, then the vocoder on its frozen output.
    Cascade,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic singing corpus.
    DataSynth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 70)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        phonemes: usize,
        #[arg(long, default_value_t = 8000)]
        sample_rate: u32,
        #[arg(long, default_value_t = 100)]
        hop: usize,
    },
    /// Train on a dataset directory and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint directory to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Regime::Joint)]
        regime: Regime,
        #[arg(long)]
        quiet: bool,
    },
    /// Synthesize from a checkpoint: one score to a WAV file, or a whole
    /// dataset (ground-truth durations) to a dataset directory.
    Synth {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, conflicts_with = "data", required_unless_present = "data")]
        score: Option<PathBuf>,
        /// Dataset to resynthesize; also supplies the phoneme inventory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// WAV file with --score, directory with --data.
        #[arg(long)]
        out: PathBuf,
        /// Dataset directory whose phoneme inventory applies to --score.
        #[arg(long)]
        phonemes_from: Option<PathBuf>,
    },
    /// Compare generated waveforms with references, utterance by utterance.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        gen: PathBuf,
        /// Config supplying the analysis settings (desk preset otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot p(t) of a config's schedule as PNG plus a TSV twin.
    SchedulePlot {
        #[arg(long)]
        config: Option<PathBuf>,
        /// PNG path; the TSV is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
    },
    /// Run an ablation grid.
    Ablate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Base config (desk preset otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e @ Error::Diverged { .. }) => {
            eprintln!("error: {e}");
            if let Error::Diverged { last_checkpoint: Some(p), .. } = &e {
                eprintln!("last good checkpoint: {}", p.display());
            }
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::parse(&read_text(p)?),
        None => Ok(TrainConfig::desk()),
    }
}

fn load_run(ckpt: &Path) -> Result<(TrainConfig, TrainState)> {
    let cfg = TrainConfig::parse(&read_text(&ckpt.join("config.txt"))?)?;
    let state = load_checkpoint(ckpt, &cfg)?;
    Ok((cfg, state))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::DataSynth { out, n, seed, phonemes, sample_rate, hop } => {
            if n == 0 {
                return Err(Error::Input("--n must be at least 1".into()));
            }
            let cfg = SynthConfig {
                count: n,
                inventory_size: phonemes,
                sample_rate,
                hop,
                ..SynthConfig::default()
            };
            let utts = generate_synthetic_dataset(&cfg, seed)?;
            let inventory = PhonemeInventory::with_size(phonemes)?;
            let preset = if sample_rate == 8000 && hop == 100 { "desk" } else { "custom" };
            let meta = DatasetMeta {
                lines: vec![
                    ("generator".into(), "synthetic".into()),
                    ("preset".into(), preset.into()),
                    ("count".into(), n.to_string()),
                    ("seed".into(), seed.to_string()),
                    ("sample_rate".into(), sample_rate.to_string()),
                    ("hop".into(), hop.to_string()),
                    ("phonemes".into(), inventory.symbols().join(" ")),
                ],
            };
            write_dataset(&out, &utts, &meta)?;
            println!("wrote {n} utterances to {}", out.display());
        }
        Command::Train { config, data, out, resume, regime, quiet } => {
            let cfg = load_config(Some(&config))?;
            let corpus = Corpus::load(&data, &cfg)?;
            let opts = TrainOptions {
                out_dir: Some(out.clone()),
                resume_from: resume,
                verbose: !quiet,
                ..TrainOptions::default()
            };
            let outcome = match regime {
                Regime::Joint => train(&cfg, &corpus, &opts)?,
                Regime::Cascade => cascade_train(&cfg, &corpus, &opts)?,
            };
            if let Some((_, r)) = outcome.eval {
                println!(
                    "validation MCD {:.4} F0_RMSE {:.4} VUV_E {:.4} SA {:.4}",
                    r.mcd, r.f0_rmse, r.vuv_e, r.sa
                );
            }
            println!("run directory: {}", out.display());
        }
        Command::Synth { ckpt, score, data, out, phonemes_from } => {
            let (cfg, state) = load_run(&ckpt)?;
            if let Some(score_path) = score {
                let inventory = match phonemes_from {
                    Some(dir) => dataset_inventory(&dir)?,
                    None => PhonemeInventory::default(),
                };
                let bytes = fs::read(&score_path).map_err(|e| Error::io(&score_path, e))?;
                let score = parse_score(&bytes, &inventory)?;
                let input = AmInput::from_score(&score, &inventory, cfg.stft.frame_period())?;
                let (mel, wave) = state.synthesize(&input, None)?;
                write_wav(&out, &wave, cfg.stft.sample_rate)?;
                println!("{} frames, {} samples -> {}", mel.n_frames, wave.len(), out.display());
            } else if let Some(data_dir) = data {
                let corpus_cfg = TrainConfig { data: crate::config::DataParams { n_val: 0 }, ..cfg.clone() };
                let inventory = dataset_inventory(&data_dir)?;
                let utts = read_dataset(&data_dir, &inventory)?;
                let corpus = Corpus::new(utts.clone(), inventory, &corpus_cfg)?;
                let mut generated = Vec::with_capacity(utts.len());
                for (u, ex) in utts.into_iter().zip(&corpus.train) {
                    let (_, wave) = state.synthesize(&ex.input, Some(&ex.durations))?;
                    generated.push(crate::score::Utterance { waveform: wave, ..u });
                }
                write_dataset(&out, &generated, &crate::score::read_meta(&data_dir)?)?;
                println!("resynthesized {} utterances to {}", generated.len(), out.display());
            }
        }
        Command::Eval { reference, gen, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let table = eval_dirs(&reference, &gen, &cfg.stft)?;
            print!("{table}");
            if let Some(p) = out {
                fs::write(&p, &table).map_err(|e| Error::io(&p, e))?;
            }
        }
        Command::SchedulePlot { config, out, resolution } => {
            let cfg = load_config(config.as_deref())?;
            let points = plot_schedule(&cfg.schedule, resolution, &out)?;
            println!(
                "{} points -> {} and {}",
                points.len(),
                out.display(),
                out.with_extension("tsv").display()
            );
        }
        Command::Ablate { grid, data, out, config, quiet } => {
            let base = load_config(config.as_deref())?;
            let grid = GridSpec::parse(&read_text(&grid)?)?;
            let corpus = Corpus::load(&data, &base)?;
            let table = ablate(&base, &grid, &corpus, Some(&out), !quiet)?;
            print!("{}", table.to_tsv());
        }
    }
    Ok(())
}

/// 16-bit mono PCM.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let err = |e: hound::Error| Error::Input(format!("{}: {e}", path.display()));
    let mut w = hound::WavWriter::create(path, spec).map_err(err)?;
    for &s in samples {
        w.write_sample(crate::score::synth::to_i16(s)).map_err(err)?;
    }
    w.finalize().map_err(err)
}

/// Evaluates every id present in both directories; a pooled `all` row ends the table.
pub fn eval_dirs(reference: &Path, generated: &Path, stft: &StftConfig) -> Result<String> {
    let gen_ids = read_manifest(generated)?;
    let ids: Vec<String> = read_manifest(reference)?.into_iter().filter(|id| gen_ids.contains(id)).collect();
    if ids.is_empty() {
        return Err(Error::Input("no utterance ids in common".into()));
    }
    let mut ev = Evaluator::new(stft)?;
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        let (a, sr_a) = read_waveform(&reference.join("wav"), &id)?;
        let (b, sr_b) = read_waveform(&generated.join("wav"), &id)?;
        if sr_a != stft.sample_rate || sr_b != stft.sample_rate {
            return Err(Error::Input(format!(
                "{id}: sample rates {sr_a}/{sr_b} Hz, analysis expects {} Hz",
                stft.sample_rate
            )));
        }
        rows.push((id, ev.add(&a, &b)?));
    }
    Ok(eval_table(&rows, &ev.report()?))
}
