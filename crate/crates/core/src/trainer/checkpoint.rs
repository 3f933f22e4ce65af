//! `checkpoints/epoch_N/` holds `config.txt` (the config echo), `manifest.txt`
//! (counters, optimiser steps and the tensor index), `params.bin` (values,
//! first and second moments of every tensor as little-endian f64) and
//! `log.txt` (the loss log up to that epoch).

use std::fs;
use std::path::{Path, PathBuf};

use super::{TrainConfig, TrainState};
use crate::autograd::Tensor;
use crate::error::{Error, Result};
use crate::nn::{AdamW, ParamStore};

pub const CHECKPOINT_VERSION: u32 = 1;

fn stores(state: &TrainState) -> [(&'static str, &ParamStore, &AdamW); 3] {
    [
        ("am", &state.am.params, &state.opt_am),
        ("gen", &state.gen.params, &state.opt_gen),
        ("disc", &state.disc.params, &state.opt_disc),
    ]
}

/// Writes `root/epoch_<epochs_done>/` and returns its path.
pub fn save_checkpoint(root: &Path, state: &TrainState, cfg: &TrainConfig) -> Result<PathBuf> {
    let dir = root.join(format!("epoch_{}", state.epochs_done));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut manifest = format!(
        "version = {CHECKPOINT_VERSION}\nepochs_done = {}\npred_inputs = {}\ngt_inputs = {}\n",
        state.epochs_done, state.pred_inputs, state.gt_inputs
    );
    manifest.push_str(&format!(
        "am_fingerprints = {}\n",
        state.am_fingerprints.iter().map(|f| format!("{f:016x}")).collect::<Vec<_>>().join(" ")
    ));
    let mut bin = Vec::new();
    for (name, store, opt) in stores(state) {
        manifest.push_str(&format!("adam {name} {}\n", opt.step));
        for (i, (pname, t)) in store.iter().enumerate() {
            let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            manifest.push_str(&format!("tensor {name} {pname} {}\n", shape.join(",")));
            for src in [t, &opt.m[i], &opt.v[i]] {
                bin.extend(src.data().iter().flat_map(|v| v.to_le_bytes()));
            }
        }
    }
    let write = |file: &str, bytes: &[u8]| {
        let p = dir.join(file);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    write("config.txt", cfg.echo().as_bytes())?;
    write("manifest.txt", manifest.as_bytes())?;
    write("params.bin", &bin)?;
    write("log.txt", state.log.iter().map(|l| format!("{l}\n")).collect::<String>().as_bytes())?;
    Ok(dir)
}

/// Restores a state saved under the same configuration.
pub fn load_checkpoint(dir: &Path, cfg: &TrainConfig) -> Result<TrainState> {
    let read = |file: &str| {
        let p = dir.join(file);
        fs::read(&p).map_err(|e| Error::io(&p, e))
    };
    let text = |file: &str| read(file).map(|b| String::from_utf8_lossy(&b).into_owned());
    let saved = text("config.txt")?;
    if saved != cfg.echo() {
        return Err(Error::Checkpoint(format!("{} was written under a different config", dir.display())));
    }
    let mut state = TrainState::fresh(cfg)?;
    let manifest = text("manifest.txt")?;
    let bin = read("params.bin")?;
    let mut offset = 0usize;
    let mut version = None;
    let mut next_f64s = |n: usize| -> Result<Vec<f64>> {
        let end = offset + 8 * n;
        let bytes = bin
            .get(offset..end)
            .ok_or_else(|| Error::Checkpoint("params.bin is truncated".into()))?;
        offset = end;
        Ok(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
    };
    let mut cursor = [0usize; 3];
    for line in manifest.lines() {
        let bad = || Error::Checkpoint(format!("malformed manifest line `{line}`"));
        if let Some((k, v)) = line.split_once(" = ") {
            let num = || v.parse::<u64>().map_err(|_| bad());
            match k {
                "version" => version = Some(num()?),
                "epochs_done" => state.epochs_done = num()? as u32,
                "pred_inputs" => state.pred_inputs = num()?,
                "gt_inputs" => state.gt_inputs = num()?,
                "am_fingerprints" => {
                    state.am_fingerprints = v
                        .split_whitespace()
                        .map(|f| u64::from_str_radix(f, 16).map_err(|_| bad()))
                        .collect::<Result<_>>()?;
                }
                _ => return Err(bad()),
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[..] {
            ["adam", store, step] => {
                let step = step.parse().map_err(|_| bad())?;
                match store {
                    "am" => state.opt_am.step = step,
                    "gen" => state.opt_gen.step = step,
                    "disc" => state.opt_disc.step = step,
                    _ => return Err(bad()),
                }
            }
            ["tensor", store, name, shape] => {
                let (slot, params, opt) = match store {
                    "am" => (0, &mut state.am.params, &mut state.opt_am),
                    "gen" => (1, &mut state.gen.params, &mut state.opt_gen),
                    "disc" => (2, &mut state.disc.params, &mut state.opt_disc),
                    _ => return Err(bad()),
                };
                let i = cursor[slot];
                cursor[slot] += 1;
                let id = params.ids().nth(i).ok_or_else(bad)?;
                let shape: Vec<usize> = shape.split(',').map(|s| s.parse().map_err(|_| bad())).collect::<Result<_>>()?;
                if params.name(id) != name || params.get(id).shape() != shape.as_slice() {
                    return Err(Error::Checkpoint(format!("tensor `{name}` does not match the model")));
                }
                let n: usize = shape.iter().product();
                *params.get_mut(id) = Tensor::new(&shape, next_f64s(n)?);
                opt.m[i] = Tensor::new(&shape, next_f64s(n)?);
                opt.v[i] = Tensor::new(&shape, next_f64s(n)?);
            }
            _ => return Err(bad()),
        }
    }
    if version != Some(u64::from(CHECKPOINT_VERSION)) {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version:?}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let lens = [state.am.params.len(), state.gen.params.len(), state.disc.params.len()];
    if cursor != lens || offset != bin.len() {
        return Err(Error::Checkpoint("checkpoint does not cover the whole model".into()));
    }
    state.log = text("log.txt")?.lines().map(String::from).collect();
    Ok(state)
}
