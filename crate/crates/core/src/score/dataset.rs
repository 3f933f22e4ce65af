//! On-disk corpus layout:
//!
//! ```text
//! manifest.txt        one utterance id per line
//! scores/<id>.txt     score text
//! wav/<id>.raw        headerless little-endian i16 samples
//! wav/<id>.txt        sidecar: `sample_rate = <hz>` and `samples = <n>`
//! ```

use std::fs;
use std::path::Path;

use super::synth::to_i16;
use super::{parse_score, serialize_score, PhonemeInventory, Utterance};
use crate::error::{Error, Result};

/// Free-form provenance written next to the manifest.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetMeta {
    pub lines: Vec<(String, String)>,
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

impl DatasetMeta {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// `dataset.txt`, or empty metadata when the file is absent.
pub fn read_meta(dir: &Path) -> Result<DatasetMeta> {
    let path = dir.join("dataset.txt");
    if !path.exists() {
        return Ok(DatasetMeta::default());
    }
    let text = String::from_utf8_lossy(&read(&path)?).into_owned();
    let lines = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect();
    Ok(DatasetMeta { lines })
}

/// The `phonemes` entry of the metadata (space separated), else the default inventory.
pub fn dataset_inventory(dir: &Path) -> Result<PhonemeInventory> {
    match read_meta(dir)?.get("phonemes") {
        Some(list) => PhonemeInventory::new(list.split_whitespace().map(String::from).collect()),
        None => Ok(PhonemeInventory::default()),
    }
}

pub fn write_dataset(dir: &Path, utterances: &[Utterance], meta: &DatasetMeta) -> Result<()> {
    for sub in ["scores", "wav"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut ids: Vec<&str> = utterances.iter().map(|u| u.id.as_str()).collect();
    ids.sort_unstable();
    write(&dir.join("manifest.txt"), ids.iter().map(|id| format!("{id}\n")).collect::<String>())?;
    if !meta.lines.is_empty() {
        let text: String = meta.lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        write(&dir.join("dataset.txt"), text)?;
    }
    for u in utterances {
        write(&dir.join("scores").join(format!("{}.txt", u.id)), serialize_score(&u.score))?;
        write_waveform(&dir.join("wav"), &u.id, &u.waveform, u.sample_rate)?;
    }
    Ok(())
}

/// Writes `<dir>/<id>.raw` and its sidecar.
pub(crate) fn write_waveform(dir: &Path, id: &str, samples: &[f64], sample_rate: u32) -> Result<()> {
    let raw: Vec<u8> = samples.iter().flat_map(|&v| to_i16(v).to_le_bytes()).collect();
    write(&dir.join(format!("{id}.raw")), raw)?;
    write(
        &dir.join(format!("{id}.txt")),
        format!("sample_rate = {sample_rate}\nsamples = {}\n", samples.len()),
    )
}

pub(crate) fn read_waveform(dir: &Path, id: &str) -> Result<(Vec<f64>, u32)> {
    let side_path = dir.join(format!("{id}.txt"));
    let side = String::from_utf8_lossy(&read(&side_path)?).into_owned();
    let mut sample_rate = None;
    let mut samples = None;
    for line in side.lines() {
        if let Some((k, v)) = line.split_once('=') {
            match k.trim() {
                "sample_rate" => sample_rate = v.trim().parse::<u32>().ok(),
                "samples" => samples = v.trim().parse::<usize>().ok(),
                _ => {}
            }
        }
    }
    let sample_rate = sample_rate
        .ok_or_else(|| Error::Input(format!("{}: missing sample_rate", side_path.display())))?;
    let raw_path = dir.join(format!("{id}.raw"));
    let raw = read(&raw_path)?;
    if raw.len() % 2 != 0 {
        return Err(Error::Input(format!("{}: odd byte count", raw_path.display())));
    }
    let wave: Vec<f64> = raw
        .chunks_exact(2)
        .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
        .collect();
    if samples.is_some_and(|n| n != wave.len()) {
        return Err(Error::Input(format!("{}: sample count disagrees with sidecar", raw_path.display())));
    }
    Ok((wave, sample_rate))
}

pub(crate) fn read_manifest(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join("manifest.txt");
    let text = String::from_utf8_lossy(&read(&path)?).into_owned();
    let mut ids: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    ids.sort();
    Ok(ids)
}

/// Loads every utterance listed in the manifest, sorted by id.
pub fn read_dataset(dir: &Path, inventory: &PhonemeInventory) -> Result<Vec<Utterance>> {
    read_manifest(dir)?
        .into_iter()
        .map(|id| {
            let score_path = dir.join("scores").join(format!("{id}.txt"));
            let score = parse_score(&read(&score_path)?, inventory).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Input(format!("{}:{line}: {msg}", score_path.display())),
                other => other,
            })?;
            let (waveform, sample_rate) = read_waveform(&dir.join("wav"), &id)?;
            Ok(Utterance {
                id,
                score,
                waveform,
                sample_rate,
            })
        })
        .collect()
}
