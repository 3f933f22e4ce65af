use std::fs;
use std::path::Path;

use super::{train, Corpus, TrainOptions};
use crate::config::{GridSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::schedule::{classify_schedule, Regime};

/// Seed-averaged result of one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub regime: Regime,
    /// Per seed: the pooled validation report, or the error message.
    pub runs: Vec<(u64, std::result::Result<EvalReport, String>)>,
}

impl AblationRow {
    /// Mean over the seeds that completed.
    pub fn mean(&self) -> Option<EvalReport> {
        let ok: Vec<&EvalReport> = self.runs.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
        if ok.is_empty() {
            return None;
        }
        let n = ok.len() as f64;
        let avg = |f: fn(&EvalReport) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
        Some(EvalReport {
            mcd: avg(|r| r.mcd),
            f0_rmse: avg(|r| r.f0_rmse),
            vuv_e: avg(|r| r.vuv_e),
            sa: avg(|r| r.sa),
            n_frames: ok.iter().map(|r| r.n_frames).sum(),
            n_voiced_both: ok.iter().map(|r| r.n_voiced_both).sum(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

pub const ABLATION_HEADER: &str = "cell\tregime\tMCD\tF0_RMSE\tVUV_E\tSA\tseeds_ok\tseeds";

impl AblationTable {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{ABLATION_HEADER}\n");
        for row in &self.rows {
            let ok = row.runs.iter().filter(|(_, r)| r.is_ok()).count();
            let metrics = match row.mean() {
                Some(m) => format!("{:.4}\t{:.4}\t{:.4}\t{:.4}", m.mcd, m.f0_rmse, m.vuv_e, m.sa),
                None => "nan\tnan\tnan\tnan".to_string(),
            };
            out.push_str(&format!("{}\t{}\t{metrics}\t{ok}\t{}\n", row.label, row.regime, row.runs.len()));
        }
        out
    }
}

fn dir_name(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Trains every cell for every seed. A failing run is recorded in its row
/// and in `<out>/<cell>/seed_<s>/error.txt`; the grid carries on.
pub fn ablate(base: &TrainConfig, grid: &GridSpec, corpus: &Corpus, out: Option<&Path>, verbose: bool) -> Result<AblationTable> {
    let cells = grid.cells(base)?;
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let regime = classify_schedule(&cell.config.schedule)?;
        let mut runs = Vec::with_capacity(grid.seeds.len());
        for &seed in &grid.seeds {
            let mut cfg = cell.config.clone();
            cfg.train.seed = seed;
            let run_dir = out.map(|o| o.join(dir_name(&cell.label)).join(format!("seed_{seed}")));
            let opts = TrainOptions {
                out_dir: run_dir.clone(),
                verbose,
                ..TrainOptions::default()
            };
            let result = train(&cfg, corpus, &opts)
                .and_then(|o| o.eval.map(|(_, pooled)| pooled).ok_or_else(|| Error::Input("no validation set".into())))
                .map_err(|e| e.to_string());
            if let (Err(msg), Some(dir)) = (&result, &run_dir) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let p = dir.join("error.txt");
                fs::write(&p, format!("{msg}\n")).map_err(|e| Error::io(&p, e))?;
            }
            if verbose {
                eprintln!("{} seed {seed}: {:?}", cell.label, result.as_ref().map(|r| r.mcd));
            }
            runs.push((seed, result));
        }
        rows.push(AblationRow {
            label: cell.label,
            regime,
            runs,
        });
    }
    let table = AblationTable { rows };
    if let Some(o) = out {
        fs::create_dir_all(o).map_err(|e| Error::io(o, e))?;
        let p = o.join("ablation.tsv");
        fs::write(&p, table.to_tsv()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(table)
}
