//! Summary rows, output files and the comparison table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fekan_core::train::{summarize, RunOutcome};
use serde::{Deserialize, Serialize};

use crate::preset::{basis_label, RunConfig};
use crate::run::{NtkReport, RunResult};
use crate::BenchError;

/// A setting as given by the preset and as actually run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effective {
    pub preset: usize,
    pub effective: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub experiment: String,
    #[serde(default)]
    pub problem: Option<String>,
    pub architecture: String,
    pub basis: String,
    pub basis_params: String,
    pub widths: Vec<usize>,
    /// Trainable parameter count.
    pub params: usize,
    pub seeds: Vec<u64>,
    pub rel_l2_mean: Option<f64>,
    /// Population standard deviation over completed seeds.
    pub rel_l2_std: Option<f64>,
    pub per_seed: Vec<Option<f64>>,
    pub completed: usize,
    pub diverged: usize,
    pub sec_per_iter: f64,
    pub epochs: Effective,
    pub n_res: Effective,
    /// `face_mse[seed][phase][face]` for forgetting runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub face_mse: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ntk: Vec<NtkReport>,
}

/// Aggregates a finished run. `preset` is the configuration before
/// desk-scale overrides.
pub fn emit_summary(preset: &RunConfig, result: &RunResult) -> SummaryRow {
    let cfg = &result.config;
    let outcomes: Vec<RunOutcome> = result.seeds.iter().map(|s| s.outcome.clone()).collect();
    let ms = summarize(&cfg.seeds, &outcomes);
    let (basis, basis_params) = basis_label(&cfg.model.basis);
    SummaryRow {
        name: cfg.name.clone(),
        experiment: cfg.experiment.command().into(),
        problem: cfg.problem.map(|p| p.slug().into()),
        architecture: cfg.architecture(),
        basis: basis.into(),
        basis_params,
        widths: cfg.model.widths.clone(),
        params: result.seeds.first().map(|s| s.params).unwrap_or(0),
        seeds: ms.seeds,
        rel_l2_mean: ms.mean,
        rel_l2_std: ms.std,
        per_seed: ms.per_seed,
        completed: ms.completed,
        diverged: ms.diverged,
        sec_per_iter: ms.sec_per_iter,
        epochs: Effective {
            preset: preset.train.epochs,
            effective: cfg.train.epochs,
        },
        n_res: Effective {
            preset: preset.data.n_res,
            effective: cfg.data.n_res,
        },
        face_mse: result.seeds.iter().filter_map(|s| s.face_mse.clone()).collect(),
        ntk: result.seeds.iter().filter_map(|s| s.ntk.as_ref().map(|n| n.0.clone())).collect(),
    }
}

pub fn records_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("records_{seed}.csv"))
}

/// Writes one training record stream with columns epoch, loss, l_res,
/// l_bc, l_ic, rel_l2, sec_per_iter, diverged.
pub fn write_records(path: &Path, outcome: &RunOutcome) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &outcome.records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes records, spectra and the summary of `result` into `dir`.
pub fn write_outputs(dir: &Path, row: &SummaryRow, result: &RunResult) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    for s in &result.seeds {
        write_records(&records_path(dir, s.seed), &s.outcome)?;
    }
    let with_spectra: Vec<_> = result.seeds.iter().filter_map(|s| s.ntk.as_ref().map(|n| (s.seed, &n.1))).collect();
    if let Some((_, first)) = with_spectra.first() {
        for (c, spectrum) in first.iter().enumerate() {
            let mut w = csv::Writer::from_path(dir.join(format!("spectra_{}.csv", spectrum.tau)))?;
            w.write_record(["seed", "tau", "index", "eigenvalue"])?;
            for (seed, spectra) in &with_spectra {
                let s = &spectra[c];
                for (i, v) in s.values.iter().enumerate() {
                    w.write_record([seed.to_string(), s.tau.to_string(), (i + 1).to_string(), v.to_string()])?;
                }
            }
            w.flush()?;
        }
    }
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(row)? + "\n")?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record([
        "name",
        "architecture",
        "basis",
        "basis_params",
        "params",
        "rel_l2_mean",
        "rel_l2_std",
        "sec_per_iter",
        "completed",
        "diverged",
    ])?;
    w.write_record(table_cells(row))?;
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.5}")).unwrap_or_else(|| "NaN".into())
}

fn table_cells(r: &SummaryRow) -> Vec<String> {
    vec![
        r.name.clone(),
        r.architecture.clone(),
        r.basis.clone(),
        r.basis_params.clone(),
        r.params.to_string(),
        opt(r.rel_l2_mean),
        opt(r.rel_l2_std),
        format!("{:.6}", r.sec_per_iter),
        r.completed.to_string(),
        r.diverged.to_string(),
    ]
}

pub fn read_summary(path: &Path) -> Result<SummaryRow, BenchError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Differences of each row against the first: relative L2 mean and
/// diverged count.
pub fn deltas(rows: &[SummaryRow]) -> Vec<(Option<f64>, i64)> {
    let Some(base) = rows.first() else {
        return Vec::new();
    };
    rows.iter()
        .map(|r| {
            let d = match (r.rel_l2_mean, base.rel_l2_mean) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            };
            (d, r.diverged as i64 - base.diverged as i64)
        })
        .collect()
}

/// Plain-text table of `rows` with deltas against the first row.
pub fn compare_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<28} {:<10} {:<10} {:<16} {:>7} {:>22} {:>10} {:>9} {:>12}",
        "name", "arch", "basis", "parameters", "params", "rel. L2", "sec/iter", "diverged", "delta L2"
    );
    for (r, (d, dd)) in rows.iter().zip(deltas(rows)) {
        let l2 = match (r.rel_l2_mean, r.rel_l2_std) {
            (Some(m), Some(sd)) => format!("{m:.5} ± {sd:.5}"),
            _ => "NaN".into(),
        };
        let _ = writeln!(
            s,
            "{:<28} {:<10} {:<10} {:<16} {:>7} {:>22} {:>10.5} {:>5}/{:<3} {:>12} ({dd:+})",
            r.name,
            r.architecture,
            r.basis,
            r.basis_params,
            r.params,
            l2,
            r.sec_per_iter,
            r.diverged,
            r.seeds.len(),
            d.map(|v| format!("{v:+.5}")).unwrap_or_else(|| "-".into()),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preset::load_presets;
    use crate::run::SeedResult;
    use fekan_core::train::TrainRecord;

    fn outcome(rel: Option<f64>, diverged: bool) -> RunOutcome {
        RunOutcome {
            records: vec![TrainRecord {
                epoch: 0,
                loss: 1.0,
                l_res: 1.0,
                l_bc: 0.0,
                l_ic: 0.0,
                rel_l2: rel,
                sec_per_iter: 0.5,
                diverged,
            }],
            diverged_at: diverged.then_some(0),
            epochs_run: 1,
            sec_per_iter: 0.5,
        }
    }

    fn result(outs: Vec<RunOutcome>) -> RunResult {
        let mut config = load_presets()["funfit-kan-spline"].clone();
        config.seeds = (0..outs.len() as u64).collect();
        RunResult {
            config,
            seeds: outs
                .into_iter()
                .enumerate()
                .map(|(i, outcome)| SeedResult {
                    seed: i as u64,
                    params: 10,
                    outcome,
                    face_mse: None,
                    ntk: None,
                })
                .collect(),
        }
    }

    #[test]
    fn one_seed_has_zero_std() {
        let r = result(vec![outcome(Some(0.1), false)]);
        let row = emit_summary(&r.config, &r);
        assert_eq!(row.rel_l2_std, Some(0.0));
        assert_eq!(row.rel_l2_mean, Some(0.1));
    }

    #[test]
    fn mixed_runs_report_both_counts() {
        let r = result(vec![outcome(Some(0.1), false), outcome(None, true)]);
        let row = emit_summary(&r.config, &r);
        assert_eq!((row.completed, row.diverged), (1, 1));
        assert_eq!(row.per_seed, vec![Some(0.1), None]);
    }

    #[test]
    fn summary_json_round_trips_and_files_exist() {
        let r = result(vec![outcome(Some(0.1), false), outcome(Some(0.3), false)]);
        let row = emit_summary(&r.config, &r);
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &row, &r).unwrap();
        assert_eq!(read_summary(&dir.path().join("summary.json")).unwrap(), row);
        let rec = std::fs::read_to_string(records_path(dir.path(), 1)).unwrap();
        assert!(rec.starts_with("epoch,loss,l_res,l_bc,l_ic,rel_l2,sec_per_iter,diverged\n"));
        assert!(dir.path().join("summary.csv").exists());
    }

    #[test]
    fn identical_inputs_compare_with_zero_deltas() {
        let r = result(vec![outcome(Some(0.2), false)]);
        let row = emit_summary(&r.config, &r);
        let d = deltas(&[row.clone(), row.clone()]);
        assert_eq!(d[1], (Some(0.0), 0));
        assert!(compare_table(&[row.clone(), row]).contains("+0.00000"));
    }
}
