//! Summary tables built from run records.
//!
//! `grid_summary.csv` has one row per run plus, for every setting run on more
//! than one task, a `mean` row averaging the metrics over tasks. The figure
//! table averages the summary over seeds.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use cnre_core::math::spearman;

use crate::run::RunRecord;

/// Task label of the rows averaged over tasks.
pub const MEAN_TASK: &str = "mean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub variant: String,
    pub gamma: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub arch: String,
    pub regime: String,
    pub budget: usize,
    pub seed: u64,
    pub c2st_mean: Option<f64>,
    pub neg_mi0_best: Option<f64>,
    pub z_hat_med: Option<f64>,
}

type SettingKey = (String, String, usize, String, String, usize, u64);

impl SummaryRow {
    fn setting(&self) -> SettingKey {
        (
            self.variant.clone(),
            self.gamma.clone(),
            self.k,
            self.arch.clone(),
            self.regime.clone(),
            self.budget,
            self.seed,
        )
    }
}

fn mean_of(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = v.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Rows for successful runs, sorted, followed by the mean-over-tasks rows.
pub fn aggregate(records: &[RunRecord]) -> Vec<SummaryRow> {
    let rows: Vec<SummaryRow> = records
        .iter()
        .filter_map(|r| {
            let m = r.metrics.as_ref()?;
            let c = &r.config;
            Some(SummaryRow {
                task: c.task.clone(),
                variant: format!("nre-{}", c.loss.variant).to_lowercase(),
                gamma: c.loss.gamma_label(),
                k: c.loss.k,
                arch: c.arch.to_string(),
                regime: c.regime.to_string(),
                budget: c.simulation_budget,
                seed: r.seed,
                c2st_mean: m.c2st_mean,
                neg_mi0_best: m.neg_mi0_best,
                z_hat_med: m.z_hat.as_ref().map(|z| z.median),
            })
        })
        .collect();
    reaggregate(&rows)
}

/// Strips mean rows and recomputes them; a no-op on `aggregate` output.
pub fn reaggregate(rows: &[SummaryRow]) -> Vec<SummaryRow> {
    let mut base: Vec<SummaryRow> = rows.iter().filter(|r| r.task != MEAN_TASK).cloned().collect();
    base.sort_by(|a, b| (a.setting(), &a.task).cmp(&(b.setting(), &b.task)));
    let mut groups: BTreeMap<SettingKey, Vec<&SummaryRow>> = BTreeMap::new();
    for r in &base {
        groups.entry(r.setting()).or_default().push(r);
    }
    let means: Vec<SummaryRow> = groups
        .into_values()
        .filter(|g| g.len() > 1)
        .map(|g| SummaryRow {
            task: MEAN_TASK.to_string(),
            c2st_mean: mean_of(g.iter().map(|r| r.c2st_mean)),
            neg_mi0_best: mean_of(g.iter().map(|r| r.neg_mi0_best)),
            z_hat_med: mean_of(g.iter().map(|r| r.z_hat_med)),
            ..g[0].clone()
        })
        .collect();
    base.extend(means);
    base
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Every `record.json` below `dir`, in path order.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<_> = WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name() == "record.json")
        .map(|e| e.into_path())
        .collect();
    paths.sort();
    paths.iter().map(|p| RunRecord::load(p)).collect()
}

/// Seed-averaged metrics per `(task, variant, gamma, K, arch, regime, budget)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub task: String,
    pub variant: String,
    pub gamma: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub arch: String,
    pub regime: String,
    pub budget: usize,
    pub seeds: usize,
    pub c2st_mean: Option<f64>,
    pub neg_mi0_best: Option<f64>,
    pub z_hat_med: Option<f64>,
}

pub fn figure_table(rows: &[SummaryRow]) -> Vec<FigureRow> {
    let mut groups: BTreeMap<(String, String, String, usize, String, String, usize), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.task.clone(),
            r.variant.clone(),
            r.gamma.clone(),
            r.k,
            r.arch.clone(),
            r.regime.clone(),
            r.budget,
        );
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((task, variant, gamma, k, arch, regime, budget), g)| FigureRow {
            task,
            variant,
            gamma,
            k,
            arch,
            regime,
            budget,
            seeds: g.len(),
            c2st_mean: mean_of(g.iter().map(|r| r.c2st_mean)),
            neg_mi0_best: mean_of(g.iter().map(|r| r.neg_mi0_best)),
            z_hat_med: mean_of(g.iter().map(|r| r.z_hat_med)),
        })
        .collect()
}

/// Spearman correlation between `c2st_mean` and `neg_mi0_best` over per-task
/// rows where both are present, with the number of rows used.
pub fn c2st_mi_correlation(rows: &[SummaryRow]) -> Option<(f64, usize)> {
    let (a, b): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.task != MEAN_TASK)
        .filter_map(|r| Some((r.c2st_mean?, r.neg_mi0_best?)))
        .unzip();
    (a.len() >= 3).then(|| (spearman(&a, &b), a.len()))
}
