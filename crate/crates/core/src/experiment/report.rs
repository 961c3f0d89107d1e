use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::probe::ProbeReport;
use crate::models::{EpochMetrics, ModelKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedEdge {
    pub u: usize,
    pub v: usize,
    pub score_wf: f64,
    pub score_wb: f64,
    pub fused: f64,
    /// Whether the endpoint labels differ, when both are known.
    pub cross_class: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub epoch: usize,
    pub lambda: f64,
    pub candidates: usize,
    pub selected: Vec<SelectedEdge>,
    pub provider_calls: usize,
    pub paid_pairs: usize,
    /// Classes that had no labelled training node during clustering.
    pub empty_cluster_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub budget: usize,
    pub selected: usize,
    pub paid: usize,
    pub provider_calls: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub total_secs: f64,
    pub training_secs: f64,
    pub scoring_secs: f64,
    pub query_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub seed: u64,
    pub nodes: usize,
    pub edges: usize,
    pub classes: usize,
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Evaluated once, with the best-validation checkpoint.
    pub test_acc: f64,
    pub rounds: Vec<RoundLog>,
    pub budget: BudgetSummary,
    pub edge_homophily: Option<f64>,
    pub node_homophily: Option<f64>,
    pub probe: Option<ProbeReport>,
    /// Training stopped because the budget ran out.
    pub halted_on_budget: bool,
    pub timings: Timings,
}

impl RunReport {
    /// Every selected pair across all rounds, in selection order.
    pub fn selected_pairs(&self) -> Vec<(usize, usize)> {
        self.rounds.iter().flat_map(|r| r.selected.iter().map(|e| (e.u, e.v))).collect()
    }
}

/// One row of a budget sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: usize,
    pub selected: usize,
    pub test_acc: f64,
    pub best_val_acc: f64,
    pub cost_usd: f64,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

/// Writes `report.json`, `epochs.csv` and `rounds.csv` into `dir`.
pub fn export_report(report: &RunReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let json_path = dir.join("report.json");
    let mut w = BufWriter::new(File::create(&json_path).map_err(|e| Error::io(&json_path, e))?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.flush().map_err(|e| Error::io(&json_path, e))?;

    let mut ew = csv_writer(&dir.join("epochs.csv"))?;
    ew.write_record(["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "enhanced_edges"])?;
    for m in &report.epochs {
        ew.write_record([
            m.epoch.to_string(),
            m.train_loss.to_string(),
            m.train_acc.to_string(),
            m.val_loss.to_string(),
            m.val_acc.to_string(),
            m.enhanced_edges.to_string(),
        ])?;
    }
    ew.flush().map_err(|e| Error::io(dir.join("epochs.csv"), e))?;

    let mut rw = csv_writer(&dir.join("rounds.csv"))?;
    rw.write_record(["round", "epoch", "lambda", "u", "v", "score_wf", "score_wb", "fused", "cross_class"])?;
    for r in &report.rounds {
        for e in &r.selected {
            rw.write_record([
                r.round.to_string(),
                r.epoch.to_string(),
                r.lambda.to_string(),
                e.u.to_string(),
                e.v.to_string(),
                e.score_wf.to_string(),
                e.score_wb.to_string(),
                e.fused.to_string(),
                e.cross_class.map(|c| c.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    rw.flush().map_err(|e| Error::io(dir.join("rounds.csv"), e))?;
    Ok(())
}

/// Writes budget-versus-accuracy rows as CSV.
pub fn export_sweep(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["budget", "selected", "test_acc", "best_val_acc", "cost_usd"])?;
    for r in rows {
        w.write_record([
            r.budget.to_string(),
            r.selected.to_string(),
            r.test_acc.to_string(),
            r.best_val_acc.to_string(),
            r.cost_usd.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
