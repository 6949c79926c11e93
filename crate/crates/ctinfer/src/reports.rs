//! CSV and JSON Lines report writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ctinfer_core::corpus::Tallies;
use ctinfer_core::graph::GraphStats;
use ctinfer_core::metrics::RocCurve;
use ctinfer_core::model::Prediction;
use ctinfer_core::ConceptGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{Comparison, SummaryRow};

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `kind,name,count` rows for concepts, transitions, active-graph shapes
/// and the connected fraction.
pub fn write_stats_csv(path: &Path, stats: &GraphStats, graph: &ConceptGraph, top_shapes: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["kind", "name", "count"])?;
    w.write_record(["queries", "all", &stats.queries.to_string()])?;
    w.write_record(["connected", "all", &stats.connected.to_string()])?;
    for (c, n) in graph.concepts().iter().zip(&stats.concept_counts) {
        w.write_record(["concept", &c.name, &n.to_string()])?;
    }
    for (t, n) in graph.transitions().iter().zip(&stats.transition_counts) {
        w.write_record(["transition", &graph.transition_name(t.id), &n.to_string()])?;
    }
    for (shape, n) in stats.top_shapes(top_shapes) {
        w.write_record(["shape", &shape.describe(graph), &n.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Ground-truth tallies of a synthetic corpus in the stats layout.
pub fn write_tallies_csv(path: &Path, tallies: &Tallies, graph: &ConceptGraph, queries: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["kind", "name", "count"])?;
    w.write_record(["queries", "all", &queries.to_string()])?;
    w.write_record(["connected", "all", &tallies.connected.to_string()])?;
    for (c, n) in graph.concepts().iter().zip(&tallies.concept_counts) {
        w.write_record(["concept", &c.name, &n.to_string()])?;
    }
    for (t, n) in graph.transitions().iter().zip(&tallies.transition_counts) {
        w.write_record(["transition", &graph.transition_name(t.id), &n.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per transition, one column per method.
pub fn write_per_label_csv(path: &Path, comparison: &Comparison) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["transition".to_string()];
    header.extend(comparison.runs.iter().map(|r| r.report.method.clone()));
    w.write_record(&header)?;
    for (i, name) in comparison.transitions.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(comparison.runs.iter().map(|r| fmt_opt(r.report.test.transitions.per_label_auc[i])));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_roc_csv(path: &Path, roc: &RocCurve) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["fpr", "tpr", "threshold"])?;
    for p in &roc.points {
        w.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["method", "seed", "split_hash", "best_epoch", "micro_auc", "macro_auc", "coverage_error", "lrap", "energy_median"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.seed.to_string(),
            r.split_hash.clone(),
            r.best_epoch.to_string(),
            r.micro_auc.to_string(),
            r.macro_auc.to_string(),
            r.coverage_error.to_string(),
            r.lrap.to_string(),
            fmt_opt(r.energy_median),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    index: usize,
    concept_probs: &'a [f64],
    transition_probs: &'a [f64],
    token_scores: &'a [f64],
}

/// One JSON object per prediction; `ids` are the record indices.
pub fn write_predictions_jsonl(path: &Path, ids: &[usize], predictions: &[Prediction]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (&index, p) in ids.iter().zip(predictions) {
        let line = PredictionLine {
            index,
            concept_probs: &p.concept_probs,
            transition_probs: &p.transition_probs,
            token_scores: &p.token_scores,
        };
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
