use serde::{Deserialize, Serialize};

use super::ingest::{EvalRecord, PathHop};
use crate::dea::RetrievalTrace;
use crate::error::{AlexError, Result};
use crate::memory::HierarchicalMemory;

/// Records with a gold edit, paired with their traces.
fn scored<'a>(
    records: &'a [EvalRecord],
    traces: &'a [RetrievalTrace],
) -> Result<Vec<(usize, &'a RetrievalTrace)>> {
    if records.len() != traces.len() {
        return Err(AlexError::InvalidArgument(format!(
            "{} records but {} traces",
            records.len(),
            traces.len()
        )));
    }
    let pairs: Vec<_> = records
        .iter()
        .zip(traces)
        .filter_map(|(r, t)| r.gold_edit_id.map(|g| (g, t)))
        .collect();
    if pairs.is_empty() {
        return Err(AlexError::EmptyInput("no records with a gold edit"));
    }
    Ok(pairs)
}

/// Fraction of records whose gold edit's cluster was among the selected clusters.
pub fn cluster_acc(
    memory: &HierarchicalMemory,
    records: &[EvalRecord],
    traces: &[RetrievalTrace],
) -> Result<f64> {
    let pairs = scored(records, traces)?;
    let mut hits = 0usize;
    for (gold, trace) in &pairs {
        let cluster = memory.edit(*gold)?.cluster_id;
        if cluster.is_some_and(|c| trace.selected_clusters.contains(&c)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

/// Fraction of records whose retrieved edit is the gold edit. Winners are
/// always drawn from the selected clusters.
pub fn retrieval_acc(records: &[EvalRecord], traces: &[RetrievalTrace]) -> Result<f64> {
    let pairs = scored(records, traces)?;
    let hits = pairs.iter().filter(|(g, t)| t.winner == *g).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Trim, collapse internal whitespace, lowercase.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn same_path(a: &[PathHop], b: &[PathHop]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            normalize_answer(&x.entity) == normalize_answer(&y.entity)
                && normalize_answer(&x.answer) == normalize_answer(&y.answer)
        })
}

pub fn multihop_acc(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(AlexError::EmptyInput("no records"));
    }
    let mut hits = 0usize;
    for (i, r) in records.iter().enumerate() {
        let (Some(pred), Some(gold)) = (&r.predicted_answer, &r.gold_answer) else {
            return Err(AlexError::MissingPrediction(i));
        };
        if normalize_answer(pred) == normalize_answer(gold) {
            hits += 1;
        }
    }
    Ok(hits as f64 / records.len() as f64)
}

/// Every hop of the predicted path must match the gold path, in order and length.
pub fn hopwise_acc(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(AlexError::EmptyInput("no records"));
    }
    let mut hits = 0usize;
    for (i, r) in records.iter().enumerate() {
        let (Some(pred), Some(gold)) = (&r.predicted_path, &r.gold_path) else {
            return Err(AlexError::MissingPrediction(i));
        };
        if same_path(pred, gold) {
            hits += 1;
        }
    }
    Ok(hits as f64 / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub n_edits: usize,
    pub k: usize,
    pub records: usize,
    pub scored_records: usize,
    pub cluster_acc: f64,
    pub retrieval_acc: f64,
    pub multihop_acc: Option<f64>,
    pub hopwise_acc: Option<f64>,
    pub mean_candidates: f64,
    /// `1 - mean_candidates / N`, as a percentage.
    pub reduction_pct: f64,
}

/// Combines the retrieval metrics with the answer metrics when predictions are attached.
pub fn evaluate(
    dataset: &str,
    memory: &HierarchicalMemory,
    records: &[EvalRecord],
    traces: &[RetrievalTrace],
) -> Result<MetricsReport> {
    let cluster = cluster_acc(memory, records, traces)?;
    let retrieval = retrieval_acc(records, traces)?;
    let with_predictions: Vec<EvalRecord> = records
        .iter()
        .filter(|r| r.predicted_answer.is_some() && r.gold_answer.is_some())
        .cloned()
        .collect();
    let (ma, ha) = if with_predictions.is_empty() {
        (None, None)
    } else {
        let paths: Vec<EvalRecord> = with_predictions
            .iter()
            .filter(|r| r.predicted_path.is_some() && r.gold_path.is_some())
            .cloned()
            .collect();
        (
            Some(multihop_acc(&with_predictions)?),
            if paths.is_empty() {
                None
            } else {
                Some(hopwise_acc(&paths)?)
            },
        )
    };
    let mean = traces
        .iter()
        .map(|t| t.candidates_examined as f64)
        .sum::<f64>()
        / traces.len().max(1) as f64;
    Ok(MetricsReport {
        dataset: dataset.to_string(),
        n_edits: memory.len(),
        k: memory.k(),
        records: records.len(),
        scored_records: records.iter().filter(|r| r.gold_edit_id.is_some()).count(),
        cluster_acc: cluster,
        retrieval_acc: retrieval,
        multihop_acc: ma,
        hopwise_acc: ha,
        mean_candidates: mean,
        reduction_pct: 100.0 * (1.0 - mean / memory.len().max(1) as f64),
    })
}
