//! Cohesion / contrastive diagnostics over fixed embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{AlexError, Result};
use crate::memory::HierarchicalMemory;
use crate::vector::cosine_lenient;

/// Negative mean (over clusters) of the mean member-to-centroid cosine.
///
/// `centroids[c]` is compared with every embedding assigned to `c`.
pub fn cohesion_loss(
    centroids: &[Vec<f64>],
    embeddings: &[Vec<f64>],
    assignments: &[usize],
) -> Result<f64> {
    if centroids.is_empty() {
        return Err(AlexError::EmptyInput("no clusters"));
    }
    let k = centroids.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (e, &c) in embeddings.iter().zip(assignments) {
        sums[c] += cosine_lenient(e, &centroids[c]);
        counts[c] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(AlexError::InvalidArgument(format!(
            "cluster {empty} is empty"
        )));
    }
    let mean: f64 = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .sum::<f64>()
        / k as f64;
    Ok(-mean)
}

/// One anchor/positive pair; `negatives` index into the batch's positives.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticPair {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub cluster: usize,
    pub negatives: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticBatch {
    pub pairs: Vec<DiagnosticPair>,
}

impl DiagnosticBatch {
    /// Pairs up to `max_pairs` assigned edits (evenly strided by id) with a
    /// synthesized question as anchor, or the edit itself when it has none.
    /// Negatives are the other batch edits from different clusters.
    pub fn from_memory(memory: &HierarchicalMemory, max_pairs: usize) -> Self {
        let assigned: Vec<_> = memory
            .edits
            .iter()
            .filter(|e| e.cluster_id.is_some())
            .collect();
        let stride = assigned.len().div_ceil(max_pairs.max(1)).max(1);
        let chosen: Vec<_> = assigned.into_iter().step_by(stride).collect();
        let pairs = chosen
            .iter()
            .map(|e| {
                let cluster = e.cluster_id.expect("filtered to assigned");
                let anchor = e
                    .questions
                    .as_ref()
                    .and_then(|q| q.embeddings.first())
                    .unwrap_or(&e.embedding)
                    .clone();
                let negatives = chosen
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.cluster_id != Some(cluster))
                    .map(|(j, _)| j)
                    .collect();
                DiagnosticPair {
                    anchor,
                    positive: e.embedding.clone(),
                    cluster,
                    negatives,
                }
            })
            .collect();
        Self { pairs }
    }
}

/// InfoNCE averaged over the batch. The positive term is part of the
/// denominator, so every per-pair loss is non-negative.
pub fn contrast_loss(batch: &DiagnosticBatch, tau: f64) -> Result<f64> {
    if tau <= 0.0 || tau.is_nan() {
        return Err(AlexError::InvalidArgument("tau must be positive".into()));
    }
    if batch.pairs.is_empty() {
        return Err(AlexError::EmptyInput("empty diagnostic batch"));
    }
    let mut total = 0.0;
    for (i, pair) in batch.pairs.iter().enumerate() {
        if pair.negatives.is_empty() {
            return Err(AlexError::InvalidArgument(format!(
                "pair {i} has no negatives"
            )));
        }
        let pos = cosine_lenient(&pair.anchor, &pair.positive) / tau;
        let logits: Vec<f64> = std::iter::once(pos)
            .chain(
                pair.negatives
                    .iter()
                    .map(|&j| cosine_lenient(&pair.anchor, &batch.pairs[j].positive) / tau),
            )
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        total += (lse - pos).max(0.0);
    }
    Ok(total / batch.pairs.len() as f64)
}

/// Weighted combination `lambda * cohesion + (1 - lambda) * contrast`.
pub fn total_diag_loss(cohesion: f64, contrast: f64, lambda: f64) -> f64 {
    lambda * cohesion + (1.0 - lambda) * contrast
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub cohesion: f64,
    pub contrast: Option<f64>,
    pub total: Option<f64>,
    pub batch_pairs: usize,
}

/// Diagnostic losses for a clustered memory.
pub fn memory_losses(memory: &HierarchicalMemory, max_pairs: usize) -> Result<LossReport> {
    if memory.clusters.is_empty() {
        return Err(AlexError::NotClustered);
    }
    let centroids: Vec<Vec<f64>> = memory
        .clusters
        .iter()
        .map(|c| c.centroid_embed.clone())
        .collect();
    let (embeddings, assignments): (Vec<_>, Vec<_>) = memory
        .edits
        .iter()
        .filter_map(|e| e.cluster_id.map(|c| (e.embedding.clone(), c)))
        .unzip();
    let cohesion = cohesion_loss(&centroids, &embeddings, &assignments)?;
    let batch = DiagnosticBatch::from_memory(memory, max_pairs);
    let contrast = if batch.pairs.iter().all(|p| !p.negatives.is_empty()) {
        contrast_loss(&batch, memory.config.tau).ok()
    } else {
        None
    };
    Ok(LossReport {
        cohesion,
        contrast,
        total: contrast.map(|c| total_diag_loss(cohesion, c, memory.config.lambda)),
        batch_pairs: batch.pairs.len(),
    })
}
