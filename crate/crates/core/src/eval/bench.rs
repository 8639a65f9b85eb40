use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::config::KMode;
use crate::dea::{retrieve_embedded, RetrievalParams};
use crate::error::{AlexError, Result};
use crate::memory::HierarchicalMemory;
use crate::smp::cluster_memory_with_k;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub k: usize,
    pub n: usize,
    pub queries: usize,
    /// Centroid comparisons plus edit scorings, averaged over queries.
    pub mean_candidates: f64,
    pub mean_edits_scored: f64,
    pub mean_clusters_selected: f64,
    /// `1 - mean_candidates / N`, as a percentage.
    pub reduction_pct: f64,
}

/// Rebuilds the partition at every K and measures the per-query candidate count.
///
/// `memory` is left untouched; each K clusters a copy. Queries must already
/// be embedded with the memory's embedder.
pub fn bench_search_space(
    memory: &HierarchicalMemory,
    queries: &[Vec<f64>],
    k_values: &[usize],
    m_cap: usize,
) -> Result<Vec<BenchRow>> {
    let n = memory.len();
    if queries.is_empty() {
        return Err(AlexError::EmptyInput("no benchmark queries"));
    }
    if let Some(&bad) = k_values.iter().find(|&&k| k == 0 || k > n) {
        return Err(AlexError::InvalidArgument(format!(
            "K = {bad} exceeds N = {n}"
        )));
    }
    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let mut m = memory.clone();
        m.config.k_mode = KMode::Fixed { k };
        cluster_memory_with_k(&mut m, k, false)?;
        let params = RetrievalParams {
            zeta: m.config.zeta,
            m_cap,
        };
        let traces: Vec<_> = queries
            .par_iter()
            .map(|q| retrieve_embedded(&m, "", q.clone(), params))
            .collect::<Result<_>>()?;
        let count = traces.len() as f64;
        let mean_candidates = traces
            .iter()
            .map(|t| t.candidates_examined as f64)
            .sum::<f64>()
            / count;
        let mean_edits = traces
            .iter()
            .map(|t| t.candidates.len() as f64)
            .sum::<f64>()
            / count;
        let mean_clusters = traces
            .iter()
            .map(|t| t.selected_clusters.len() as f64)
            .sum::<f64>()
            / count;
        let row = BenchRow {
            k,
            n,
            queries: traces.len(),
            mean_candidates,
            mean_edits_scored: mean_edits,
            mean_clusters_selected: mean_clusters,
            reduction_pct: 100.0 * (1.0 - mean_candidates / n as f64),
        };
        info!(
            k,
            mean = row.mean_candidates,
            reduction = row.reduction_pct,
            "bench row"
        );
        rows.push(row);
    }
    Ok(rows)
}
