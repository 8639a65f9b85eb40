//! Silhouette-driven adaptation: trigger detection and partial reclustering.

use serde::{Deserialize, Serialize};
use tracing::info;

use super::features::{all_features, features_for};
use super::kmeans::{kmeanspp_init, lloyd_cluster};
use super::{cluster_memory, refresh_silhouettes};
use crate::error::{AlexError, Result};
use crate::memory::{Cluster, ClusterId, HierarchicalMemory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowCluster {
    pub cluster: ClusterId,
    pub silhouette: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    /// Clusters whose mean silhouette is below `theta_s`.
    pub low_clusters: Vec<LowCluster>,
    /// Set when the global silhouette fell below `(1 - drop_ratio) * peak`.
    pub global_drop: bool,
    pub silhouette_global: f64,
    pub silhouette_peak: f64,
}

impl AdaptationReport {
    pub fn is_empty(&self) -> bool {
        self.low_clusters.is_empty() && !self.global_drop
    }

    pub fn kind(&self) -> &'static str {
        match (self.global_drop, self.low_clusters.is_empty()) {
            (true, _) => "global-drop",
            (false, false) => "clusters-below-threshold",
            (false, true) => "none",
        }
    }
}

/// Evaluates the two triggers against the memory's stored silhouettes.
/// Per-cluster triggers need at least two clusters.
pub fn check_adaptation(memory: &HierarchicalMemory) -> AdaptationReport {
    let cfg = &memory.config;
    let low_clusters = if memory.clusters.len() >= 2 {
        memory
            .clusters
            .iter()
            .filter(|c| c.silhouette < cfg.theta_s)
            .map(|c| LowCluster {
                cluster: c.id,
                silhouette: c.silhouette,
            })
            .collect()
    } else {
        Vec::new()
    };
    let global_drop = memory.silhouette_peak > 0.0
        && memory.silhouette_global < (1.0 - cfg.drop_ratio) * memory.silhouette_peak;
    AdaptationReport {
        low_clusters,
        global_drop,
        silhouette_global: memory.silhouette_global,
        silhouette_peak: memory.silhouette_peak,
    }
}

/// Repairs the partition according to `report`.
///
/// A global drop forces a full rebuild (re-selecting K in auto mode). Otherwise
/// the members of every low cluster are pooled and re-split into the same
/// number of clusters, reusing those cluster ids; other clusters keep their
/// members and centroids.
pub fn partial_recluster(memory: &mut HierarchicalMemory, report: &AdaptationReport) -> Result<()> {
    if report.is_empty() {
        return Err(AlexError::NoTrigger);
    }
    if report.global_drop {
        info!("global silhouette drop, rebuilding the whole partition");
        cluster_memory(memory)?;
        return Ok(());
    }

    let mut targets: Vec<ClusterId> = report.low_clusters.iter().map(|l| l.cluster).collect();
    targets.sort_unstable();
    targets.dedup();
    if let Some(&bad) = targets.iter().find(|&&c| c >= memory.clusters.len()) {
        return Err(AlexError::InvalidArgument(format!("no cluster {bad}")));
    }
    let mut pool: Vec<usize> = targets
        .iter()
        .flat_map(|&c| memory.clusters[c].member_ids.iter().copied())
        .collect();
    pool.sort_unstable();
    info!(clusters = ?targets, edits = pool.len(), "partial recluster");

    let features = features_for(memory, &pool)?;
    let cfg = &memory.config;
    let seed = cfg.seed ^ (targets[0] as u64).wrapping_mul(0xd1b5_4a32_d192_ed03);
    let init = kmeanspp_init(&features, targets.len(), None, seed)?;
    let model = lloyd_cluster(&features, init, cfg.lloyd_max_iter, cfg.lloyd_tol)?;

    let dim = memory.dim;
    for (slot, &cid) in targets.iter().enumerate() {
        memory.clusters[cid] = Cluster::from_full_centroid(cid, model.centroids[slot].clone(), dim);
    }
    for (&edit_id, &slot) in pool.iter().zip(&model.assignments) {
        let cid = targets[slot];
        memory.edits[edit_id].cluster_id = Some(cid);
        memory.clusters[cid].member_ids.push(edit_id);
    }
    let features = all_features(memory)?;
    refresh_silhouettes(memory, &features);
    memory.check_partition()
}
