//! Semantic partitioning of the edit memory.

mod adapt;
mod features;
mod kmeans;
mod loss;
mod select;
mod silhouette;

pub use adapt::{check_adaptation, partial_recluster, AdaptationReport, LowCluster};
pub use features::{all_features, build_feature, features_for};
pub use kmeans::{
    fit_kmeans, inertia, kmeanspp_init, lloyd_cluster, select_anchors, ClusterModel, ANCHOR_COUNT,
    ANCHOR_EPS,
};
pub use loss::{
    cohesion_loss, contrast_loss, memory_losses, total_diag_loss, DiagnosticBatch, DiagnosticPair,
    LossReport,
};
pub use select::{select_k, KDiagnostics, KSelection, KSelectionConfig};
pub use silhouette::{point_silhouettes, silhouette, Silhouette};

use serde::{Deserialize, Serialize};
use tracing::info;

use crate::config::KMode;
use crate::error::{AlexError, Result};
use crate::memory::HierarchicalMemory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub k: usize,
    pub inertia: f64,
    pub silhouette_global: f64,
    pub cluster_sizes: Vec<usize>,
    /// K sweep, present when K was selected automatically.
    pub diagnostics: Option<Vec<KDiagnostics>>,
}

/// Stores per-cluster and global silhouettes computed on `features`.
pub fn refresh_silhouettes(memory: &mut HierarchicalMemory, features: &[Vec<f64>]) {
    let assigned: Vec<usize> = memory
        .edits
        .iter()
        .filter(|e| e.cluster_id.is_some())
        .map(|e| e.id)
        .collect();
    let feats: Vec<Vec<f64>> = assigned.iter().map(|&i| features[i].clone()).collect();
    let labels: Vec<usize> = assigned
        .iter()
        .map(|&i| memory.edits[i].cluster_id.expect("assigned"))
        .collect();
    let s = silhouette(&feats, &labels, memory.clusters.len());
    for (c, v) in memory.clusters.iter_mut().zip(&s.per_cluster) {
        c.silhouette = *v;
    }
    memory.silhouette_global = s.global;
}

fn summary(
    memory: &HierarchicalMemory,
    inertia: f64,
    diagnostics: Option<Vec<KDiagnostics>>,
) -> ClusteringSummary {
    ClusteringSummary {
        k: memory.clusters.len(),
        inertia,
        silhouette_global: memory.silhouette_global,
        cluster_sizes: memory.clusters.iter().map(|c| c.member_ids.len()).collect(),
        diagnostics,
    }
}

/// Full clustering pass using the memory's configured K mode.
///
/// Maxima are recomputed exactly, every edit is reassigned, silhouettes are
/// refreshed and the silhouette peak is raised if exceeded.
pub fn cluster_memory(memory: &mut HierarchicalMemory) -> Result<ClusteringSummary> {
    match memory.config.k_mode {
        KMode::Fixed { k } => cluster_memory_with_k(memory, k, true),
        KMode::Auto { k_min, k_max } => {
            let n = memory.len();
            if n < 3 {
                return Err(AlexError::InvalidArgument(format!(
                    "automatic K needs at least 3 edits, have {n}"
                )));
            }
            memory.refresh_maxima();
            let features = all_features(memory)?;
            let cfg = &memory.config;
            let sel_cfg = KSelectionConfig {
                k_min: k_min.min(n - 1),
                k_max: k_max.min(n - 1),
                weight_s: cfg.k_weight_silhouette,
                weight_e: cfg.k_weight_elbow,
                restarts: cfg.kmeans_restarts,
                max_iter: cfg.lloyd_max_iter,
                tol: cfg.lloyd_tol,
            };
            let sel = select_k(&features, &sel_cfg, cfg.seed)?;
            info!(k_star = sel.k_star, "selected cluster count");
            let inertia = sel.model.inertia;
            install(memory, &features, sel.model, true);
            Ok(summary(memory, inertia, Some(sel.diagnostics)))
        }
    }
}

/// Full clustering pass at a fixed K. Skipping silhouettes avoids the
/// quadratic pass when only the partition is needed.
pub fn cluster_memory_with_k(
    memory: &mut HierarchicalMemory,
    k: usize,
    with_silhouettes: bool,
) -> Result<ClusteringSummary> {
    let n = memory.len();
    if n == 0 {
        return Err(AlexError::EmptyInput("memory has no edits"));
    }
    if k == 0 || k > n {
        return Err(AlexError::InvalidArgument(format!(
            "K = {k} must lie in 1..={n}"
        )));
    }
    memory.refresh_maxima();
    let features = all_features(memory)?;
    let cfg = &memory.config;
    let model = fit_kmeans(
        &features,
        k,
        cfg.seed,
        cfg.kmeans_restarts,
        cfg.lloyd_max_iter,
        cfg.lloyd_tol,
    )?;
    let inertia = model.inertia;
    install(memory, &features, model, with_silhouettes);
    Ok(summary(memory, inertia, None))
}

fn install(
    memory: &mut HierarchicalMemory,
    features: &[Vec<f64>],
    model: ClusterModel,
    with_silhouettes: bool,
) {
    memory.install_partition(model.centroids, &model.assignments);
    if with_silhouettes {
        refresh_silhouettes(memory, features);
        memory.silhouette_peak = memory.silhouette_peak.max(memory.silhouette_global);
    } else {
        memory.clusters.iter_mut().for_each(|c| c.silhouette = 0.0);
        memory.silhouette_global = 0.0;
    }
}
