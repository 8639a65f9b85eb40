//! Automatic cluster-count selection.
//!
//! For every K in range the best-of-restarts model gives W(K) and S(K). The
//! elbow gap is the variance still removed by one more cluster,
//! E(K) = (W(K) - W(K+1)) / W(k_min), and K* maximizes
//! `weight_s * S(K) - weight_e * E(K)`, preferring the smaller K on ties.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{fit_kmeans, ClusterModel};
use super::silhouette::silhouette;
use crate::error::{AlexError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub weight_s: f64,
    pub weight_e: f64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KSelectionConfig {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 20,
            weight_s: 1.0,
            weight_e: 0.5,
            restarts: 5,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

/// One row of the K sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDiagnostics {
    pub k: usize,
    pub inertia: f64,
    pub silhouette: f64,
    pub elbow_gap: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct KSelection {
    pub k_star: usize,
    pub diagnostics: Vec<KDiagnostics>,
    /// Model fitted at `k_star`.
    pub model: ClusterModel,
}

pub fn select_k(features: &[Vec<f64>], cfg: &KSelectionConfig, seed: u64) -> Result<KSelection> {
    let n = features.len();
    if cfg.k_min < 2 || cfg.k_min > cfg.k_max || cfg.k_max >= n {
        return Err(AlexError::InvalidArgument(format!(
            "K range {}..={} invalid for {n} points (need 2 <= k_min <= k_max < N)",
            cfg.k_min, cfg.k_max
        )));
    }
    // one extra K past the range supplies W(k_max + 1) for the last gap
    let sweep_max = (cfg.k_max + 1).min(n);
    let fitted: Vec<(usize, ClusterModel, f64)> = (cfg.k_min..=sweep_max)
        .into_par_iter()
        .map(|k| {
            let k_seed = seed.wrapping_add((k as u64).wrapping_mul(0x632b_e59b_d9b4_e019));
            let model = fit_kmeans(features, k, k_seed, cfg.restarts, cfg.max_iter, cfg.tol)?;
            let s = if k <= cfg.k_max {
                silhouette(features, &model.assignments, k).global
            } else {
                0.0
            };
            Ok((k, model, s))
        })
        .collect::<Result<_>>()?;

    let w_min = fitted[0].1.inertia;
    let mut diagnostics = Vec::new();
    for (i, (k, model, s)) in fitted.iter().enumerate() {
        if *k > cfg.k_max {
            break;
        }
        let gap = match fitted.get(i + 1) {
            Some((_, next, _)) if w_min > 0.0 => (model.inertia - next.inertia) / w_min,
            _ => 0.0,
        };
        diagnostics.push(KDiagnostics {
            k: *k,
            inertia: model.inertia,
            silhouette: *s,
            elbow_gap: gap,
            objective: cfg.weight_s * s - cfg.weight_e * gap,
        });
    }

    let best = diagnostics.iter().enumerate().fold(0, |b, (i, d)| {
        if d.objective > diagnostics[b].objective {
            i
        } else {
            b
        }
    });
    let k_star = diagnostics[best].k;
    let model = fitted
        .into_iter()
        .find(|(k, _, _)| *k == k_star)
        .map(|(_, m, _)| m)
        .expect("k_star was fitted");
    Ok(KSelection {
        k_star,
        diagnostics,
        model,
    })
}
