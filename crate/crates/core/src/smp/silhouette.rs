use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::vector::squared_distance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Silhouette {
    pub global: f64,
    pub per_cluster: Vec<f64>,
    /// Set when fewer than two clusters exist; all scores are then zero.
    pub degenerate: bool,
}

/// Per-point silhouette with Euclidean distance. Members of singleton
/// clusters score 0, as do points whose intra and nearest-other mean
/// distances are both 0.
pub fn point_silhouettes(features: &[Vec<f64>], assignments: &[usize], k: usize) -> Vec<f64> {
    let mut sizes = vec![0usize; k];
    assignments.iter().for_each(|&a| sizes[a] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return vec![0.0; features.len()];
    }
    (0..features.len())
        .into_par_iter()
        .map(|i| {
            let own = assignments[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, f) in features.iter().enumerate() {
                if j != i {
                    sums[assignments[j]] += squared_distance(&features[i], f).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect()
}

pub fn silhouette(features: &[Vec<f64>], assignments: &[usize], k: usize) -> Silhouette {
    let nonempty = {
        let mut seen = vec![false; k];
        assignments.iter().for_each(|&a| seen[a] = true);
        seen.iter().filter(|&&s| s).count()
    };
    let points = point_silhouettes(features, assignments, k);
    let global = if points.is_empty() {
        0.0
    } else {
        points.iter().sum::<f64>() / points.len() as f64
    };
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (s, &a) in points.iter().zip(assignments) {
        sums[a] += s;
        counts[a] += 1;
    }
    let per_cluster = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    Silhouette {
        global,
        per_cluster,
        degenerate: nonempty < 2,
    }
}
