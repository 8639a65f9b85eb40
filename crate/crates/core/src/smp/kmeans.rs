//! Anchor-weighted k-means++ seeding and Lloyd iterations in feature space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlexError, Result};
use crate::vector::{cosine_lenient, mean_of, squared_distance};

pub const ANCHOR_COUNT: usize = 8;
/// Floor added to every anchor weight so no point has zero sampling mass.
pub const ANCHOR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    /// `assignments[i]` is the cluster of feature `i`.
    pub assignments: Vec<usize>,
    /// Sum of squared distances to assigned centroids, W(K).
    pub inertia: f64,
    /// Inertia after every centroid update.
    pub inertia_history: Vec<f64>,
    /// True when the last assignment pass left every point where it was.
    pub converged: bool,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

fn validate(features: &[Vec<f64>]) -> Result<usize> {
    let first = features
        .first()
        .ok_or(AlexError::EmptyInput("no features to cluster"))?;
    let dim = first.len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(AlexError::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    Ok(dim)
}

/// Farthest-point sampling: a random first anchor, then repeatedly the point
/// farthest from every anchor chosen so far (lowest index on ties).
pub fn select_anchors(features: &[Vec<f64>], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = features.len();
    let count = count.min(n);
    if count == 0 {
        return Vec::new();
    }
    let mut anchors = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = features
        .iter()
        .map(|f| squared_distance(f, &features[anchors[0]]))
        .collect();
    while anchors.len() < count {
        let (next, _) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        anchors.push(next);
        for (d, f) in nearest.iter_mut().zip(features) {
            *d = d.min(squared_distance(f, &features[next]));
        }
    }
    anchors
}

fn sample_weighted(weights: &[f64], rng: &mut impl Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = Some(i);
            acc += w;
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// k-means++ seeding where every sampling weight is multiplied by the
/// point's anchor affinity `max(0, max_a cos(f_i, f_a)) + eps`.
///
/// When `anchors` is `None`, [`ANCHOR_COUNT`] anchors are chosen by
/// farthest-point sampling from the same seeded stream.
pub fn kmeanspp_init(
    features: &[Vec<f64>],
    k: usize,
    anchors: Option<&[usize]>,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    validate(features)?;
    let n = features.len();
    if k == 0 || k > n {
        return Err(AlexError::InvalidArgument(format!(
            "k = {k} must lie in 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors = match anchors {
        Some(a) if !a.is_empty() => {
            if let Some(&bad) = a.iter().find(|&&i| i >= n) {
                return Err(AlexError::InvalidArgument(format!(
                    "anchor {bad} out of range"
                )));
            }
            a.to_vec()
        }
        _ => select_anchors(features, ANCHOR_COUNT, &mut rng),
    };
    let affinity: Vec<f64> = features
        .iter()
        .map(|f| {
            let best = anchors
                .iter()
                .map(|&a| cosine_lenient(f, &features[a]))
                .fold(f64::NEG_INFINITY, f64::max);
            best.max(0.0) + ANCHOR_EPS
        })
        .collect();

    let first = sample_weighted(&affinity, &mut rng).expect("affinity weights are positive");
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = features
        .iter()
        .map(|f| squared_distance(f, &features[first]))
        .collect();

    while chosen.len() < k {
        let weights: Vec<f64> = d2.iter().zip(&affinity).map(|(d, a)| d * a).collect();
        let next = match sample_weighted(&weights, &mut rng) {
            Some(i) => i,
            None => {
                // every remaining point coincides with a centroid
                let fallback: Vec<f64> = affinity
                    .iter()
                    .enumerate()
                    .map(|(i, a)| if chosen.contains(&i) { 0.0 } else { *a })
                    .collect();
                sample_weighted(&fallback, &mut rng).expect("k <= n leaves an unchosen point")
            }
        };
        chosen.push(next);
        for (d, f) in d2.iter_mut().zip(features) {
            *d = d.min(squared_distance(f, &features[next]));
        }
    }
    Ok(chosen.into_iter().map(|i| features[i].clone()).collect())
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(features: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    features
        .par_iter()
        .map(|f| nearest(f, centroids).0)
        .collect()
}

/// Gives every empty cluster the point farthest from its centroid in the
/// currently largest cluster.
fn repair_empty(features: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        assignments.iter().for_each(|&a| sizes[a] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).fold(0, |b, j| if sizes[j] > sizes[b] { j } else { b });
        let victim = assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == largest)
            .map(|(i, _)| (i, squared_distance(&features[i], &centroids[largest])))
            .fold((usize::MAX, f64::NEG_INFINITY), |b, (i, d)| {
                if d > b.1 {
                    (i, d)
                } else {
                    b
                }
            })
            .0;
        assignments[victim] = empty;
    }
}

fn recompute(features: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            mean_of(
                dim,
                features
                    .iter()
                    .zip(assignments)
                    .filter(|(_, &a)| a == j)
                    .map(|(f, _)| f.as_slice()),
            )
        })
        .collect()
}

pub fn inertia(features: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    features
        .iter()
        .zip(assignments)
        .map(|(f, &a)| squared_distance(f, &centroids[a]))
        .sum()
}

/// Lloyd iterations from `init`. Stops when assignments stop changing, when
/// the relative inertia improvement drops below `tol`, or after `max_iter`
/// updates.
pub fn lloyd_cluster(
    features: &[Vec<f64>],
    init: Vec<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel> {
    let dim = validate(features)?;
    let k = init.len();
    if k == 0 || k > features.len() {
        return Err(AlexError::InvalidArgument(format!(
            "need 1..={} initial centroids, got {k}",
            features.len()
        )));
    }
    if init.iter().any(|c| c.len() != dim) {
        return Err(AlexError::DimensionMismatch {
            expected: dim,
            actual: init.iter().find(|c| c.len() != dim).map_or(0, Vec::len),
        });
    }
    if max_iter == 0 {
        return Err(AlexError::InvalidArgument("max_iter must be >= 1".into()));
    }

    let mut centroids = init;
    let mut assignments: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;

    for _ in 0..max_iter {
        let mut next = assign(features, &centroids);
        repair_empty(features, &centroids, &mut next);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        centroids = recompute(features, &assignments, k, dim);
        let w = inertia(features, &centroids, &assignments);
        let prev = history.last().copied();
        history.push(w);
        if let Some(prev) = prev {
            if prev <= 0.0 || (prev - w) / prev < tol {
                let mut check = assign(features, &centroids);
                repair_empty(features, &centroids, &mut check);
                converged = check == assignments;
                break;
            }
        }
    }

    let inertia = *history.last().expect("at least one update");
    Ok(ClusterModel {
        centroids,
        assignments,
        inertia,
        inertia_history: history,
        converged,
    })
}

/// Best of `restarts` seeded k-means++ + Lloyd runs, by inertia (earliest on ties).
pub fn fit_kmeans(
    features: &[Vec<f64>],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel> {
    let mut best: Option<ClusterModel> = None;
    for r in 0..restarts.max(1) {
        let run_seed = seed.wrapping_add((r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let init = kmeanspp_init(features, k, None, run_seed)?;
        let model = lloyd_cluster(features, init, max_iter, tol)?;
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}
