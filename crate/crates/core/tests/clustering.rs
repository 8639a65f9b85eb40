mod common;

use std::collections::BTreeSet;

use alex_core::smp::{
    check_adaptation, cluster_memory, fit_kmeans, inertia, kmeanspp_init, lloyd_cluster,
    partial_recluster, select_k, silhouette, KSelectionConfig,
};
use alex_core::vector::squared_distance;
use alex_core::{AlexError, HierarchicalMemory, KMode};
use common::{jitter, random_memory, random_unit, rng, three_blobs, RandomMemorySpec};
use proptest::prelude::*;
use rand::Rng;

fn points_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=5).prop_flat_map(|dim| {
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 3..60)
    })
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> f64 {
    centroids
        .iter()
        .map(|c| squared_distance(point, c))
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn lloyd_inertia_never_increases(points in points_strategy(), k in 1usize..6, seed in any::<u64>()) {
        let k = k.min(points.len());
        let init = kmeanspp_init(&points, k, None, seed).unwrap();
        let model = lloyd_cluster(&points, init, 200, 0.0).unwrap();
        for w in model.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", model.inertia_history);
        }
        prop_assert_eq!(model.inertia, *model.inertia_history.last().unwrap());
        let recomputed = inertia(&points, &model.centroids, &model.assignments);
        prop_assert!((recomputed - model.inertia).abs() <= 1e-9 * (1.0 + recomputed));
    }

    #[test]
    fn converged_lloyd_assigns_every_point_to_a_nearest_centroid(points in points_strategy(), k in 1usize..6, seed in any::<u64>()) {
        let k = k.min(points.len());
        let init = kmeanspp_init(&points, k, None, seed).unwrap();
        let model = lloyd_cluster(&points, init, 500, 0.0).unwrap();
        prop_assume!(model.converged);
        for (p, &a) in points.iter().zip(&model.assignments) {
            let own = squared_distance(p, &model.centroids[a]);
            prop_assert!(own <= nearest(p, &model.centroids) + 1e-9);
        }
        // every cluster is non-empty
        let used: BTreeSet<usize> = model.assignments.iter().copied().collect();
        prop_assert_eq!(used.len(), k);
    }

    #[test]
    fn silhouettes_lie_in_unit_interval(points in points_strategy(), k in 2usize..6, seed in any::<u64>()) {
        let k = k.min(points.len());
        let model = fit_kmeans(&points, k, seed, 1, 100, 1e-9).unwrap();
        let s = silhouette(&points, &model.assignments, k);
        prop_assert!((-1.0..=1.0).contains(&s.global));
        for v in &s.per_cluster {
            prop_assert!((-1.0..=1.0).contains(v));
        }
    }
}

#[test]
fn kmeanspp_puts_one_centroid_in_each_of_two_far_blobs() {
    let mut r = rng(99);
    let centers = [vec![8.0, 1.0], vec![1.0, 8.0]];
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let b = i % 2;
        let c = &centers[b];
        points.push(vec![
            c[0] + r.random_range(-0.5..0.5),
            c[1] + r.random_range(-0.5..0.5),
        ]);
        labels.push(b);
    }
    let blob_of = |c: &[f64]| {
        points
            .iter()
            .position(|p| p.as_slice() == c)
            .map(|i| labels[i])
            .expect("k-means++ centroids are data points")
    };
    let good = (0..100u64)
        .filter(|&seed| {
            let init = kmeanspp_init(&points, 2, None, seed).unwrap();
            blob_of(&init[0]) != blob_of(&init[1])
        })
        .count();
    assert!(good >= 95, "{good}/100 seeds split the blobs");
}

#[test]
fn kmeanspp_is_deterministic_and_saturates_at_k_equals_n() {
    let mut r = rng(3);
    let points: Vec<Vec<f64>> = (0..12).map(|_| random_unit(&mut r, 3)).collect();
    let a = kmeanspp_init(&points, 4, None, 17).unwrap();
    let b = kmeanspp_init(&points, 4, None, 17).unwrap();
    assert_eq!(a, b);

    let all = kmeanspp_init(&points, points.len(), None, 5).unwrap();
    let model = lloyd_cluster(&points, all, 10, 0.0).unwrap();
    assert_eq!(model.inertia, 0.0);
}

#[test]
fn select_k_recovers_three_blobs() {
    let cfg = KSelectionConfig {
        k_min: 2,
        k_max: 8,
        weight_s: 1.0,
        weight_e: 0.5,
        restarts: 3,
        max_iter: 100,
        tol: 1e-9,
    };
    let hits = (0..20u64)
        .filter(|&seed| {
            let (points, _) = three_blobs(seed, 20);
            select_k(&points, &cfg, seed).unwrap().k_star == 3
        })
        .count();
    assert!(hits >= 19, "K* = 3 in {hits}/20 seeds");

    let (points, labels) = three_blobs(1, 20);
    let sel = select_k(&points, &cfg, 1).unwrap();
    // The recovered partition is the blob partition up to relabelling.
    for (a, la) in sel.model.assignments.iter().zip(&labels) {
        for (b, lb) in sel.model.assignments.iter().zip(&labels) {
            assert_eq!(a == b, la == lb);
        }
    }
    assert_eq!(sel.diagnostics.first().unwrap().k, 2);
    assert_eq!(sel.diagnostics.last().unwrap().k, 8);

    let forced = KSelectionConfig {
        k_min: 5,
        k_max: 5,
        ..cfg
    };
    assert_eq!(select_k(&points, &forced, 1).unwrap().k_star, 5);
}

fn membership(memory: &HierarchicalMemory) -> Vec<BTreeSet<usize>> {
    memory
        .clusters
        .iter()
        .map(|c| c.member_ids.iter().copied().collect())
        .collect()
}

#[test]
fn partial_recluster_only_touches_the_flagged_clusters() {
    let spec = RandomMemorySpec {
        n: 60,
        dim: 12,
        k: 6,
        topics: 6,
        spread: 0.3,
        question_rate: 0.0,
    };
    let mut memory = random_memory(21, &spec);
    for (i, c) in memory.clusters.iter_mut().enumerate() {
        c.silhouette = if i == 1 || i == 4 { 0.2 } else { 0.8 };
    }
    memory.silhouette_global = 0.7;
    memory.silhouette_peak = 0.7;
    let before = membership(&memory);

    let report = check_adaptation(&memory);
    assert_eq!(report.kind(), "clusters-below-threshold");
    let flagged: Vec<usize> = report.low_clusters.iter().map(|l| l.cluster).collect();
    assert_eq!(flagged, vec![1, 4]);

    partial_recluster(&mut memory, &report).unwrap();
    memory.check_partition().unwrap();
    let after = membership(&memory);
    assert_eq!(after.len(), before.len());
    for c in [0, 2, 3, 5] {
        assert_eq!(after[c], before[c], "untouched cluster {c} changed");
    }
    let pooled_before: BTreeSet<usize> = before[1].union(&before[4]).copied().collect();
    let pooled_after: BTreeSet<usize> = after[1].union(&after[4]).copied().collect();
    assert_eq!(pooled_before, pooled_after);
    assert!(!after[1].is_empty() && !after[4].is_empty());
}

#[test]
fn global_drop_rebuilds_at_the_fixed_k() {
    let spec = RandomMemorySpec {
        n: 80,
        dim: 10,
        k: 12,
        topics: 12,
        spread: 0.2,
        question_rate: 0.0,
    };
    let mut memory = random_memory(4, &spec);
    memory.config.k_mode = KMode::Fixed { k: 12 };
    memory.silhouette_peak = 0.9;
    memory.silhouette_global = 0.1;
    let report = check_adaptation(&memory);
    assert!(report.global_drop);
    partial_recluster(&mut memory, &report).unwrap();
    assert_eq!(memory.k(), 12);
    memory.check_partition().unwrap();
}

#[test]
fn recluster_without_trigger_is_an_error() {
    let mut memory = random_memory(8, &RandomMemorySpec::default());
    for c in &mut memory.clusters {
        c.silhouette = 0.9;
    }
    memory.silhouette_global = 0.9;
    memory.silhouette_peak = 0.9;
    let report = check_adaptation(&memory);
    assert!(report.is_empty());
    assert!(matches!(
        partial_recluster(&mut memory, &report),
        Err(AlexError::NoTrigger)
    ));
}

#[test]
fn incremental_inserts_keep_the_partition_and_centroids() {
    let mut memory = random_memory(31, &RandomMemorySpec::default());
    let centroids: Vec<Vec<f64>> = memory
        .clusters
        .iter()
        .map(|c| c.centroid_full.clone())
        .collect();
    let mut r = rng(32);
    for i in 0..10 {
        let target = memory.clusters[i % memory.k()].centroid_embed.clone();
        let id = memory
            .insert_edit("a late edit", jitter(&mut r, &target, 0.01))
            .unwrap();
        assert_eq!(memory.edits[id].cluster_id, Some(i % memory.k()));
    }
    memory.check_partition().unwrap();
    let after: Vec<Vec<f64>> = memory
        .clusters
        .iter()
        .map(|c| c.centroid_full.clone())
        .collect();
    assert_eq!(centroids, after);
}

#[test]
fn full_pass_raises_the_silhouette_peak() {
    let mut memory = random_memory(40, &RandomMemorySpec::default());
    memory.config.k_mode = KMode::Auto { k_min: 2, k_max: 6 };
    memory.silhouette_peak = 0.0;
    let summary = cluster_memory(&mut memory).unwrap();
    assert!(summary.diagnostics.is_some());
    assert_eq!(memory.silhouette_peak, memory.silhouette_global);
    assert_eq!(summary.cluster_sizes.iter().sum::<usize>(), memory.len());
    memory.check_partition().unwrap();
}
