#![allow(dead_code)]

use alex_core::iqs::score_set;
use alex_core::provider::{Provenance, ProviderConfig};
use alex_core::smp::cluster_memory_with_k;
use alex_core::vector::normalize;
use alex_core::{EngineConfig, HierarchicalMemory, KMode};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
            normalize(&mut v);
            return v;
        }
    }
}

/// `center + spread * noise`, renormalized.
pub fn jitter(rng: &mut impl Rng, center: &[f64], spread: f64) -> Vec<f64> {
    let noise = random_unit(rng, center.len());
    let mut v: Vec<f64> = center
        .iter()
        .zip(&noise)
        .map(|(c, n)| c + spread * n)
        .collect();
    normalize(&mut v);
    v
}

pub fn random_text(rng: &mut impl Rng) -> String {
    let words = rng.random_range(1..=14);
    (0..words)
        .map(|_| format!("w{}", rng.random_range(0..500)))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone)]
pub struct RandomMemorySpec {
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    pub topics: usize,
    pub spread: f64,
    /// Fraction of edits that receive a question set (some of them empty).
    pub question_rate: f64,
}

impl Default for RandomMemorySpec {
    fn default() -> Self {
        Self {
            n: 60,
            dim: 16,
            k: 4,
            topics: 4,
            spread: 0.4,
            question_rate: 0.7,
        }
    }
}

/// A clustered memory with topic-structured random embeddings and random
/// question sets.
pub fn random_memory(seed: u64, spec: &RandomMemorySpec) -> HierarchicalMemory {
    let mut rng = rng(seed);
    let config = EngineConfig {
        k_mode: KMode::Fixed { k: spec.k },
        seed,
        kmeans_restarts: 2,
        ..EngineConfig::default()
    };
    let mut memory =
        HierarchicalMemory::new(spec.dim, config, ProviderConfig::mock(spec.dim, seed)).unwrap();
    let centers: Vec<Vec<f64>> = (0..spec.topics.max(1))
        .map(|_| random_unit(&mut rng, spec.dim))
        .collect();
    for i in 0..spec.n {
        let center = &centers[i % centers.len()];
        let embedding = jitter(&mut rng, center, spec.spread);
        let text = random_text(&mut rng);
        memory.add_edit(&text, embedding).unwrap();
    }
    for i in 0..spec.n {
        if rng.random_bool(spec.question_rate) {
            let count = rng.random_range(0..=3);
            let edit_embedding = memory.edits[i].embedding.clone();
            let questions: Vec<String> = (0..count)
                .map(|j| format!("question {j} about w{i}?"))
                .collect();
            let embeddings: Vec<Vec<f64>> = (0..count)
                .map(|_| jitter(&mut rng, &edit_embedding, 0.5))
                .collect();
            let set = score_set(
                i,
                &edit_embedding,
                questions,
                embeddings,
                0.3,
                Provenance::Mock,
            )
            .unwrap();
            memory.edits[i].questions = Some(set);
        }
    }
    cluster_memory_with_k(&mut memory, spec.k.min(spec.n), false).unwrap();
    memory
}

/// Three well-separated 2-D blobs of `per_blob` points each, returned in
/// interleaved order with their blob labels.
pub fn three_blobs(seed: u64, per_blob: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = rng(seed);
    let centers = [[0.0, 0.0], [10.0, 0.0], [5.0, 9.0]];
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..per_blob {
        for (b, c) in centers.iter().enumerate() {
            // sum of uniforms: a cheap bell-shaped sample
            let dx: f64 = (0..4).map(|_| rng.random_range(-0.5..0.5)).sum();
            let dy: f64 = (0..4).map(|_| rng.random_range(-0.5..0.5)).sum();
            points.push(vec![c[0] + dx, c[1] + dy]);
            labels.push(b);
        }
    }
    (points, labels)
}
