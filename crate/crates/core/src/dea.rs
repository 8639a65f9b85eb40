//! Two-stage retrieval: z-score cluster filtering, then per-edit adjudication.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::extended_f64;
use crate::error::{AlexError, Result};
use crate::memory::{ClusterId, Edit, EditId, HierarchicalMemory};
use crate::provider::{embed_one, Provider};
use crate::vector::cosine_lenient;

/// Below this population standard deviation the z-scores are all zero.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    pub similarities: Vec<f64>,
    pub zscores: Vec<f64>,
    pub degenerate: bool,
}

/// Cosine of the query to every centroid and the population z-scores of those values.
pub fn cluster_zscores(query: &[f64], centroids: &[&[f64]]) -> Result<ClusterScores> {
    if centroids.is_empty() {
        return Err(AlexError::NotClustered);
    }
    let similarities: Vec<f64> = centroids.iter().map(|c| cosine_lenient(query, c)).collect();
    Ok(zscores_of(similarities))
}

pub fn zscores_of(similarities: Vec<f64>) -> ClusterScores {
    let k = similarities.len() as f64;
    let mean = similarities.iter().sum::<f64>() / k;
    let var = similarities.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k;
    let std = var.sqrt();
    let degenerate = std < DEGENERATE_STD;
    let zscores = if degenerate {
        vec![0.0; similarities.len()]
    } else {
        similarities.iter().map(|s| (s - mean) / std).collect()
    };
    ClusterScores {
        similarities,
        zscores,
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSelection {
    /// Selected cluster ids by descending similarity.
    pub clusters: Vec<ClusterId>,
    /// No cluster cleared the threshold; the top-similarity cluster was used.
    pub fallback: bool,
}

fn by_similarity_desc(sims: &[f64]) -> impl Fn(&usize, &usize) -> std::cmp::Ordering + '_ {
    move |&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b))
}

/// Keeps clusters with `z >= zeta`, at most `m_cap` of them (highest
/// similarity first). When none qualify, falls back to the single most
/// similar cluster. A degenerate spread gives every cluster `z = 0`.
pub fn filter_clusters(scores: &ClusterScores, zeta: f64, m_cap: usize) -> ClusterSelection {
    let sims = &scores.similarities;
    let mut passing: Vec<usize> = (0..sims.len())
        .filter(|&i| scores.zscores[i] >= zeta)
        .collect();
    let fallback = passing.is_empty();
    if fallback {
        passing = (0..sims.len()).collect();
    }
    passing.sort_by(by_similarity_desc(sims));
    passing.truncate(if fallback { 1 } else { m_cap.max(1) });
    ClusterSelection {
        clusters: passing,
        fallback,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adjudication {
    pub psi: f64,
    /// Query/edit cosine.
    pub literal: f64,
    /// Best query/question cosine; `None` when the edit has no questions.
    pub inferential: Option<f64>,
}

/// `alpha * cos(q, e) + beta * max_h cos(q, h)`; the second term is 0 without questions.
pub fn adjudicate(
    query: &[f64],
    edit_embedding: &[f64],
    question_embeddings: &[Vec<f64>],
    alpha: f64,
    beta: f64,
) -> Adjudication {
    let literal = cosine_lenient(query, edit_embedding);
    let inferential = question_embeddings
        .iter()
        .map(|h| cosine_lenient(query, h))
        .reduce(f64::max);
    Adjudication {
        psi: alpha * literal + beta * inferential.unwrap_or(0.0),
        literal,
        inferential,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub edit_id: EditId,
    pub cluster_id: Option<ClusterId>,
    #[serde(flatten)]
    pub score: Adjudication,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FallbackFlags {
    pub degenerate_sigma: bool,
    pub empty_filter: bool,
    /// Candidates scored on literal evidence only.
    pub literal_only: Vec<EditId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalTrace {
    pub query: String,
    pub query_embedding: Vec<f64>,
    pub similarities: Vec<f64>,
    pub zscores: Vec<f64>,
    #[serde(with = "extended_f64")]
    pub zeta: f64,
    pub m_cap: usize,
    pub selected_clusters: Vec<ClusterId>,
    pub candidates: Vec<CandidateScore>,
    pub winner: EditId,
    pub winner_psi: f64,
    /// Centroid comparisons plus edit scorings.
    pub candidates_examined: usize,
    pub flags: FallbackFlags,
}

fn score_edit(memory: &HierarchicalMemory, query: &[f64], edit: &Edit) -> CandidateScore {
    let questions = edit
        .questions
        .as_ref()
        .map(|q| q.embeddings.as_slice())
        .unwrap_or(&[]);
    CandidateScore {
        edit_id: edit.id,
        cluster_id: edit.cluster_id,
        score: adjudicate(
            query,
            &edit.embedding,
            questions,
            memory.config.alpha,
            memory.config.beta,
        ),
    }
}

/// Highest psi, lowest edit id on ties, independent of candidate order.
fn argmax(candidates: &[CandidateScore]) -> Option<&CandidateScore> {
    candidates.iter().reduce(|best, c| {
        if c.score.psi > best.score.psi
            || (c.score.psi == best.score.psi && c.edit_id < best.edit_id)
        {
            c
        } else {
            best
        }
    })
}

/// Retrieval parameters; defaults come from the memory's config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalParams {
    pub zeta: f64,
    pub m_cap: usize,
}

impl RetrievalParams {
    pub fn from_memory(memory: &HierarchicalMemory) -> Self {
        Self {
            zeta: memory.config.zeta,
            m_cap: memory.config.m_cap,
        }
    }

    /// Admits every cluster, making retrieval exhaustive.
    pub fn exhaustive(memory: &HierarchicalMemory) -> Self {
        Self {
            zeta: f64::NEG_INFINITY,
            m_cap: memory.clusters.len().max(1),
        }
    }
}

/// Two-stage retrieval for an already-embedded query.
pub fn retrieve_embedded(
    memory: &HierarchicalMemory,
    query: &str,
    query_embedding: Vec<f64>,
    params: RetrievalParams,
) -> Result<RetrievalTrace> {
    if memory.is_empty() {
        return Err(AlexError::EmptyInput("memory has no edits"));
    }
    if query_embedding.len() != memory.dim {
        return Err(AlexError::DimensionMismatch {
            expected: memory.dim,
            actual: query_embedding.len(),
        });
    }
    let centroids: Vec<&[f64]> = memory
        .clusters
        .iter()
        .map(|c| c.centroid_embed.as_slice())
        .collect();
    let scores = cluster_zscores(&query_embedding, &centroids)?;
    let selection = filter_clusters(&scores, params.zeta, params.m_cap);

    let member_ids: Vec<EditId> = selection
        .clusters
        .iter()
        .flat_map(|&c| memory.clusters[c].member_ids.iter().copied())
        .collect();
    let candidates: Vec<CandidateScore> = member_ids
        .par_iter()
        .map(|&id| score_edit(memory, &query_embedding, &memory.edits[id]))
        .collect();
    let best =
        argmax(&candidates).ok_or(AlexError::EmptyInput("selected clusters have no members"))?;
    let (winner, winner_psi) = (best.edit_id, best.score.psi);

    let flags = FallbackFlags {
        degenerate_sigma: scores.degenerate,
        empty_filter: selection.fallback,
        literal_only: candidates
            .iter()
            .filter(|c| c.score.inferential.is_none())
            .map(|c| c.edit_id)
            .collect(),
    };
    Ok(RetrievalTrace {
        query: query.to_string(),
        query_embedding,
        candidates_examined: memory.clusters.len() + candidates.len(),
        similarities: scores.similarities,
        zscores: scores.zscores,
        zeta: params.zeta,
        m_cap: params.m_cap,
        selected_clusters: selection.clusters,
        candidates,
        winner,
        winner_psi,
        flags,
    })
}

/// Embeds `query` with `provider` and runs two-stage retrieval with the
/// memory's configured threshold and cap.
pub fn retrieve<'m>(
    memory: &'m HierarchicalMemory,
    query: &str,
    provider: &dyn Provider,
) -> Result<(&'m Edit, RetrievalTrace)> {
    if memory.is_empty() {
        return Err(AlexError::EmptyInput("memory has no edits"));
    }
    let q = embed_one(provider, query)?;
    let trace = retrieve_embedded(memory, query, q, RetrievalParams::from_memory(memory))?;
    Ok((&memory.edits[trace.winner], trace))
}

/// Exhaustive adjudication of every edit, ignoring clusters.
pub fn flat_retrieve_embedded(
    memory: &HierarchicalMemory,
    query_embedding: &[f64],
) -> Result<(EditId, Vec<CandidateScore>)> {
    let scores: Vec<CandidateScore> = memory
        .edits
        .par_iter()
        .map(|e| score_edit(memory, query_embedding, e))
        .collect();
    let winner = argmax(&scores)
        .ok_or(AlexError::EmptyInput("memory has no edits"))?
        .edit_id;
    Ok((winner, scores))
}

pub fn flat_retrieve<'m>(
    memory: &'m HierarchicalMemory,
    query: &str,
    provider: &dyn Provider,
) -> Result<(&'m Edit, Vec<CandidateScore>)> {
    if memory.is_empty() {
        return Err(AlexError::EmptyInput("memory has no edits"));
    }
    let q = embed_one(provider, query)?;
    let (winner, scores) = flat_retrieve_embedded(memory, &q)?;
    Ok((&memory.edits[winner], scores))
}
