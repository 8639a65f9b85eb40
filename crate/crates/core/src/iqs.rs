//! Hypothetical question sets: filtering, scoring, caching.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{AlexError, Result};
use crate::memory::{EditId, HierarchicalMemory};
use crate::provider::{embed_texts, CacheKey, CacheRecord, Provenance, Provider, QuestionCache};
use crate::vector::cosine_lenient;

/// Generation rounds attempted before an edit is left without questions.
pub const MAX_GENERATION_ROUNDS: usize = 3;
pub const MIN_QUESTION_TOKENS: usize = 3;
pub const MIN_OVERLAP: f64 = 0.6;

/// Function words ignored by the overlap rule.
pub const STOP_TOKENS: [&str; 30] = [
    "a", "an", "the", "is", "are", "was", "were", "be", "of", "in", "on", "at", "to", "for", "by",
    "with", "and", "or", "what", "which", "who", "where", "when", "how", "why", "do", "does",
    "did", "it", "that",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSet {
    pub edit_id: EditId,
    pub questions: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
    /// Mean question/edit cosine. `None` for an empty set.
    pub relevance: Option<f64>,
    /// Mean pairwise question cosine.
    pub redundancy: Option<f64>,
    /// `relevance - gamma * redundancy`.
    pub quality: Option<f64>,
    pub provenance: Provenance,
}

impl QuestionSet {
    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooFewTokens,
    NoEntity,
    LowOverlap,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub accepted: Vec<String>,
    /// Rejected questions with every rule they failed.
    pub rejected: Vec<(String, Vec<RejectReason>)>,
}

fn content_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOP_TOKENS.contains(&t.as_str()))
        .collect()
}

/// Entity-like: contains a digit, or starts uppercase without being the first word.
fn has_entity(question: &str) -> bool {
    question.split_whitespace().enumerate().any(|(i, w)| {
        let w = w.trim_matches(|c: char| !c.is_alphanumeric());
        w.chars().any(|c| c.is_ascii_digit())
            || (i > 0 && w.chars().next().is_some_and(char::is_uppercase))
    })
}

fn overlap_ratio(question: &str, edit_tokens: &HashSet<String>) -> f64 {
    let q = content_tokens(question);
    if q.is_empty() {
        return 0.0;
    }
    q.iter().filter(|t| edit_tokens.contains(*t)).count() as f64 / q.len() as f64
}

fn judge(question: &str, edit_tokens: &HashSet<String>) -> Vec<RejectReason> {
    let mut reasons = Vec::new();
    if question.split_whitespace().count() < MIN_QUESTION_TOKENS {
        reasons.push(RejectReason::TooFewTokens);
    }
    if !has_entity(question) {
        reasons.push(RejectReason::NoEntity);
    }
    if overlap_ratio(question, edit_tokens) < MIN_OVERLAP {
        reasons.push(RejectReason::LowOverlap);
    }
    reasons
}

/// Applies the token-count, entity and unigram-overlap rules, keeping input order.
pub fn screen_questions(edit_text: &str, candidates: &[String]) -> FilterOutcome {
    let edit_tokens: HashSet<String> = content_tokens(edit_text).into_iter().collect();
    let mut out = FilterOutcome::default();
    for q in candidates {
        let reasons = judge(q, &edit_tokens);
        if reasons.is_empty() {
            out.accepted.push(q.clone());
        } else {
            out.rejected.push((q.clone(), reasons));
        }
    }
    out
}

/// [`screen_questions`] that errors when nothing survives.
pub fn filter_questions(edit_text: &str, candidates: &[String]) -> Result<FilterOutcome> {
    if candidates.is_empty() {
        return Err(AlexError::EmptyInput("no candidate questions"));
    }
    let out = screen_questions(edit_text, candidates);
    if out.accepted.is_empty() {
        return Err(AlexError::AllQuestionsRejected);
    }
    Ok(out)
}

pub fn relevance(edit_embedding: &[f64], question_embeddings: &[Vec<f64>]) -> Result<f64> {
    if question_embeddings.is_empty() {
        return Err(AlexError::EmptyInput("no questions"));
    }
    let sum: f64 = question_embeddings
        .iter()
        .map(|h| cosine_lenient(h, edit_embedding))
        .sum();
    Ok(sum / question_embeddings.len() as f64)
}

/// Mean pairwise cosine; a single question has no pairs and scores 0.
pub fn redundancy(question_embeddings: &[Vec<f64>]) -> Result<f64> {
    let n = question_embeddings.len();
    if n == 0 {
        return Err(AlexError::EmptyInput("no questions"));
    }
    if n == 1 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in 0..n {
        for k in i + 1..n {
            sum += cosine_lenient(&question_embeddings[i], &question_embeddings[k]);
        }
    }
    Ok(2.0 * sum / (n * (n - 1)) as f64)
}

pub fn quality_score(relevance: f64, redundancy: f64, gamma: f64) -> f64 {
    relevance - gamma * redundancy
}

/// Builds a scored set from already-embedded questions.
pub fn score_set(
    edit_id: EditId,
    edit_embedding: &[f64],
    questions: Vec<String>,
    embeddings: Vec<Vec<f64>>,
    gamma: f64,
    provenance: Provenance,
) -> Result<QuestionSet> {
    let (rel, red, quality) = if questions.is_empty() {
        (None, None, None)
    } else {
        let r = relevance(edit_embedding, &embeddings)?;
        let d = redundancy(&embeddings)?;
        (Some(r), Some(d), Some(quality_score(r, d, gamma)))
    };
    Ok(QuestionSet {
        edit_id,
        questions,
        embeddings,
        relevance: rel,
        redundancy: red,
        quality,
        provenance,
    })
}

/// Generation parameters shared across a synthesis run.
#[derive(Clone, Copy)]
pub struct SynthesisContext<'a> {
    pub provider: &'a dyn Provider,
    pub cache: Option<&'a QuestionCache>,
    pub n_h: usize,
    pub gamma: f64,
}

/// Produces the question set for one edit: cache lookup, then up to
/// [`MAX_GENERATION_ROUNDS`] generate-and-filter rounds, embedding and
/// scoring. An edit whose candidates are always rejected gets an empty set
/// (not cached) and retrieval falls back to literal evidence for it.
pub fn synthesize_question_set(
    ctx: SynthesisContext<'_>,
    edit_id: EditId,
    text: &str,
    embedding: &[f64],
) -> Result<QuestionSet> {
    let key = CacheKey::new(text, ctx.n_h);
    if let Some(hit) = ctx.cache.and_then(|c| c.get(&key)) {
        let embeddings = match hit.embeddings {
            Some(e)
                if e.len() == hit.questions.len()
                    && e.iter().all(|v| v.len() == embedding.len()) =>
            {
                e
            }
            _ if hit.questions.is_empty() => Vec::new(),
            _ => {
                let refs: Vec<&str> = hit.questions.iter().map(String::as_str).collect();
                embed_texts(ctx.provider, &refs)?
            }
        };
        return score_set(
            edit_id,
            embedding,
            hit.questions,
            embeddings,
            ctx.gamma,
            Provenance::Cache,
        );
    }

    let mut accepted = Vec::new();
    for round in 0..MAX_GENERATION_ROUNDS {
        let candidates = ctx.provider.generate_raw(text, ctx.n_h)?;
        let outcome = screen_questions(text, &candidates);
        if !outcome.accepted.is_empty() {
            accepted = outcome.accepted;
            break;
        }
        warn!(edit_id, round, "all generated questions rejected");
    }
    let provenance = Provenance::from(ctx.provider.kind());
    if accepted.is_empty() {
        return score_set(
            edit_id,
            embedding,
            Vec::new(),
            Vec::new(),
            ctx.gamma,
            provenance,
        );
    }

    let refs: Vec<&str> = accepted.iter().map(String::as_str).collect();
    let embeddings = embed_texts(ctx.provider, &refs)?;
    let set = score_set(
        edit_id, embedding, accepted, embeddings, ctx.gamma, provenance,
    )?;
    if let Some(cache) = ctx.cache {
        cache.insert(CacheRecord {
            key,
            questions: set.questions.clone(),
            embeddings: Some(set.embeddings.clone()),
            relevance: set.relevance,
            redundancy: set.redundancy,
            quality: set.quality,
        })?;
    }
    Ok(set)
}

/// Synthesizes and stores the question set of one edit.
pub fn synthesize_for_edit(
    memory: &mut HierarchicalMemory,
    edit_id: EditId,
    provider: &dyn Provider,
    cache: Option<&QuestionCache>,
) -> Result<QuestionSet> {
    let ctx = SynthesisContext {
        provider,
        cache,
        n_h: memory.config.n_h,
        gamma: memory.config.gamma,
    };
    let edit = memory.edit(edit_id)?;
    let set = synthesize_question_set(ctx, edit_id, &edit.text, &edit.embedding)?;
    memory.edits[edit_id].questions = Some(set.clone());
    Ok(set)
}

/// Synthesizes question sets for every edit, in parallel across edits.
/// Returns the number of edits left with an empty set.
pub fn synthesize_all(
    memory: &mut HierarchicalMemory,
    provider: &dyn Provider,
    cache: Option<&QuestionCache>,
) -> Result<usize> {
    let ctx = SynthesisContext {
        provider,
        cache,
        n_h: memory.config.n_h,
        gamma: memory.config.gamma,
    };
    let sets: Vec<QuestionSet> = memory
        .edits
        .par_iter()
        .map(|e| synthesize_question_set(ctx, e.id, &e.text, &e.embedding))
        .collect::<Result<_>>()?;
    let empty = sets.iter().filter(|s| s.is_empty()).count();
    for set in sets {
        let id = set.edit_id;
        memory.edits[id].questions = Some(set);
    }
    Ok(empty)
}
