//! End-to-end construction of a memory from raw edit texts.

use serde::{Deserialize, Serialize};
use tracing::info;

use crate::config::EngineConfig;
use crate::error::Result;
use crate::iqs::synthesize_all;
use crate::memory::HierarchicalMemory;
use crate::provider::{embed_texts, Provider, ProviderConfig, QuestionCache};
use crate::smp::{cluster_memory, memory_losses, ClusteringSummary, LossReport};

const EMBED_BATCH: usize = 256;
const LOSS_BATCH_PAIRS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub n: usize,
    pub clustering: ClusteringSummary,
    pub empty_question_sets: usize,
    pub losses: Option<LossReport>,
}

/// Embeds the texts in batches and appends them as unassigned edits.
pub fn add_texts(
    memory: &mut HierarchicalMemory,
    provider: &dyn Provider,
    texts: &[String],
) -> Result<Vec<usize>> {
    let mut ids = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(EMBED_BATCH) {
        let refs: Vec<&str> = chunk.iter().map(String::as_str).collect();
        let vectors = embed_texts(provider, &refs)?;
        for (text, v) in chunk.iter().zip(vectors) {
            ids.push(memory.add_edit(text, v)?);
        }
    }
    Ok(ids)
}

/// Embeds, synthesizes questions for, and clusters `texts`.
pub fn build_memory(
    texts: &[String],
    engine: EngineConfig,
    provider_cfg: ProviderConfig,
    provider: &dyn Provider,
    cache: Option<&QuestionCache>,
) -> Result<(HierarchicalMemory, BuildReport)> {
    let mut memory = HierarchicalMemory::new(provider.dim(), engine, provider_cfg)?;
    add_texts(&mut memory, provider, texts)?;
    info!(n = memory.len(), "embedded edits");
    let empty_question_sets = synthesize_all(&mut memory, provider, cache)?;
    let clustering = cluster_memory(&mut memory)?;
    info!(
        k = clustering.k,
        silhouette = clustering.silhouette_global,
        "clustered"
    );
    let losses = memory_losses(&memory, LOSS_BATCH_PAIRS).ok();
    let report = BuildReport {
        n: memory.len(),
        clustering,
        empty_question_sets,
        losses,
    };
    Ok((memory, report))
}
