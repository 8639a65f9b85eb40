//! Text embedding and hypothetical-question generation.
//!
//! Two backends sit behind [`Provider`]: a deterministic hashing embedder with
//! template questions that runs fully offline, and an HTTP client for an
//! external sidecar speaking the `/embed` + `/generate` JSON protocol.

mod cache;
mod mock;
mod remote;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cache::{CacheKey, CacheRecord, QuestionCache, PROMPT_VERSION};
pub use mock::{mock_embed, template_questions, MockProvider};
pub use remote::{RemoteProvider, DEFAULT_TEMPERATURE, PROVIDER_URL_ENV};

use crate::error::{AlexError, Result};
use crate::vector;

/// Tolerance on the unit-norm contract for every returned embedding.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    BuiltinMock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    pub dim: usize,
    pub timeout_ms: u64,
    pub cache_path: Option<PathBuf>,
    /// Seed of the mock embedder's token hash streams.
    pub seed: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::BuiltinMock,
            endpoint: None,
            dim: 768,
            timeout_ms: 30_000,
            cache_path: None,
            seed: 0,
        }
    }
}

impl ProviderConfig {
    pub fn mock(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(AlexError::InvalidArgument(
                "provider dim must be >= 2".into(),
            ));
        }
        if self.kind == ProviderKind::Remote
            && self.endpoint.is_none()
            && std::env::var(PROVIDER_URL_ENV).is_err()
        {
            return Err(AlexError::InvalidArgument(
                "remote provider requires an endpoint".into(),
            ));
        }
        Ok(())
    }

    /// Instantiates the configured backend.
    pub fn connect(&self) -> Result<Arc<dyn Provider>> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::BuiltinMock => Arc::new(MockProvider::new(self.dim, self.seed)),
            ProviderKind::Remote => Arc::new(RemoteProvider::from_config(self)?),
        })
    }
}

/// Backend contract. Implementations must be callable from many threads.
pub trait Provider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    fn dim(&self) -> usize;

    /// Raw embedding call; callers should go through [`embed_texts`] for validation.
    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;

    /// Raw generation call, uncached.
    fn generate_raw(&self, fact: &str, n: usize) -> Result<Vec<String>>;
}

/// Embeds `texts`, enforcing one unit-norm vector of the provider dimension per text.
pub fn embed_texts(provider: &dyn Provider, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
    if texts.is_empty() {
        return Err(AlexError::EmptyInput("no texts to embed"));
    }
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(AlexError::EmptyInput("cannot embed an empty text"));
    }
    let out = provider.embed_raw(texts)?;
    if out.len() != texts.len() {
        return Err(AlexError::Provider(format!(
            "expected {} embeddings, got {}",
            texts.len(),
            out.len()
        )));
    }
    for v in &out {
        if v.len() != provider.dim() {
            return Err(AlexError::Provider(format!(
                "embedding dimension {} does not match configured {}",
                v.len(),
                provider.dim()
            )));
        }
        if !vector::is_unit(v, UNIT_NORM_TOL) {
            return Err(AlexError::Provider(format!(
                "embedding is not unit-norm (norm {})",
                vector::norm(v)
            )));
        }
    }
    Ok(out)
}

pub fn embed_one(provider: &dyn Provider, text: &str) -> Result<Vec<f64>> {
    Ok(embed_texts(provider, &[text])?
        .pop()
        .expect("one embedding"))
}

/// Whether a question list came from the backend or the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Mock,
    Remote,
    Cache,
}

impl From<ProviderKind> for Provenance {
    fn from(k: ProviderKind) -> Self {
        match k {
            ProviderKind::BuiltinMock => Provenance::Mock,
            ProviderKind::Remote => Provenance::Remote,
        }
    }
}

/// Generates `n_h` questions for `fact`, consulting `cache` first.
pub fn generate_questions(
    provider: &dyn Provider,
    cache: Option<&QuestionCache>,
    fact: &str,
    n_h: usize,
) -> Result<(Vec<String>, Provenance)> {
    if n_h == 0 {
        return Err(AlexError::InvalidArgument("n_h must be at least 1".into()));
    }
    let key = CacheKey::new(fact, n_h);
    if let Some(hit) = cache.and_then(|c| c.get(&key)) {
        return Ok((hit.questions, Provenance::Cache));
    }
    let questions = provider.generate_raw(fact, n_h)?;
    if questions.is_empty() {
        return Err(AlexError::Provider(format!(
            "provider returned zero questions for {fact:?}"
        )));
    }
    if let Some(c) = cache {
        c.insert(CacheRecord::unscored(key, questions.clone()))?;
    }
    Ok((questions, provider.kind().into()))
}
