//! Hierarchical edit memory with two-stage retrieval.
//!
//! Edits (declarative facts) are embedded, partitioned into semantic
//! clusters over hybrid embedding + length features, and enriched with
//! hypothetical questions. A query is first compared against the K cluster
//! centroids; only clusters whose similarity z-score clears a threshold
//! (capped at `m_cap`) have their edits scored, using both the literal
//! query/edit cosine and the best query/question cosine.

pub mod config;
pub mod dea;
pub mod error;
pub mod eval;
pub mod iqs;
pub mod memory;
pub mod persist;
pub mod pipeline;
pub mod provider;
pub mod smp;
pub mod vector;

pub use config::{EngineConfig, KMode};
pub use error::{AlexError, Result};
pub use memory::{Cluster, ClusterId, Edit, EditId, HierarchicalMemory};
