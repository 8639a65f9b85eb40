//! The clustered edit store.

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{AlexError, Result};
use crate::iqs::QuestionSet;
use crate::provider::ProviderConfig;
use crate::vector;

pub type EditId = usize;
pub type ClusterId = usize;

/// One declarative factual update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub id: EditId,
    pub text: String,
    /// Unit-norm sentence embedding.
    pub embedding: Vec<f64>,
    /// Length of `text` in characters.
    pub char_len: usize,
    /// Whitespace-token count of `text`.
    pub word_count: usize,
    pub cluster_id: Option<ClusterId>,
    pub questions: Option<QuestionSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: ClusterId,
    /// Centroid in hybrid feature space (embedding block plus two length ratios).
    pub centroid_full: Vec<f64>,
    /// Embedding block of `centroid_full`, renormalized; used at query time.
    pub centroid_embed: Vec<f64>,
    pub member_ids: Vec<EditId>,
    pub silhouette: f64,
}

impl Cluster {
    pub fn from_full_centroid(id: ClusterId, centroid_full: Vec<f64>, dim: usize) -> Self {
        let centroid_embed = embed_block(&centroid_full, dim);
        Self {
            id,
            centroid_full,
            centroid_embed,
            member_ids: Vec::new(),
            silhouette: 0.0,
        }
    }
}

/// First `dim` components of a hybrid vector, scaled to unit norm when nonzero.
pub fn embed_block(full: &[f64], dim: usize) -> Vec<f64> {
    let mut v = full[..dim].to_vec();
    vector::normalize(&mut v);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalMemory {
    pub dim: usize,
    pub config: EngineConfig,
    /// Embedder the index was built with; queries must use the same one.
    pub provider: ProviderConfig,
    pub edits: Vec<Edit>,
    pub clusters: Vec<Cluster>,
    pub l_max: usize,
    pub w_max: usize,
    pub silhouette_global: f64,
    /// Best global silhouette observed after a full clustering pass.
    pub silhouette_peak: f64,
}

impl HierarchicalMemory {
    pub fn new(dim: usize, config: EngineConfig, provider: ProviderConfig) -> Result<Self> {
        if dim < 2 {
            return Err(AlexError::InvalidArgument("dim must be >= 2".into()));
        }
        config.validate()?;
        Ok(Self {
            dim,
            config,
            provider,
            edits: Vec::new(),
            clusters: Vec::new(),
            l_max: 0,
            w_max: 0,
            silhouette_global: 0.0,
            silhouette_peak: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn edit(&self, id: EditId) -> Result<&Edit> {
        self.edits.get(id).ok_or(AlexError::UnknownEdit(id))
    }

    /// Stores a new unassigned edit and returns its id.
    ///
    /// The embedding is rescaled to unit norm. Running maxima only grow here.
    pub fn add_edit(&mut self, text: &str, embedding: Vec<f64>) -> Result<EditId> {
        if text.trim().is_empty() {
            return Err(AlexError::EmptyInput("edit text"));
        }
        if embedding.len() != self.dim {
            return Err(AlexError::DimensionMismatch {
                expected: self.dim,
                actual: embedding.len(),
            });
        }
        let mut embedding = embedding;
        if !vector::normalize(&mut embedding) {
            return Err(AlexError::ZeroVector);
        }
        let id = self.edits.len();
        let char_len = text.chars().count();
        let word_count = text.split_whitespace().count();
        self.l_max = self.l_max.max(char_len);
        self.w_max = self.w_max.max(word_count);
        self.edits.push(Edit {
            id,
            text: text.to_string(),
            embedding,
            char_len,
            word_count,
            cluster_id: None,
            questions: None,
        });
        Ok(id)
    }

    /// Cluster whose embedding centroid has the highest cosine to `embedding`.
    /// Ties go to the lowest cluster id.
    pub fn nearest_cluster(&self, embedding: &[f64]) -> Result<ClusterId> {
        let mut best: Option<(ClusterId, f64)> = None;
        for c in &self.clusters {
            let s = vector::cosine_lenient(embedding, &c.centroid_embed);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c.id, s));
            }
        }
        best.map(|(id, _)| id).ok_or(AlexError::NotClustered)
    }

    /// Moves an edit into the cluster with the nearest embedding centroid.
    /// Centroids are left unchanged until the next recluster.
    pub fn assign_to_nearest(&mut self, edit_id: EditId) -> Result<ClusterId> {
        if self.clusters.is_empty() {
            return Err(AlexError::NotClustered);
        }
        let target = self.nearest_cluster(&self.edit(edit_id)?.embedding)?;
        if let Some(prev) = self.edits[edit_id].cluster_id {
            self.clusters[prev].member_ids.retain(|&m| m != edit_id);
        }
        let members = &mut self.clusters[target].member_ids;
        let pos = members.partition_point(|&m| m < edit_id);
        members.insert(pos, edit_id);
        self.edits[edit_id].cluster_id = Some(target);
        Ok(target)
    }

    /// Inserts an edit and, when clusters exist, assigns it to the nearest one.
    pub fn insert_edit(&mut self, text: &str, embedding: Vec<f64>) -> Result<EditId> {
        let id = self.add_edit(text, embedding)?;
        if !self.clusters.is_empty() {
            self.assign_to_nearest(id)?;
        }
        Ok(id)
    }

    /// Recomputes `l_max` / `w_max` as the exact maxima over stored edits.
    pub fn refresh_maxima(&mut self) {
        self.l_max = self.edits.iter().map(|e| e.char_len).max().unwrap_or(0);
        self.w_max = self.edits.iter().map(|e| e.word_count).max().unwrap_or(0);
    }

    /// Replaces the whole partition. `assignments[i]` is the cluster of edit `i`.
    pub(crate) fn install_partition(
        &mut self,
        centroids_full: Vec<Vec<f64>>,
        assignments: &[usize],
    ) {
        let dim = self.dim;
        self.clusters = centroids_full
            .into_iter()
            .enumerate()
            .map(|(i, c)| Cluster::from_full_centroid(i, c, dim))
            .collect();
        for (edit, &c) in self.edits.iter_mut().zip(assignments) {
            edit.cluster_id = Some(c);
            self.clusters[c].member_ids.push(edit.id);
        }
    }

    /// Checks that cluster member lists partition the assigned edits.
    pub fn check_partition(&self) -> Result<()> {
        let mut seen = vec![false; self.edits.len()];
        for c in &self.clusters {
            for &m in &c.member_ids {
                let edit = self.edits.get(m).ok_or(AlexError::UnknownEdit(m))?;
                if seen[m] {
                    return Err(AlexError::InvalidArgument(format!(
                        "edit {m} appears in more than one cluster"
                    )));
                }
                seen[m] = true;
                if edit.cluster_id != Some(c.id) {
                    return Err(AlexError::InvalidArgument(format!(
                        "edit {m} listed in cluster {} but assigned to {:?}",
                        c.id, edit.cluster_id
                    )));
                }
            }
        }
        for e in &self.edits {
            match e.cluster_id {
                Some(c) if c >= self.clusters.len() => {
                    return Err(AlexError::InvalidArgument(format!(
                        "edit {} points at missing cluster {c}",
                        e.id
                    )))
                }
                Some(_) if !seen[e.id] => {
                    return Err(AlexError::InvalidArgument(format!(
                        "edit {} missing from its cluster's member list",
                        e.id
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
