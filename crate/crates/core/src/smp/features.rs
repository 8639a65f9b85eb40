use crate::error::{AlexError, Result};
use crate::memory::{Edit, HierarchicalMemory};

/// Hybrid feature: the embedding followed by the character-length and
/// word-count ratios against the memory maxima, each clamped to 1.
pub fn build_feature(edit: &Edit, l_max: usize, w_max: usize) -> Result<Vec<f64>> {
    if l_max == 0 || w_max == 0 {
        return Err(AlexError::InvalidArgument(
            "feature maxima must be positive".into(),
        ));
    }
    let mut f = Vec::with_capacity(edit.embedding.len() + 2);
    f.extend_from_slice(&edit.embedding);
    f.push((edit.char_len as f64 / l_max as f64).min(1.0));
    f.push((edit.word_count as f64 / w_max as f64).min(1.0));
    Ok(f)
}

/// Features of the given edits under the memory's current maxima.
pub fn features_for(memory: &HierarchicalMemory, ids: &[usize]) -> Result<Vec<Vec<f64>>> {
    ids.iter()
        .map(|&id| build_feature(memory.edit(id)?, memory.l_max, memory.w_max))
        .collect()
}

pub fn all_features(memory: &HierarchicalMemory) -> Result<Vec<Vec<f64>>> {
    memory
        .edits
        .iter()
        .map(|e| build_feature(e, memory.l_max, memory.w_max))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edit(embedding: Vec<f64>, char_len: usize, word_count: usize) -> Edit {
        Edit {
            id: 0,
            text: String::new(),
            embedding,
            char_len,
            word_count,
            cluster_id: None,
            questions: None,
        }
    }

    #[test]
    fn direct_division() {
        let e = edit(vec![0.5; 4], 40, 6);
        assert_eq!(build_feature(&e, 80, 12).unwrap(), vec![0.5; 6]);
    }

    #[test]
    fn self_maximum_is_one_and_overflow_clamps() {
        let e = edit(vec![1.0, 0.0], 30, 5);
        let f = build_feature(&e, 30, 4).unwrap();
        assert_eq!(f[2], 1.0);
        assert_eq!(f[3], 1.0);
    }

    #[test]
    fn feature_dimension_is_embedding_plus_two() {
        let e = edit(vec![0.0; 768], 1, 1);
        assert_eq!(build_feature(&e, 1, 1).unwrap().len(), 770);
    }

    #[test]
    fn zero_maxima_error() {
        let e = edit(vec![1.0, 0.0], 1, 1);
        assert!(build_feature(&e, 0, 1).is_err());
    }
}
