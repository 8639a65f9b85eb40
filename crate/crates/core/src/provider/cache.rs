use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AlexError, Result};

/// Bumped whenever the generation prompt changes, invalidating old entries.
pub const PROMPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    /// Hex SHA-256 of the fact text.
    pub fact_hash: String,
    pub n_h: usize,
    pub prompt_version: u32,
}

impl CacheKey {
    pub fn new(fact: &str, n_h: usize) -> Self {
        Self {
            fact_hash: hex::encode(Sha256::digest(fact.as_bytes())),
            n_h,
            prompt_version: PROMPT_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    #[serde(flatten)]
    pub key: CacheKey,
    pub questions: Vec<String>,
    /// Question embeddings, so cache hits need no provider call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<Vec<Vec<f64>>>,
    pub relevance: Option<f64>,
    pub redundancy: Option<f64>,
    pub quality: Option<f64>,
}

impl CacheRecord {
    pub fn unscored(key: CacheKey, questions: Vec<String>) -> Self {
        Self {
            key,
            questions,
            embeddings: None,
            relevance: None,
            redundancy: None,
            quality: None,
        }
    }
}

/// Write-once question cache, optionally backed by a JSON-lines file.
///
/// The first record stored under a key wins; later inserts for the same key are ignored.
#[derive(Debug, Default)]
pub struct QuestionCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<CacheKey, CacheRecord>>,
}

impl QuestionCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates on first insert) a cache file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| AlexError::io(&path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| AlexError::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord =
                    serde_json::from_str(&line).map_err(|e| AlexError::MalformedInput {
                        path: path.clone(),
                        line: i + 1,
                        reason: e.to_string(),
                    })?;
                entries.entry(rec.key.clone()).or_insert(rec);
            }
        }
        Ok(Self {
            path: Some(path),
            entries: Mutex::new(entries),
        })
    }

    pub fn get(&self, key: &CacheKey) -> Option<CacheRecord> {
        self.entries.lock().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores `record` unless its key is already present. Returns whether it was stored.
    pub fn insert(&self, record: CacheRecord) -> Result<bool> {
        let mut entries = self.entries.lock();
        if entries.contains_key(&record.key) {
            return Ok(false);
        }
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| AlexError::io(path, e))?;
            let line = serde_json::to_string(&record)?;
            writeln!(file, "{line}").map_err(|e| AlexError::io(path, e))?;
        }
        entries.insert(record.key.clone(), record);
        Ok(true)
    }
}
