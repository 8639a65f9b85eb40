//! Versioned JSON-lines index format.
//!
//! Line 1 is a header record (format tag, version, dim, K, maxima, config,
//! provider). It is followed by one `edit` record per edit in id order and
//! one `cluster` record per cluster in id order. Floats are written in
//! shortest round-trip form, so a save/load cycle is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{AlexError, Result};
use crate::memory::{Cluster, Edit, HierarchicalMemory};
use crate::provider::ProviderConfig;

pub const INDEX_FORMAT: &str = "alex-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dim: usize,
    n: usize,
    k: usize,
    l_max: usize,
    w_max: usize,
    silhouette_global: f64,
    silhouette_peak: f64,
    config: EngineConfig,
    provider: ProviderConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Edit(Edit),
    Cluster(Cluster),
}

pub fn write_index<W: Write>(memory: &HierarchicalMemory, mut out: W) -> Result<()> {
    let header = Header {
        format: INDEX_FORMAT.to_string(),
        version: INDEX_VERSION,
        dim: memory.dim,
        n: memory.edits.len(),
        k: memory.clusters.len(),
        l_max: memory.l_max,
        w_max: memory.w_max,
        silhouette_global: memory.silhouette_global,
        silhouette_peak: memory.silhouette_peak,
        config: memory.config.clone(),
        provider: memory.provider.clone(),
    };
    let io = |e| AlexError::io("<index>", e);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io)?;
    for e in &memory.edits {
        serde_json::to_writer(&mut out, &Record::Edit(e.clone()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    for c in &memory.clusters {
        serde_json::to_writer(&mut out, &Record::Cluster(c.clone()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_index<R: BufRead>(input: R) -> Result<HierarchicalMemory> {
    let malformed = |line: usize, reason: String| AlexError::MalformedIndex { line, reason };
    let mut lines = input.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| malformed(1, "empty file".into()))?;
    let first = first.map_err(|e| malformed(1, e.to_string()))?;
    let raw: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| malformed(1, e.to_string()))?;
    if raw.get("format").and_then(|f| f.as_str()) != Some(INDEX_FORMAT) {
        return Err(malformed(1, "missing alex-index format tag".into()));
    }
    let version = raw
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| malformed(1, "missing version".into()))?;
    if version != u64::from(INDEX_VERSION) {
        return Err(AlexError::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            supported: INDEX_VERSION,
        });
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| malformed(1, e.to_string()))?;

    let mut memory = HierarchicalMemory::new(header.dim, header.config, header.provider)
        .map_err(|e| malformed(1, e.to_string()))?;
    memory.l_max = header.l_max;
    memory.w_max = header.w_max;
    memory.silhouette_global = header.silhouette_global;
    memory.silhouette_peak = header.silhouette_peak;

    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| malformed(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| malformed(lineno, e.to_string()))?;
        match record {
            Record::Edit(e) => {
                if !memory.clusters.is_empty() {
                    return Err(malformed(
                        lineno,
                        "edit record after cluster records".into(),
                    ));
                }
                if e.id != memory.edits.len() {
                    return Err(malformed(lineno, format!("edit id {} out of order", e.id)));
                }
                check_len(lineno, "embedding", e.embedding.len(), header.dim)?;
                if let Some(qs) = &e.questions {
                    for q in &qs.embeddings {
                        check_len(lineno, "question embedding", q.len(), header.dim)?;
                    }
                }
                memory.edits.push(e);
            }
            Record::Cluster(c) => {
                if c.id != memory.clusters.len() {
                    return Err(malformed(
                        lineno,
                        format!("cluster id {} out of order", c.id),
                    ));
                }
                check_len(
                    lineno,
                    "centroid_full",
                    c.centroid_full.len(),
                    header.dim + 2,
                )?;
                check_len(lineno, "centroid_embed", c.centroid_embed.len(), header.dim)?;
                memory.clusters.push(c);
            }
        }
    }

    if memory.edits.len() != header.n || memory.clusters.len() != header.k {
        return Err(malformed(
            1,
            format!(
                "header declares {} edits / {} clusters, file has {} / {}",
                header.n,
                header.k,
                memory.edits.len(),
                memory.clusters.len()
            ),
        ));
    }
    memory
        .check_partition()
        .map_err(|e| malformed(1, e.to_string()))?;
    Ok(memory)
}

fn check_len(line: usize, what: &str, actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(AlexError::MalformedIndex {
            line,
            reason: format!("{what} has length {actual}, header dim implies {expected}"),
        });
    }
    Ok(())
}

pub fn save_index(memory: &HierarchicalMemory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| AlexError::io(path, e))?;
    write_index(memory, BufWriter::new(file))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<HierarchicalMemory> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| AlexError::io(path, e))?;
    read_index(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::ProviderConfig;

    fn small() -> HierarchicalMemory {
        let mut m = HierarchicalMemory::new(2, EngineConfig::default(), ProviderConfig::mock(2, 0))
            .unwrap();
        m.add_edit("alpha beta", vec![1.0, 0.0]).unwrap();
        m.add_edit("gamma", vec![0.1, 0.7]).unwrap();
        m
    }

    fn to_string(m: &HierarchicalMemory) -> String {
        let mut buf = Vec::new();
        write_index(m, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn round_trip() {
        let m = small();
        let back = read_index(to_string(&m).as_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn future_version_rejected() {
        let text = to_string(&small()).replacen("\"version\":1", "\"version\":999", 1);
        assert!(matches!(
            read_index(text.as_bytes()),
            Err(AlexError::VersionMismatch { found: 999, .. })
        ));
    }

    #[test]
    fn embedding_length_must_match_header() {
        let text = to_string(&small());
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut rec: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
        rec["embedding"] = serde_json::json!([1.0, 0.0, 0.0]);
        lines[1] = rec.to_string();
        let corrupt = lines.join("\n");
        match read_index(corrupt.as_bytes()) {
            Err(AlexError::MalformedIndex { line: 2, reason }) => {
                assert!(reason.contains("embedding"), "{reason}")
            }
            other => panic!("expected malformed index, got {other:?}"),
        }
    }

    #[test]
    fn garbage_rejected() {
        assert!(read_index("not json".as_bytes()).is_err());
        assert!(read_index("".as_bytes()).is_err());
        let text = to_string(&small());
        let truncated: String = text.lines().take(2).collect::<Vec<_>>().join("\n");
        assert!(read_index(truncated.as_bytes()).is_err());
    }
}
