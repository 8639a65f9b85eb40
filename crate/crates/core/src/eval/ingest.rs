use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::warn;

use crate::error::{AlexError, Result};
use crate::memory::EditId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    /// One record per line: a bare text line, an edit object
    /// `{"id"?, "text", "queries"?, "answer"?}`, or a query record
    /// `{"query", "gold_edit_id"?, "gold_answer"?, "gold_path"?, "case_id"?}`.
    Plain,
    /// MQuAKE case list (JSON array or one case per line).
    Mquake,
}

impl std::str::FromStr for CorpusFormat {
    type Err = AlexError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "mquake" => Ok(Self::Mquake),
            other => Err(AlexError::InvalidArgument(format!(
                "unknown format {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathHop {
    pub entity: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query: String,
    /// `None` for queries without a trustworthy single gold edit; these are
    /// skipped by the retrieval metrics.
    pub gold_edit_id: Option<EditId>,
    #[serde(default)]
    pub case_id: Option<String>,
    #[serde(default)]
    pub hops: Option<usize>,
    #[serde(default)]
    pub gold_answer: Option<String>,
    #[serde(default)]
    pub gold_path: Option<Vec<PathHop>>,
    #[serde(default)]
    pub predicted_answer: Option<String>,
    #[serde(default)]
    pub predicted_path: Option<Vec<PathHop>>,
}

impl EvalRecord {
    pub fn new(query: impl Into<String>, gold_edit_id: Option<EditId>) -> Self {
        Self {
            query: query.into(),
            gold_edit_id,
            case_id: None,
            hops: None,
            gold_answer: None,
            gold_path: None,
            predicted_answer: None,
            predicted_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    /// Edit texts; position is the edit id.
    pub edits: Vec<String>,
    pub records: Vec<EvalRecord>,
    pub skipped: Vec<Skipped>,
    pub cases: usize,
    /// Case count per hop depth.
    pub hop_counts: BTreeMap<usize, usize>,
    /// Multi-hop questions without a single gold edit.
    pub excluded_from_retrieval: usize,
}

pub fn load_edit_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AlexError::io(path, e))?;
    let corpus = parse_corpus(&text, format)?;
    if corpus.edits.is_empty() && corpus.records.is_empty() {
        warn!(path = %path.display(), "corpus is empty");
    }
    for s in &corpus.skipped {
        warn!(path = %path.display(), line = s.line, reason = %s.reason, "skipped record");
    }
    Ok(corpus)
}

pub fn parse_corpus(text: &str, format: CorpusFormat) -> Result<Corpus> {
    match format {
        CorpusFormat::Plain => Ok(parse_plain(text)),
        CorpusFormat::Mquake => parse_mquake(text),
    }
}

#[derive(Deserialize)]
struct PlainEdit {
    id: Option<usize>,
    text: String,
    #[serde(default)]
    queries: Vec<String>,
    answer: Option<String>,
}

fn parse_plain(text: &str) -> Corpus {
    let mut corpus = Corpus::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let skip = |reason: String| corpus_skip(lineno, reason);
        if !line.starts_with('{') {
            corpus.edits.push(line.to_string());
            continue;
        }
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                corpus.skipped.push(skip(e.to_string()));
                continue;
            }
        };
        if value.get("query").is_some() && value.get("text").is_none() {
            match serde_json::from_value::<EvalRecord>(value) {
                Ok(r) => corpus.records.push(r),
                Err(e) => corpus.skipped.push(skip(e.to_string())),
            }
            continue;
        }
        let edit: PlainEdit = match serde_json::from_value(value) {
            Ok(e) => e,
            Err(e) => {
                corpus.skipped.push(skip(e.to_string()));
                continue;
            }
        };
        let id = corpus.edits.len();
        if edit.text.trim().is_empty() {
            corpus.skipped.push(skip("empty text".into()));
            continue;
        }
        if let Some(given) = edit.id {
            if given != id {
                corpus
                    .skipped
                    .push(skip(format!("id {given} does not match position {id}")));
                continue;
            }
        }
        corpus.edits.push(edit.text.trim().to_string());
        for q in edit.queries {
            let mut r = EvalRecord::new(q, Some(id));
            r.case_id = Some(id.to_string());
            r.gold_answer = edit.answer.clone();
            corpus.records.push(r);
        }
    }
    corpus
}

fn corpus_skip(line: usize, reason: String) -> Skipped {
    Skipped { line, reason }
}

#[derive(Deserialize)]
struct Target {
    str: String,
}

#[derive(Deserialize)]
struct Rewrite {
    prompt: String,
    subject: String,
    target_new: Target,
}

#[derive(Deserialize)]
struct Hop {
    question: String,
    #[serde(default)]
    cloze: Option<String>,
    answer: String,
}

#[derive(Deserialize)]
struct Case {
    case_id: Option<Value>,
    requested_rewrite: Vec<Rewrite>,
    #[serde(default)]
    questions: Vec<String>,
    new_answer: Option<String>,
    #[serde(default)]
    new_single_hops: Vec<Hop>,
    #[serde(default)]
    single_hops: Vec<Hop>,
}

fn rewrite_text(r: &Rewrite) -> String {
    let prompt = r.prompt.replace("{}", &r.subject);
    format!("{} {}", prompt.trim(), r.target_new.str.trim())
}

fn parse_mquake(text: &str) -> Result<Corpus> {
    let trimmed = text.trim_start();
    let raw_cases: Vec<(usize, std::result::Result<Value, String>)> = if trimmed.starts_with('[') {
        let all: Vec<Value> =
            serde_json::from_str(trimmed).map_err(|e| AlexError::MalformedInput {
                path: PathBuf::from("<mquake>"),
                line: e.line(),
                reason: e.to_string(),
            })?;
        all.into_iter()
            .enumerate()
            .map(|(i, v)| (i + 1, Ok(v)))
            .collect()
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, serde_json::from_str(l).map_err(|e| e.to_string())))
            .collect()
    };

    let mut corpus = Corpus::default();
    let mut by_text: HashMap<String, EditId> = HashMap::new();
    for (position, raw) in raw_cases {
        let case: Case =
            match raw.and_then(|v| serde_json::from_value(v).map_err(|e| e.to_string())) {
                Ok(c) => c,
                Err(reason) => {
                    corpus.skipped.push(corpus_skip(position, reason));
                    continue;
                }
            };
        if case.requested_rewrite.is_empty() {
            corpus.skipped.push(corpus_skip(
                position,
                "case has no requested_rewrite".into(),
            ));
            continue;
        }
        corpus.cases += 1;
        let case_id = case
            .case_id
            .as_ref()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .unwrap_or_else(|| v.to_string())
            })
            .unwrap_or_else(|| position.to_string());

        let mut rewrite_ids = Vec::new();
        for r in &case.requested_rewrite {
            let text = rewrite_text(r);
            let next = corpus.edits.len();
            let id = *by_text.entry(text.clone()).or_insert_with(|| {
                corpus.edits.push(text);
                next
            });
            rewrite_ids.push((id, r.target_new.str.trim().to_string()));
        }

        let hops = if case.new_single_hops.is_empty() {
            &case.single_hops
        } else {
            &case.new_single_hops
        };
        *corpus.hop_counts.entry(hops.len()).or_default() += 1;
        let gold_path: Option<Vec<PathHop>> = (!hops.is_empty()).then(|| {
            hops.iter()
                .map(|h| PathHop {
                    entity: h.cloze.clone().unwrap_or_else(|| h.question.clone()),
                    answer: h.answer.clone(),
                })
                .collect()
        });

        let single_gold = (rewrite_ids.len() == 1).then(|| rewrite_ids[0].0);
        if single_gold.is_none() {
            corpus.excluded_from_retrieval += case.questions.len();
        }
        for q in &case.questions {
            let mut r = EvalRecord::new(q.clone(), single_gold);
            r.case_id = Some(case_id.clone());
            r.hops = Some(hops.len());
            r.gold_answer = case.new_answer.clone();
            r.gold_path = gold_path.clone();
            corpus.records.push(r);
        }
        if single_gold.is_none() {
            // hop-level supervision: a hop whose answer is a rewrite's new target
            for h in &case.new_single_hops {
                if let Some((id, _)) = rewrite_ids.iter().find(|(_, t)| *t == h.answer.trim()) {
                    let mut r = EvalRecord::new(h.question.clone(), Some(*id));
                    r.case_id = Some(format!("{case_id}/hop"));
                    r.hops = Some(1);
                    corpus.records.push(r);
                }
            }
        }
    }
    Ok(corpus)
}

/// An externally produced answer for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub case_id: String,
    pub answer: String,
    #[serde(default)]
    pub path: Option<Vec<PathHop>>,
}

/// Reads a predictions file (one JSON object per line) and attaches each
/// prediction to every record of the same case.
pub fn load_predictions(path: impl AsRef<Path>, records: &mut [EvalRecord]) -> Result<usize> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AlexError::io(path, e))?;
    let mut by_case: HashMap<String, Prediction> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: Value = serde_json::from_str(line).map_err(|e| AlexError::MalformedInput {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        let mut raw = raw;
        if let Some(id) = raw.get("case_id").filter(|v| !v.is_string()).cloned() {
            raw["case_id"] = Value::String(id.to_string());
        }
        let p: Prediction = serde_json::from_value(raw).map_err(|e| AlexError::MalformedInput {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        by_case.insert(p.case_id.clone(), p);
    }
    let mut attached = 0;
    for r in records.iter_mut() {
        if let Some(p) = r.case_id.as_ref().and_then(|c| by_case.get(c)) {
            r.predicted_answer = Some(p.answer.clone());
            r.predicted_path = p.path.clone();
            attached += 1;
        }
    }
    Ok(attached)
}
