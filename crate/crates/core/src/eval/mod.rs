//! Dataset ingestion, accuracy metrics and the search-space benchmark.

mod bench;
mod ingest;
mod metrics;
mod synthetic;

pub use bench::{bench_search_space, BenchRow};
pub use ingest::{
    load_edit_corpus, load_predictions, parse_corpus, Corpus, CorpusFormat, EvalRecord, PathHop,
    Prediction, Skipped,
};
pub use metrics::{
    cluster_acc, evaluate, hopwise_acc, multihop_acc, normalize_answer, retrieval_acc,
    MetricsReport,
};
pub use synthetic::{synthetic_corpus, SyntheticCorpus};
