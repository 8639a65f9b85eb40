use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use alex_core::dea::{retrieve, retrieve_embedded, RetrievalParams};
use alex_core::eval::{
    bench_search_space, evaluate, load_edit_corpus, load_predictions, synthetic_corpus, Corpus,
    CorpusFormat,
};
use alex_core::persist::{load_index, save_index};
use alex_core::pipeline::{add_texts, build_memory};
use alex_core::provider::{embed_texts, ProviderConfig, ProviderKind, QuestionCache};
use alex_core::smp::check_adaptation;
use alex_core::{AlexError, EngineConfig, HierarchicalMemory, KMode};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tracing::warn;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PROVIDER: u8 = 3;

const AUTO_K_MIN: usize = 2;
const AUTO_K_MAX: usize = 20;

#[derive(Parser)]
#[command(
    name = "alex",
    version,
    about = "Hierarchical edit memory: build, query, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest edits, synthesize questions, cluster, and write an index.
    Build(BuildArgs),
    /// Retrieve the best edit for a query.
    Query(QueryArgs),
    /// Score retrieval (and optionally answers) against labelled records.
    Eval(EvalArgs),
    /// Measure the retrieval search space over a list of cluster counts.
    Bench(BenchArgs),
    /// Report clusters, silhouettes and adaptation triggers of an index.
    Stats(StatsArgs),
    /// Write a topic-grouped synthetic corpus.
    GenCorpus(GenCorpusArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Plain,
    Mquake,
}

impl From<Format> for CorpusFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Plain => CorpusFormat::Plain,
            Format::Mquake => CorpusFormat::Mquake,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderChoice {
    Mock,
    Remote,
}

#[derive(Clone, Copy)]
enum KChoice {
    Auto,
    Fixed(usize),
}

impl FromStr for KChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(Self::Fixed(k)),
            _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
        }
    }
}

#[derive(Args)]
struct ProviderArgs {
    #[arg(long, value_enum, default_value = "mock")]
    provider: ProviderChoice,
    /// Sidecar base URL for the remote provider.
    #[arg(long)]
    endpoint: Option<String>,
    /// Embedding dimension.
    #[arg(long, default_value_t = 768)]
    dim: usize,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
}

impl ProviderArgs {
    fn config(&self, cache_path: Option<PathBuf>) -> ProviderConfig {
        ProviderConfig {
            kind: match self.provider {
                ProviderChoice::Mock => ProviderKind::BuiltinMock,
                ProviderChoice::Remote => ProviderKind::Remote,
            },
            endpoint: self.endpoint.clone(),
            dim: self.dim,
            timeout_ms: self.timeout_ms,
            cache_path,
            seed: 0,
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    edits: PathBuf,
    #[arg(long, value_enum, default_value = "plain")]
    format: Format,
    /// `auto` or a fixed cluster count.
    #[arg(long, default_value = "auto")]
    k: KChoice,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Question cache file (JSON lines).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    query: String,
    /// Also print the full retrieval trace as JSON.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    index: PathBuf,
    /// Corpus file carrying the labelled query records.
    #[arg(long)]
    records: PathBuf,
    #[arg(long, value_enum, default_value = "plain")]
    format: Format,
    /// JSON lines of `{"case_id", "answer", "path"?}`.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    edits: PathBuf,
    #[arg(long, value_enum, default_value = "plain")]
    format: Format,
    #[arg(long, value_delimiter = ',', default_value = "7,10,12,15,18,20")]
    k_list: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    m_cap: usize,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    index: PathBuf,
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long, default_value_t = 12)]
    groups: usize,
    #[arg(long, default_value_t = 10)]
    per_group: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("ALEX_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();

    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a, &mut stdout),
        Command::Query(a) => cmd_query(a, &mut stdout),
        Command::Eval(a) => cmd_eval(a, &mut stdout),
        Command::Bench(a) => cmd_bench(a, &mut stdout),
        Command::Stats(a) => cmd_stats(a, &mut stdout),
        Command::GenCorpus(a) => cmd_gen_corpus(a, &mut stdout),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<AlexError>()) {
        Some(a) if a.is_provider() => EXIT_PROVIDER,
        Some(_) => EXIT_DATA,
        None => EXIT_USAGE,
    }
}

fn print_json(out: &mut impl Write, value: &impl Serialize) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_corpus(path: &Path, format: Format) -> anyhow::Result<Corpus> {
    let corpus = load_edit_corpus(path, format.into())?;
    for s in &corpus.skipped {
        warn!(line = s.line, reason = %s.reason, "skipped input line");
    }
    if !corpus.skipped.is_empty() {
        eprintln!(
            "warning: skipped {} malformed line(s) in {}",
            corpus.skipped.len(),
            path.display()
        );
    }
    if corpus.edits.is_empty() {
        return Err(AlexError::EmptyInput("corpus contains no edits").into());
    }
    Ok(corpus)
}

#[derive(Serialize)]
struct BuildOutput<'a> {
    index: &'a Path,
    n: usize,
    k: usize,
    silhouette_global: f64,
    cluster_sizes: &'a [usize],
    empty_question_sets: usize,
    skipped_lines: usize,
    inertia: f64,
    diagnostics: &'a Option<Vec<alex_core::smp::KDiagnostics>>,
    losses: &'a Option<alex_core::smp::LossReport>,
}

fn cmd_build(a: BuildArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let corpus = load_corpus(&a.edits, a.format)?;
    let engine = EngineConfig {
        k_mode: match a.k {
            KChoice::Auto => KMode::Auto {
                k_min: AUTO_K_MIN,
                k_max: AUTO_K_MAX,
            },
            KChoice::Fixed(k) => KMode::Fixed { k },
        },
        seed: a.seed,
        ..EngineConfig::default()
    };
    let provider_cfg = a.provider.config(a.cache.clone());
    let provider = provider_cfg.connect()?;
    let cache = match &a.cache {
        Some(p) => Some(QuestionCache::open(p)?),
        None => None,
    };
    let (memory, report) = build_memory(
        &corpus.edits,
        engine,
        provider_cfg,
        provider.as_ref(),
        cache.as_ref(),
    )?;
    save_index(&memory, &a.out)?;
    print_json(
        out,
        &BuildOutput {
            index: &a.out,
            n: report.n,
            k: report.clustering.k,
            silhouette_global: report.clustering.silhouette_global,
            cluster_sizes: &report.clustering.cluster_sizes,
            empty_question_sets: report.empty_question_sets,
            skipped_lines: corpus.skipped.len(),
            inertia: report.clustering.inertia,
            diagnostics: &report.clustering.diagnostics,
            losses: &report.losses,
        },
    )
}

fn load_nonempty_index(path: &Path) -> anyhow::Result<HierarchicalMemory> {
    let memory = load_index(path)?;
    if memory.is_empty() {
        return Err(AlexError::EmptyInput("index has no edits").into());
    }
    Ok(memory)
}

fn cmd_query(a: QueryArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let memory = load_nonempty_index(&a.index)?;
    let provider = memory.provider.connect()?;
    let (winner, trace) = retrieve(&memory, &a.query, provider.as_ref())?;
    writeln!(out, "edit_id: {}", winner.id)?;
    writeln!(out, "text: {}", winner.text)?;
    writeln!(out, "psi: {:.6}", trace.winner_psi)?;
    writeln!(out, "candidates_examined: {}", trace.candidates_examined)?;
    if a.trace {
        serde_json::to_writer(&mut *out, &trace)?;
        writeln!(out)?;
    }
    Ok(())
}

fn embed_queries(
    provider: &dyn alex_core::provider::Provider,
    queries: &[&str],
) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut all = Vec::with_capacity(queries.len());
    for chunk in queries.chunks(256) {
        all.extend(embed_texts(provider, chunk)?);
    }
    Ok(all)
}

fn cmd_eval(a: EvalArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let memory = load_nonempty_index(&a.index)?;
    let corpus = load_corpus(&a.records, a.format)?;
    let mut records = corpus.records;
    if records.is_empty() {
        bail!(AlexError::EmptyInput(
            "records file contains no query records"
        ));
    }
    if let Some(bad) = records
        .iter()
        .filter_map(|r| r.gold_edit_id)
        .find(|&id| id >= memory.len())
    {
        bail!(AlexError::InvalidArgument(format!(
            "gold edit id {bad} is outside the index (N = {})",
            memory.len()
        )));
    }
    if let Some(p) = &a.predictions {
        let attached = load_predictions(p, &mut records)?;
        eprintln!("attached {attached} prediction(s)");
    }
    let provider = memory.provider.connect()?;
    let texts: Vec<&str> = records.iter().map(|r| r.query.as_str()).collect();
    let embeddings = embed_queries(provider.as_ref(), &texts)?;
    let params = RetrievalParams::from_memory(&memory);
    let traces = records
        .iter()
        .zip(embeddings)
        .map(|(r, q)| retrieve_embedded(&memory, &r.query, q, params))
        .collect::<alex_core::Result<Vec<_>>>()?;
    let name = a
        .records
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let report = evaluate(&name, &memory, &records, &traces)?;
    print_json(out, &report)
}

fn cmd_bench(a: BenchArgs, out: &mut impl Write) -> anyhow::Result<()> {
    if a.k_list.is_empty() {
        bail!("--k-list must name at least one K");
    }
    if a.m_cap == 0 {
        bail!("--m-cap must be positive");
    }
    let corpus = load_corpus(&a.edits, a.format)?;
    let provider_cfg = a.provider.config(None);
    let provider = provider_cfg.connect()?;
    let engine = EngineConfig {
        seed: a.seed,
        m_cap: a.m_cap,
        ..EngineConfig::default()
    };
    // Question sets do not change how many candidates are examined, so the
    // benchmark skips synthesis and clusters raw embeddings.
    let mut memory = HierarchicalMemory::new(provider.dim(), engine, provider_cfg)?;
    add_texts(&mut memory, provider.as_ref(), &corpus.edits)?;
    let gold: Vec<&str> = corpus
        .records
        .iter()
        .filter(|r| r.gold_edit_id.is_some())
        .map(|r| r.query.as_str())
        .collect();
    let queries: Vec<&str> = if gold.is_empty() {
        corpus.edits.iter().map(String::as_str).collect()
    } else {
        gold
    };
    let embeddings = embed_queries(provider.as_ref(), &queries)?;
    let rows = bench_search_space(&memory, &embeddings, &a.k_list, a.m_cap)?;
    print_json(out, &rows)
}

fn cmd_stats(a: StatsArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let memory = load_nonempty_index(&a.index)?;
    writeln!(out, "edits: {}", memory.len())?;
    writeln!(out, "clusters: {}", memory.k())?;
    writeln!(out, "silhouette_global: {:.6}", memory.silhouette_global)?;
    writeln!(out, "silhouette_peak: {:.6}", memory.silhouette_peak)?;
    writeln!(out, "{:>7}  {:>6}  {:>10}", "cluster", "size", "silhouette")?;
    for c in &memory.clusters {
        writeln!(
            out,
            "{:>7}  {:>6}  {:>10.6}",
            c.id,
            c.member_ids.len(),
            c.silhouette
        )?;
    }
    let report = check_adaptation(&memory);
    if report.is_empty() {
        writeln!(out, "no adaptation triggers")?;
    } else {
        if report.global_drop {
            writeln!(
                out,
                "trigger: global silhouette {:.6} below {:.0}% of peak {:.6}",
                report.silhouette_global,
                100.0 * (1.0 - memory.config.drop_ratio),
                report.silhouette_peak
            )?;
        }
        for low in &report.low_clusters {
            writeln!(
                out,
                "trigger: cluster {} silhouette {:.6} below {}",
                low.cluster, low.silhouette, memory.config.theta_s
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PlainEdit<'a> {
    id: usize,
    text: &'a str,
    queries: [&'a str; 1],
}

fn cmd_gen_corpus(a: GenCorpusArgs, out: &mut impl Write) -> anyhow::Result<()> {
    if a.groups == 0 || a.per_group == 0 {
        bail!("--groups and --per-group must be positive");
    }
    let corpus = synthetic_corpus(a.groups, a.per_group, a.seed);
    let file = File::create(&a.out).map_err(|e| AlexError::io(&a.out, e))?;
    let mut w = BufWriter::new(file);
    for (id, (text, record)) in corpus.edits.iter().zip(&corpus.records).enumerate() {
        let line = PlainEdit {
            id,
            text,
            queries: [record.query.as_str()],
        };
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    w.flush()
        .with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(
        out,
        "wrote {} edits to {}",
        corpus.edits.len(),
        a.out.display()
    )?;
    Ok(())
}
