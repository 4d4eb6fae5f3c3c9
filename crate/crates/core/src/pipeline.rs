//! File-based pipeline stages: ingest, extract, score and report.
//!
//! Layout under the configured directories:
//!
//! ```text
//! <corpus_dir>/articles.jsonl
//! <output_dir>/units.jsonl
//! <output_dir>/anchors.jsonl
//! <output_dir>/stats.json
//! <output_dir>/premises.jsonl
//! <output_dir>/extraction_failures.jsonl
//! <output_dir>/runs/<run_id>.jsonl
//! ```
//!
//! A run file holds a header record, one record per scored item and a
//! closing aggregates record, each tagged by a `record` field.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, EntailmentBackendKind, GenerationBackendKind, PipelineConfig};
use crate::extraction::{extract_corpus, ArticleInput, ExtractionEvent};
use crate::faithfulness::{
    build_dfs_pairs, dfs_corpus, ConstantScorer, DfsOptions, EntailmentBackend, FaithfulnessError, LexicalScorer,
    RemoteScorer,
};
use crate::gateway::{Gateway, RemoteBackend, StubBackend, StubVerdict};
use crate::ingest::{ingest_article, IngestConfig, LeakFilter, Segmenter};
use crate::model::{
    parse_articles, validate_corpus, Anchor, ArticleRecord, EvaluationRun, Mode, Premise, SentenceUnit, Task,
    VerdictLabel,
};
use crate::retrieval::{evaluate_retrieval, judgments_for, PremiseIndex, RetrievalError};
use crate::verification::{build_items, coverage_aggregate, macro_f1, verify_corpus, LabelSet, VerificationResult};

pub const ARTICLES_FILE: &str = "articles.jsonl";
pub const UNITS_FILE: &str = "units.jsonl";
pub const ANCHORS_FILE: &str = "anchors.jsonl";
pub const STATS_FILE: &str = "stats.json";
pub const PREMISES_FILE: &str = "premises.jsonl";
pub const FAILURES_FILE: &str = "extraction_failures.jsonl";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing input file {0}")]
    MissingInput(PathBuf),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path} line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("corpus failed validation:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("EmptyCorpus: {0} contains no article records")]
    EmptyCorpus(PathBuf),
    #[error("{0}")]
    Backend(String),
    #[error("nothing to score: {0}")]
    NothingToScore(String),
    #[error(transparent)]
    Faithfulness(#[from] FaithfulnessError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Verification(#[from] crate::verification::VerificationError),
    #[error("runs {first} and {second} were produced under different configurations ({first_digest} vs {second_digest})")]
    DigestMismatch {
        first: String,
        second: String,
        first_digest: String,
        second_digest: String,
    },
    #[error("run file {0} is malformed: {1}")]
    BadRun(PathBuf, String),
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn read_input(path: &Path) -> Result<String, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    read_input(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    write_file(path, to_jsonl(items).as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Loads and validates `articles.jsonl`. Any parse or invariant error fails
/// the whole corpus.
pub fn load_articles(path: &Path) -> Result<Vec<ArticleRecord>, PipelineError> {
    let text = read_input(path)?;
    let (records, errors) = parse_articles(&text);
    let mut problems: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
    problems.extend(validate_corpus(&records).iter().map(|e| e.to_string()));
    if !problems.is_empty() {
        return Err(PipelineError::Validation(problems));
    }
    if records.is_empty() {
        return Err(PipelineError::EmptyCorpus(path.to_path_buf()));
    }
    Ok(records)
}

pub fn ingest_settings(cfg: &PipelineConfig) -> Result<IngestConfig, PipelineError> {
    let mut settings = IngestConfig::default();
    if let Some(path) = cfg.leak_patterns_path() {
        settings.leak_filter = LeakFilter::from_list(&read_input(&path)?);
    }
    if let Some(path) = cfg.abbreviations_path() {
        settings.segmenter = Segmenter::from_list(&read_input(&path)?);
    }
    Ok(settings)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub articles: usize,
    pub articles_with_anchors: usize,
    pub articles_failed: usize,
    pub units: usize,
    pub verdict_units: usize,
    pub anchors: usize,
    pub anchored_units: usize,
    pub label_distribution: BTreeMap<String, usize>,
}

/// normalize → segment → mark verdict sentences → extract anchors for every
/// article; writes units, anchors and corpus statistics.
pub fn run_ingest(cfg: &PipelineConfig) -> Result<IngestStats, PipelineError> {
    let articles = load_articles(&cfg.corpus_dir().join(ARTICLES_FILE))?;
    let settings = ingest_settings(cfg)?;
    let outcomes: Vec<_> = articles.par_iter().map(|a| ingest_article(a, &settings)).collect();

    let mut stats = IngestStats {
        articles: articles.len(),
        articles_with_anchors: 0,
        articles_failed: 0,
        units: 0,
        verdict_units: 0,
        anchors: 0,
        anchored_units: 0,
        label_distribution: VerdictLabel::ALL.iter().map(|v| (v.as_str().to_string(), 0)).collect(),
    };
    let mut units: Vec<SentenceUnit> = Vec::new();
    let mut anchors: Vec<Anchor> = Vec::new();
    for (article, outcome) in articles.iter().zip(outcomes) {
        *stats.label_distribution.entry(article.verdict.as_str().to_string()).or_insert(0) += 1;
        match outcome {
            Ok(ingested) => {
                stats.units += ingested.units.len();
                stats.verdict_units += ingested.verdict_unit_count();
                stats.anchors += ingested.anchors.len();
                stats.anchored_units += ingested.anchored_unit_count();
                if ingested.has_anchors() {
                    stats.articles_with_anchors += 1;
                }
                units.extend(ingested.units);
                anchors.extend(ingested.anchors);
            }
            Err(e) => {
                log::warn!("{e}");
                stats.articles_failed += 1;
            }
        }
    }
    let out = cfg.output_dir();
    write_jsonl(&out.join(UNITS_FILE), &units)?;
    write_jsonl(&out.join(ANCHORS_FILE), &anchors)?;
    let mut json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    json.push('\n');
    write_file(&out.join(STATS_FILE), json.as_bytes())?;
    Ok(stats)
}

/// The configured generation gateway, or `None` when `generation.backend`
/// is `none`.
pub fn build_gateway(cfg: &PipelineConfig) -> Result<Option<Gateway>, PipelineError> {
    let backend: Arc<dyn crate::gateway::TextBackend> = match cfg.generation_backend()? {
        GenerationBackendKind::None => return Ok(None),
        GenerationBackendKind::Stub => Arc::new(StubBackend::new(match cfg.stub_verdict() {
            Some(v) => StubVerdict::Fixed(v.to_string()),
            None => StubVerdict::FirstLabel,
        })),
        GenerationBackendKind::Remote => Arc::new(
            RemoteBackend::new(cfg.remote_generation()?).map_err(|e| PipelineError::Backend(e.to_string()))?,
        ),
    };
    Ok(Some(
        Gateway::new(backend, cfg.generation_limiter()?).with_max_retries(cfg.generation_max_retries()?),
    ))
}

pub fn build_scorer(cfg: &PipelineConfig) -> Result<Box<dyn EntailmentBackend>, PipelineError> {
    Ok(match cfg.entailment_backend()? {
        EntailmentBackendKind::Constant => Box::new(ConstantScorer(cfg.entailment_constant()?)),
        EntailmentBackendKind::Lexical => Box::new(LexicalScorer),
        EntailmentBackendKind::Remote => Box::new(RemoteScorer::new(cfg.entailment_remote()?)?),
    })
}

fn require_gateway(gateway: Option<&Gateway>, what: &str) -> Result<Gateway, PipelineError> {
    gateway.cloned().ok_or_else(|| {
        PipelineError::Config(ConfigError::Invalid {
            key: "generation.backend".into(),
            value: "none".into(),
            reason: format!("{what} needs a generation backend (stub or remote)"),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub mode: Mode,
    pub articles_total: usize,
    pub articles_failed: usize,
    pub failure_rate: f64,
    pub premises: usize,
    pub events: usize,
    /// The failure rate is above `extract.max_failure_rate`.
    pub threshold_exceeded: bool,
}

fn group_by_url<T, F: Fn(&T) -> &str>(items: Vec<T>, key: F) -> HashMap<String, Vec<T>> {
    let mut map: HashMap<String, Vec<T>> = HashMap::new();
    for item in items {
        map.entry(key(&item).to_string()).or_default().push(item);
    }
    map
}

/// Runs one extraction mode over every anchored article and replaces that
/// mode's records in `premises.jsonl` and the failure log.
///
/// `gateway` overrides the configured generation backend.
pub fn run_extract(cfg: &PipelineConfig, mode: Mode, gateway: Option<&Gateway>) -> Result<ExtractSummary, PipelineError> {
    let configured;
    let gateway = match gateway {
        Some(g) => Some(g),
        None => {
            configured = build_gateway(cfg)?;
            configured.as_ref()
        }
    };
    let gateway = match mode {
        Mode::A => None,
        Mode::B | Mode::C => Some(require_gateway(gateway, &format!("mode {mode}"))?),
    };
    let out = cfg.output_dir();
    let articles = load_articles(&cfg.corpus_dir().join(ARTICLES_FILE))?;
    let units = group_by_url(read_jsonl::<SentenceUnit>(&out.join(UNITS_FILE))?, |u| &u.article_url);
    let anchors = group_by_url(read_jsonl::<Anchor>(&out.join(ANCHORS_FILE))?, |a| &a.article_url);

    let empty_units: Vec<SentenceUnit> = Vec::new();
    let empty_anchors: Vec<Anchor> = Vec::new();
    let inputs: Vec<ArticleInput<'_>> = articles
        .iter()
        .map(|a| ArticleInput {
            article_url: &a.canonical_url,
            claim: &a.claim_text,
            units: units.get(&a.canonical_url).unwrap_or(&empty_units),
            anchors: anchors.get(&a.canonical_url).unwrap_or(&empty_anchors),
        })
        .collect();
    let corpus = extract_corpus(&inputs, mode, gateway.as_ref());

    let premises_path = out.join(PREMISES_FILE);
    let mut premises: Vec<Premise> = if premises_path.exists() {
        read_jsonl(&premises_path)?
    } else {
        Vec::new()
    };
    premises.retain(|p| p.mode != mode);
    premises.extend(corpus.premises.iter().cloned());
    premises.sort_by_key(|p| p.mode);
    write_jsonl(&premises_path, &premises)?;

    let failures_path = out.join(FAILURES_FILE);
    let mut events: Vec<ExtractionEvent> = if failures_path.exists() {
        read_jsonl(&failures_path)?
    } else {
        Vec::new()
    };
    events.retain(|e| e.mode != mode);
    events.extend(corpus.events.iter().cloned());
    events.sort_by_key(|e| e.mode);
    write_jsonl(&failures_path, &events)?;

    let rate = corpus.failure_rate();
    Ok(ExtractSummary {
        mode,
        articles_total: corpus.articles_total,
        articles_failed: corpus.articles_failed,
        failure_rate: rate,
        premises: corpus.premises.len(),
        events: corpus.events.len(),
        threshold_exceeded: rate > cfg.max_failure_rate()?,
    })
}

/// One line of a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum RunRecord {
    Header {
        run_id: String,
        task: Task,
        mode: Mode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<String>,
        config_digest: String,
    },
    Item {
        item: Value,
    },
    Aggregates {
        aggregates: BTreeMap<String, f64>,
    },
}

pub fn run_to_jsonl(run: &EvaluationRun) -> String {
    let mut records = vec![RunRecord::Header {
        run_id: run.run_id.clone(),
        task: run.task,
        mode: run.mode,
        labels: run.labels.clone(),
        config_digest: run.config_digest.clone(),
    }];
    records.extend(run.per_item.iter().map(|item| RunRecord::Item { item: item.clone() }));
    records.push(RunRecord::Aggregates {
        aggregates: run.aggregates.clone(),
    });
    to_jsonl(&records)
}

pub fn run_path(output_dir: &Path, run_id: &str) -> PathBuf {
    output_dir.join(RUNS_DIR).join(format!("{run_id}.jsonl"))
}

pub fn write_run(output_dir: &Path, run: &EvaluationRun) -> Result<PathBuf, PipelineError> {
    let path = run_path(output_dir, &run.run_id);
    write_file(&path, run_to_jsonl(run).as_bytes())?;
    Ok(path)
}

pub fn read_run(output_dir: &Path, run_id: &str) -> Result<EvaluationRun, PipelineError> {
    let path = run_path(output_dir, run_id);
    let records: Vec<RunRecord> = read_jsonl(&path)?;
    let bad = |m: &str| PipelineError::BadRun(path.clone(), m.to_string());
    let mut iter = records.into_iter();
    let Some(RunRecord::Header {
        run_id,
        task,
        mode,
        labels,
        config_digest,
    }) = iter.next()
    else {
        return Err(bad("first record is not a header"));
    };
    let mut per_item = Vec::new();
    let mut aggregates = None;
    for record in iter {
        match record {
            RunRecord::Item { item } if aggregates.is_none() => per_item.push(item),
            RunRecord::Aggregates { aggregates: a } if aggregates.is_none() => aggregates = Some(a),
            _ => return Err(bad("unexpected record order")),
        }
    }
    Ok(EvaluationRun {
        run_id,
        task,
        mode,
        labels,
        config_digest,
        per_item,
        aggregates: aggregates.ok_or_else(|| bad("missing aggregates record"))?,
    })
}

fn file_digest(paths: &[PathBuf]) -> Result<String, PipelineError> {
    let mut hasher = Sha256::new();
    for path in paths {
        hasher.update(read_input(path)?.as_bytes());
        hasher.update([0u8]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// `<task>-<mode>[-<labels>]-<12 hex>`: a hash of the config digest and the
/// bytes of every input file, so identical inputs give identical ids.
pub fn run_id(task: Task, mode: Mode, labels: Option<LabelSet>, config_digest: &str, inputs_digest: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{}\n{}\n{:?}\n{config_digest}\n{inputs_digest}\n", task.as_str(), mode, labels).as_bytes());
    let h = hex::encode(hasher.finalize());
    match labels {
        Some(l) => format!("{}-{}-{}-{}", task.as_str(), mode, l.as_str(), &h[..12]),
        None => format!("{}-{}-{}", task.as_str(), mode, &h[..12]),
    }
}

/// Per-item record of a DFS run. Article text is left out of published
/// run files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DfsItem {
    Scored {
        premise_id: String,
        entailment: f64,
        overlap: f64,
        dfs: f64,
    },
    Failed {
        premise_id: String,
        reason: String,
    },
}

fn to_values<T: Serialize>(items: &[T]) -> Vec<Value> {
    items
        .iter()
        .map(|i| serde_json::to_value(i).expect("records serialize"))
        .collect()
}

fn from_values<T: DeserializeOwned>(run: &EvaluationRun) -> Result<Vec<T>, String> {
    run.per_item
        .iter()
        .map(|v| serde_json::from_value(v.clone()).map_err(|e| e.to_string()))
        .collect()
}

fn dfs_aggregates(items: &[DfsItem]) -> BTreeMap<String, f64> {
    let scored: Vec<(f64, f64)> = items
        .iter()
        .filter_map(|i| match i {
            DfsItem::Scored { entailment, dfs, .. } => Some((*entailment, *dfs)),
            DfsItem::Failed { .. } => None,
        })
        .collect();
    let n = scored.len() as f64;
    let mut agg = BTreeMap::new();
    if !scored.is_empty() {
        agg.insert("mean_E".into(), scored.iter().map(|s| s.0).sum::<f64>() / n);
        agg.insert("mean_DFS".into(), scored.iter().map(|s| s.1).sum::<f64>() / n);
    }
    agg.insert("n_scored".into(), n);
    agg.insert("n_failed".into(), (items.len() - scored.len()) as f64);
    agg
}

fn retrieval_aggregates(items: &[crate::retrieval::RetrievalJudgment]) -> BTreeMap<String, f64> {
    let mut agg = BTreeMap::new();
    if let Some(first) = items.first() {
        for name in first.metrics.keys() {
            let sum: f64 = items.iter().map(|q| q.metrics.get(name).copied().unwrap_or(0.0)).sum();
            agg.insert(name.clone(), sum / items.len() as f64);
        }
    }
    agg.insert("n_queries".into(), items.len() as f64);
    agg
}

fn verification_aggregates(items: &[VerificationResult], labels: LabelSet) -> Result<BTreeMap<String, f64>, PipelineError> {
    let cov = coverage_aggregate(items)?;
    let mut agg = BTreeMap::new();
    agg.insert("macro_f1".into(), macro_f1(items, &labels.labels()));
    if let Some(c) = cov.mean {
        agg.insert("coverage".into(), c);
    }
    agg.insert("n".into(), items.len() as f64);
    agg.insert("n_parse_failed".into(), items.iter().filter(|r| !r.parse_ok).count() as f64);
    agg.insert("n_hallucinated_ids".into(), items.iter().map(|r| r.hallucinated_ids).sum::<usize>() as f64);
    agg.insert("n_coverage_scored".into(), cov.n_scored as f64);
    Ok(agg)
}

/// Recomputes a run's aggregates from its per-item records alone.
pub fn recompute_aggregates(run: &EvaluationRun) -> Result<BTreeMap<String, f64>, PipelineError> {
    let bad = |e: String| PipelineError::BadRun(PathBuf::from(&run.run_id), e);
    match run.task {
        Task::Dfs => Ok(dfs_aggregates(&from_values(run).map_err(bad)?)),
        Task::Retrieval => Ok(retrieval_aggregates(&from_values(run).map_err(bad)?)),
        Task::Verification => {
            let labels: LabelSet = run
                .labels
                .as_deref()
                .ok_or_else(|| bad("verification run without labels".into()))?
                .parse()
                .map_err(bad)?;
            verification_aggregates(&from_values(run).map_err(bad)?, labels)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoreOutcome {
    pub run: EvaluationRun,
    pub path: PathBuf,
    /// Failed items exceed `extract.max_failure_rate` (DFS only).
    pub threshold_exceeded: bool,
}

fn premises_for(out: &Path, mode: Mode) -> Result<Vec<Premise>, PipelineError> {
    Ok(read_jsonl::<Premise>(&out.join(PREMISES_FILE))?
        .into_iter()
        .filter(|p| p.mode == mode)
        .collect())
}

/// Scores one task for one mode and writes `runs/<run_id>.jsonl`.
///
/// `gateway` overrides the configured generation backend for verification.
pub fn run_score(
    cfg: &PipelineConfig,
    task: Task,
    mode: Mode,
    gateway: Option<&Gateway>,
) -> Result<ScoreOutcome, PipelineError> {
    cfg.validate()?;
    let out = cfg.output_dir();
    let digest = cfg.digest()?;
    let premises_path = out.join(PREMISES_FILE);
    let articles_path = cfg.corpus_dir().join(ARTICLES_FILE);
    let mut threshold_exceeded = false;

    let (labels, per_item, aggregates, inputs) = match task {
        Task::Dfs => {
            let units_path = out.join(UNITS_FILE);
            let premises = premises_for(&out, mode)?;
            let units: Vec<SentenceUnit> = read_jsonl(&units_path)?;
            let pairs = build_dfs_pairs(&premises, &units);
            if pairs.is_empty() {
                return Err(PipelineError::NothingToScore(format!("no mode {mode} premises resolve to a source sentence")));
            }
            let scorer = build_scorer(cfg)?;
            let options = DfsOptions {
                batch_size: cfg.entailment_batch_size()?,
            };
            let items: Vec<DfsItem> = match dfs_corpus(&pairs, scorer.as_ref(), options, &cfg.entailment_limiter()?) {
                Ok(report) => report
                    .scored
                    .iter()
                    .map(|s| DfsItem::Scored {
                        premise_id: s.premise_id.clone(),
                        entailment: s.entailment,
                        overlap: s.overlap,
                        dfs: s.dfs,
                    })
                    .chain(report.failed.iter().map(|f| DfsItem::Failed {
                        premise_id: f.premise_id.clone(),
                        reason: f.reason.clone(),
                    }))
                    .collect(),
                Err(e) => return Err(e.into()),
            };
            let agg = dfs_aggregates(&items);
            threshold_exceeded = agg["n_failed"] / items.len() as f64 > cfg.max_failure_rate()?;
            (None, to_values(&items), agg, vec![premises_path, units_path])
        }
        Task::Retrieval => {
            let premises = premises_for(&out, mode)?;
            if premises.is_empty() {
                return Err(PipelineError::NothingToScore(format!("no mode {mode} premises in {}", premises_path.display())));
            }
            let articles = load_articles(&articles_path)?;
            let claims: BTreeMap<String, String> =
                articles.into_iter().map(|a| (a.canonical_url, a.claim_text)).collect();
            let index = PremiseIndex::build(&premises, cfg.bm25()?)?;
            let judgments = judgments_for(&premises, &claims);
            let report = evaluate_retrieval(&index, &judgments, &cfg.cutoffs()?)?;
            let agg = retrieval_aggregates(&report.per_query);
            (None, to_values(&report.per_query), agg, vec![premises_path, articles_path])
        }
        Task::Verification => {
            let label_set = cfg.labels()?;
            let configured;
            let gateway = match gateway {
                Some(g) => g.clone(),
                None => {
                    configured = build_gateway(cfg)?;
                    require_gateway(configured.as_ref(), "verification")?
                }
            };
            let premises = premises_for(&out, mode)?;
            let articles = load_articles(&articles_path)?;
            let meta: Vec<(String, String, VerdictLabel)> = articles
                .into_iter()
                .map(|a| (a.canonical_url, a.claim_text, a.verdict))
                .collect();
            let items = build_items(&meta, &premises, mode, label_set);
            if items.is_empty() {
                return Err(PipelineError::NothingToScore(format!("no article has mode {mode} premises and a {} gold label", label_set.as_str())));
            }
            let report = verify_corpus(&items, label_set, &gateway)?;
            let agg = verification_aggregates(&report.results, label_set)?;
            (Some(label_set), to_values(&report.results), agg, vec![premises_path, articles_path])
        }
    };

    let run = EvaluationRun {
        run_id: run_id(task, mode, labels, &digest, &file_digest(&inputs)?),
        task,
        mode,
        labels: labels.map(|l| l.as_str().to_string()),
        config_digest: digest,
        per_item,
        aggregates,
    };
    let path = write_run(&out, &run)?;
    Ok(ScoreOutcome {
        run,
        path,
        threshold_exceeded,
    })
}

fn column_order(task: Task, keys: &[&String]) -> Vec<String> {
    let fixed: &[&str] = match task {
        Task::Dfs => &["mean_E", "mean_DFS", "n_scored", "n_failed"],
        Task::Verification => &["macro_f1", "coverage", "n", "n_parse_failed", "n_hallucinated_ids", "n_coverage_scored"],
        Task::Retrieval => {
            let family = |k: &str| match k.split('@').next() {
                Some("MRR") => 0,
                Some("nDCG") => 1,
                Some("R") => 2,
                _ => 3,
            };
            let cutoff = |k: &str| k.split('@').nth(1).and_then(|c| c.parse::<usize>().ok()).unwrap_or(0);
            let mut cols: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
            cols.sort_by_key(|k| (family(k), cutoff(k), k.clone()));
            return cols;
        }
    };
    let mut cols: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    for k in keys {
        if !cols.contains(k) {
            cols.push(k.to_string());
        }
    }
    cols
}

fn format_value(key: &str, value: Option<f64>) -> String {
    match value {
        None => "-".into(),
        Some(v) if key.starts_with("n_") || key == "n" => format!("{v:.0}"),
        Some(v) => format!("{v:.4}"),
    }
}

/// Aligned text tables, one per task, one row per run. Runs produced under
/// different configurations are refused.
pub fn render_report(runs: &[EvaluationRun]) -> Result<String, PipelineError> {
    if let Some(first) = runs.first() {
        if let Some(other) = runs.iter().find(|r| r.config_digest != first.config_digest) {
            return Err(PipelineError::DigestMismatch {
                first: first.run_id.clone(),
                second: other.run_id.clone(),
                first_digest: first.config_digest.clone(),
                second_digest: other.config_digest.clone(),
            });
        }
    }
    let mut out = String::new();
    for task in [Task::Dfs, Task::Retrieval, Task::Verification] {
        let rows: Vec<&EvaluationRun> = runs.iter().filter(|r| r.task == task).collect();
        if rows.is_empty() {
            continue;
        }
        let mut keys: Vec<&String> = Vec::new();
        for r in &rows {
            for k in r.aggregates.keys() {
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
        }
        let cols = column_order(task, &keys);
        let mut header = vec!["mode".to_string()];
        if task == Task::Verification {
            header.push("labels".into());
        }
        header.extend(cols.iter().cloned());
        let mut table = vec![header];
        for r in &rows {
            let mut row = vec![r.mode.to_string()];
            if task == Task::Verification {
                row.push(r.labels.clone().unwrap_or_default());
            }
            row.extend(cols.iter().map(|c| format_value(c, r.aggregates.get(c).copied())));
            table.push(row);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|i| table.iter().map(|row| row[i].chars().count()).max().unwrap_or(0))
            .collect();
        out.push_str(&format!("{}\n", task.as_str()));
        for row in &table {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}
