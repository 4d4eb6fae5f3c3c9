//! Python bindings: record types, the per-stage primitives and the
//! file-backed pipeline.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use evidence_core::config::PipelineConfig;
use evidence_core::extraction::{extract_article, ArticleInput};
use evidence_core::faithfulness::{self, LexicalScorer};
use evidence_core::gateway::{Gateway, StubBackend};
use evidence_core::ingest::{ingest_article, IngestConfig};
use evidence_core::model::{self, ArticleRecord, Mode, Task};
use evidence_core::pipeline;
use evidence_core::retrieval::{self, Bm25Params};
use evidence_core::verification::{macro_f1_pairs, LabelSet};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Serializes through JSON so Python gets plain dicts and lists.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(value_err)
}

#[pyclass(name = "SentenceUnit", frozen, from_py_object)]
#[derive(Clone)]
struct PySentenceUnit(model::SentenceUnit);

#[pymethods]
impl PySentenceUnit {
    #[getter]
    fn article_url(&self) -> &str {
        &self.0.article_url
    }
    #[getter]
    fn letter_id(&self) -> &str {
        &self.0.letter_id
    }
    #[getter]
    fn text(&self) -> &str {
        &self.0.text
    }
    #[getter]
    fn hyperlink_urls(&self) -> Vec<String> {
        self.0.hyperlink_urls.clone()
    }
    #[getter]
    fn is_verdict_sentence(&self) -> bool {
        self.0.is_verdict_sentence
    }
    fn __repr__(&self) -> String {
        format!("SentenceUnit({}: {:?})", self.0.letter_id, self.0.text)
    }
}

#[pyclass(name = "Anchor", frozen, from_py_object)]
#[derive(Clone)]
struct PyAnchor(model::Anchor);

#[pymethods]
impl PyAnchor {
    #[getter]
    fn letter_id(&self) -> &str {
        &self.0.letter_id
    }
    #[getter]
    fn hyperlink_url(&self) -> &str {
        &self.0.hyperlink_url
    }
    #[getter]
    fn source_name(&self) -> &str {
        &self.0.matched_source.name
    }
    fn __repr__(&self) -> String {
        format!("Anchor({} -> {})", self.0.letter_id, self.0.hyperlink_url)
    }
}

#[pyclass(name = "Premise", frozen, from_py_object)]
#[derive(Clone)]
struct PyPremise(model::Premise);

#[pymethods]
impl PyPremise {
    #[getter]
    fn premise_id(&self) -> &str {
        &self.0.premise_id
    }
    #[getter]
    fn display_id(&self) -> &str {
        self.0.display_id()
    }
    #[getter]
    fn letter_id(&self) -> &str {
        &self.0.letter_id
    }
    #[getter]
    fn mode(&self) -> &'static str {
        self.0.mode.as_str()
    }
    #[getter]
    fn text(&self) -> &str {
        &self.0.text
    }
    #[getter]
    fn evidence_type(&self) -> Option<&'static str> {
        self.0.evidence_type.map(|e| e.as_str())
    }
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(runtime_err)
    }
    fn __repr__(&self) -> String {
        format!("Premise({}: {:?})", self.0.premise_id, self.0.text)
    }
}

/// Ingested article: sentence units and qualifying anchors.
#[pyclass(name = "Article", frozen)]
struct PyArticle {
    record: ArticleRecord,
    ingested: evidence_core::ingest::IngestedArticle,
}

#[pymethods]
impl PyArticle {
    /// Parses one `articles.jsonl` record and ingests it with default settings.
    #[staticmethod]
    fn from_json(record: &str) -> PyResult<Self> {
        let record: ArticleRecord = serde_json::from_str(record).map_err(value_err)?;
        let ingested = ingest_article(&record, &IngestConfig::default()).map_err(value_err)?;
        Ok(Self { record, ingested })
    }
    #[getter]
    fn url(&self) -> &str {
        &self.record.canonical_url
    }
    #[getter]
    fn claim(&self) -> &str {
        &self.record.claim_text
    }
    #[getter]
    fn units(&self) -> Vec<PySentenceUnit> {
        self.ingested.units.iter().cloned().map(PySentenceUnit).collect()
    }
    #[getter]
    fn anchors(&self) -> Vec<PyAnchor> {
        self.ingested.anchors.iter().cloned().map(PyAnchor).collect()
    }
    /// Premises for `mode`. B and C use the deterministic stub generator.
    fn extract(&self, mode: &str) -> PyResult<Vec<PyPremise>> {
        let mode = parse_mode(mode)?;
        let gateway = Gateway::unlimited(Arc::new(StubBackend::default()));
        let input = ArticleInput {
            article_url: &self.record.canonical_url,
            claim: &self.record.claim_text,
            units: &self.ingested.units,
            anchors: &self.ingested.anchors,
        };
        let out = extract_article(input, mode, Some(&gateway)).map_err(runtime_err)?;
        Ok(out.premises.into_iter().map(PyPremise).collect())
    }
}

/// BM25 index over `(id, text)` pairs.
#[pyclass(name = "Bm25Index", frozen)]
struct PyBm25Index(retrieval::PremiseIndex);

#[pymethods]
impl PyBm25Index {
    #[new]
    #[pyo3(signature = (documents, k1 = 1.5, b = 0.75))]
    fn new(documents: Vec<(String, String)>, k1: f64, b: f64) -> PyResult<Self> {
        retrieval::PremiseIndex::from_documents(documents, Bm25Params { k1, b })
            .map(Self)
            .map_err(value_err)
    }
    #[getter]
    fn doc_count(&self) -> usize {
        self.0.doc_count()
    }
    fn idf(&self, term: &str) -> f64 {
        self.0.idf(term)
    }
    #[pyo3(signature = (query, k = 10))]
    fn search(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        self.0.search(query, k)
    }
}

/// File-backed pipeline driven by the same keys as the CLI config file.
#[pyclass(name = "Pipeline")]
struct PyPipeline {
    config: PipelineConfig,
}

#[pymethods]
impl PyPipeline {
    #[new]
    #[pyo3(signature = (corpus_dir, output_dir, config_path = None, overrides = None))]
    fn new(
        corpus_dir: PathBuf,
        output_dir: PathBuf,
        config_path: Option<PathBuf>,
        overrides: Option<BTreeMap<String, String>>,
    ) -> PyResult<Self> {
        let mut config = match config_path {
            Some(p) => PipelineConfig::load(&p).map_err(value_err)?,
            None => PipelineConfig::default(),
        };
        for (k, v) in overrides.unwrap_or_default() {
            config.set(&k, &v).map_err(value_err)?;
        }
        config.set("corpus_dir", &corpus_dir.to_string_lossy()).map_err(value_err)?;
        config.set("output_dir", &output_dir.to_string_lossy()).map_err(value_err)?;
        config.validate().map_err(value_err)?;
        Ok(Self { config })
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.config.set(key, value).map_err(value_err)
    }

    fn config_digest(&self) -> PyResult<String> {
        self.config.digest().map_err(value_err)
    }

    fn ingest<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let stats = py.detach(|| pipeline::run_ingest(&self.config)).map_err(runtime_err)?;
        to_py(py, &stats)
    }

    fn extract<'py>(&self, py: Python<'py>, mode: &str) -> PyResult<Bound<'py, PyAny>> {
        let mode = parse_mode(mode)?;
        let summary = py.detach(|| pipeline::run_extract(&self.config, mode, None)).map_err(runtime_err)?;
        to_py(py, &summary)
    }

    /// Scores one task and returns `(run_id, aggregates)`.
    fn score(&self, py: Python<'_>, task: &str, mode: &str) -> PyResult<(String, BTreeMap<String, f64>)> {
        let task: Task = task.parse().map_err(value_err)?;
        let mode = parse_mode(mode)?;
        let outcome = py
            .detach(|| pipeline::run_score(&self.config, task, mode, None))
            .map_err(runtime_err)?;
        Ok((outcome.run.run_id, outcome.run.aggregates))
    }

    fn report(&self, run_ids: Vec<String>) -> PyResult<String> {
        let out = self.config.output_dir();
        let runs = run_ids
            .iter()
            .map(|id| pipeline::read_run(&out, id))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        pipeline::render_report(&runs).map_err(value_err)
    }
}

#[pyfunction]
fn letter_id(index: usize) -> String {
    evidence_core::letters::letter_id(index)
}

#[pyfunction]
fn letter_index(id: &str) -> Option<usize> {
    evidence_core::letters::index_of(id)
}

#[pyfunction]
fn premise_id(article_url: &str, mode: &str, letter_id: &str, seq: usize) -> PyResult<String> {
    Ok(model::premise_id(article_url, parse_mode(mode)?, letter_id, seq))
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    faithfulness::tokenize(text)
}

/// Share of premise tokens that also occur in the source.
#[pyfunction]
fn overlap(premise: &str, source: &str) -> PyResult<f64> {
    faithfulness::overlap(premise, source).map_err(value_err)
}

/// Lexical entailment stand-in: overlap of the premise with the source.
#[pyfunction]
fn lexical_entailment(premise: &str, source: &str) -> PyResult<f64> {
    faithfulness::entail(premise, source, &LexicalScorer).map_err(value_err)
}

#[pyfunction]
fn dfs(entailment: f64, overlap: f64) -> PyResult<f64> {
    if !(0.0..=1.0).contains(&entailment) || !(0.0..=1.0).contains(&overlap) {
        return Err(PyValueError::new_err("entailment and overlap must lie in [0, 1]"));
    }
    Ok(entailment * (1.0 - overlap))
}

fn gold_set(gold: Vec<String>) -> HashSet<String> {
    gold.into_iter().collect()
}

#[pyfunction]
fn reciprocal_rank(ranking: Vec<String>, gold: Vec<String>, k: usize) -> f64 {
    retrieval::reciprocal_rank_at(&ranking, &gold_set(gold), k)
}

#[pyfunction]
fn recall(ranking: Vec<String>, gold: Vec<String>, k: usize) -> f64 {
    retrieval::recall_at(&ranking, &gold_set(gold), k)
}

#[pyfunction]
fn ndcg(ranking: Vec<String>, gold: Vec<String>, k: usize) -> f64 {
    retrieval::ndcg_at(&ranking, &gold_set(gold), k)
}

/// Macro-F1 over `(gold, predicted)` pairs for the `binary` or `five` label set.
#[pyfunction]
fn macro_f1(pairs: Vec<(String, String)>, labels: &str) -> PyResult<f64> {
    let set: LabelSet = labels.parse().map_err(value_err)?;
    Ok(macro_f1_pairs(&pairs, &set.labels()))
}

#[pymodule]
fn evidence(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySentenceUnit>()?;
    m.add_class::<PyAnchor>()?;
    m.add_class::<PyPremise>()?;
    m.add_class::<PyArticle>()?;
    m.add_class::<PyBm25Index>()?;
    m.add_class::<PyPipeline>()?;
    for f in [
        wrap_pyfunction!(letter_id, m)?,
        wrap_pyfunction!(letter_index, m)?,
        wrap_pyfunction!(premise_id, m)?,
        wrap_pyfunction!(tokenize, m)?,
        wrap_pyfunction!(overlap, m)?,
        wrap_pyfunction!(lexical_entailment, m)?,
        wrap_pyfunction!(dfs, m)?,
        wrap_pyfunction!(reciprocal_rank, m)?,
        wrap_pyfunction!(recall, m)?,
        wrap_pyfunction!(ndcg, m)?,
        wrap_pyfunction!(macro_f1, m)?,
    ] {
        m.add_function(f)?;
    }
    Ok(())
}
