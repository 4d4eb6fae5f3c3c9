//! BM25 premise index and ranked-retrieval evaluation.
//!
//! Scoring follows the Robertson/Sparck-Jones form
//!
//! ```text
//! idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
//! score(D, Q) = Σ_{t ∈ Q} idf(t) · tf(t,D)·(k1 + 1) / (tf(t,D) + k1·(1 - b + b·|D|/avgdl))
//! ```
//!
//! Query terms are deduplicated (first-occurrence order) before summing.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::faithfulness::tokenize;
use crate::model::{Mode, Premise};

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot index an empty premise collection")]
    EmptyCorpus,
    #[error("invalid BM25 parameters k1={k1}, b={b} (need k1 > 0, 0 <= b <= 1)")]
    Params { k1: String, b: String },
    #[error("query {0} has an empty gold set")]
    EmptyGold(String),
    #[error("metric cutoff must be at least 1")]
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DocStats {
    id: String,
    len: usize,
    tf: HashMap<String, usize>,
}

/// Immutable BM25 index over premise texts.
#[derive(Debug, Clone, PartialEq)]
pub struct PremiseIndex {
    pub mode: Option<Mode>,
    pub params: Bm25Params,
    docs: Vec<DocStats>,
    df: HashMap<String, usize>,
    postings: HashMap<String, Vec<usize>>,
    avgdl: f64,
}

impl PremiseIndex {
    /// Indexes `(id, text)` documents with the faithfulness tokenizer.
    pub fn from_documents<I, S, T>(docs: I, params: Bm25Params) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        if !(params.k1 > 0.0) || !(0.0..=1.0).contains(&params.b) {
            return Err(RetrievalError::Params {
                k1: params.k1.to_string(),
                b: params.b.to_string(),
            });
        }
        let mut stats = Vec::new();
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, (id, text)) in docs.into_iter().enumerate() {
            let tokens = tokenize(text.as_ref());
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            for term in tf.keys() {
                *df.entry(term.clone()).or_insert(0) += 1;
                postings.entry(term.clone()).or_default().push(i);
            }
            stats.push(DocStats {
                id: id.into(),
                len: tokens.len(),
                tf,
            });
        }
        if stats.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let avgdl = stats.iter().map(|d| d.len as f64).sum::<f64>() / stats.len() as f64;
        Ok(Self {
            mode: None,
            params,
            docs: stats,
            df,
            postings,
            avgdl,
        })
    }

    pub fn build(premises: &[Premise], params: Bm25Params) -> Result<Self, RetrievalError> {
        let mut index = Self::from_documents(premises.iter().map(|p| (p.premise_id.clone(), &p.text)), params)?;
        index.mode = premises.first().map(|p| p.mode);
        Ok(index)
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_score(&self, doc: &DocStats, term: &str, idf: f64) -> f64 {
        let tf = doc.tf.get(term).copied().unwrap_or(0) as f64;
        if tf == 0.0 {
            return 0.0;
        }
        let Bm25Params { k1, b } = self.params;
        let norm = if self.avgdl > 0.0 { doc.len as f64 / self.avgdl } else { 0.0 };
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
    }

    /// Top `k` documents sharing at least one term with the query, by
    /// descending score; ties go to the smaller id.
    pub fn search(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        let mut terms: Vec<String> = Vec::new();
        for t in tokenize(query) {
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for term in &terms {
            let Some(posting) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for &d in posting {
                *scores.entry(d).or_insert(0.0) += self.term_score(&self.docs[d], term, idf);
            }
        }
        let mut ranked: Vec<(String, f64)> = scores
            .into_iter()
            .map(|(d, s)| (self.docs[d].id.clone(), s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

/// Rank (1-based) of the first relevant id within the top `k`, reciprocal.
pub fn reciprocal_rank_at(ranking: &[String], gold: &HashSet<String>, k: usize) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|id| gold.contains(id))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

pub fn recall_at(ranking: &[String], gold: &HashSet<String>, k: usize) -> f64 {
    let hits = ranking.iter().take(k).filter(|id| gold.contains(*id)).count();
    hits as f64 / gold.len() as f64
}

/// Binary-gain nDCG with `log2(rank + 1)` discounts.
pub fn ndcg_at(ranking: &[String], gold: &HashSet<String>, k: usize) -> f64 {
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| gold.contains(*id))
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    let ideal: f64 = (0..gold.len().min(k)).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

/// Which cutoffs to report for each metric family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCutoffs {
    pub mrr: Vec<usize>,
    pub ndcg: Vec<usize>,
    pub recall: Vec<usize>,
}

impl Default for MetricCutoffs {
    fn default() -> Self {
        Self {
            mrr: vec![10],
            ndcg: vec![3, 10],
            recall: vec![1, 3, 10],
        }
    }
}

impl MetricCutoffs {
    pub fn depth(&self) -> usize {
        self.mrr
            .iter()
            .chain(&self.ndcg)
            .chain(&self.recall)
            .copied()
            .max()
            .unwrap_or(10)
    }

    /// Metric names in report order, e.g. `MRR@10, nDCG@3, ...`.
    pub fn names(&self) -> Vec<String> {
        self.mrr
            .iter()
            .map(|k| format!("MRR@{k}"))
            .chain(self.ndcg.iter().map(|k| format!("nDCG@{k}")))
            .chain(self.recall.iter().map(|k| format!("R@{k}")))
            .collect()
    }

    /// All metrics for one ranking, in [`Self::names`] order.
    pub fn compute(&self, ranking: &[String], gold: &HashSet<String>) -> Vec<(String, f64)> {
        self.mrr
            .iter()
            .map(|&k| (format!("MRR@{k}"), reciprocal_rank_at(ranking, gold, k)))
            .chain(self.ndcg.iter().map(|&k| (format!("nDCG@{k}"), ndcg_at(ranking, gold, k))))
            .chain(self.recall.iter().map(|&k| (format!("R@{k}"), recall_at(ranking, gold, k))))
            .collect()
    }
}

/// One evaluation query: the article's claim and its own premises as gold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentSpec {
    pub article_url: String,
    pub query: String,
    pub gold_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalJudgment {
    pub article_url: String,
    pub gold_ids: Vec<String>,
    pub ranking: Vec<(String, f64)>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub per_query: Vec<RetrievalJudgment>,
    /// Arithmetic means over queries, keyed like `MRR@10`.
    pub aggregates: BTreeMap<String, f64>,
}

/// Runs every query against the shared index and averages the metrics.
pub fn evaluate_retrieval(
    index: &PremiseIndex,
    judgments: &[JudgmentSpec],
    cutoffs: &MetricCutoffs,
) -> Result<RetrievalReport, RetrievalError> {
    if cutoffs.mrr.iter().chain(&cutoffs.ndcg).chain(&cutoffs.recall).any(|&k| k == 0) {
        return Err(RetrievalError::Cutoff);
    }
    if let Some(j) = judgments.iter().find(|j| j.gold_ids.is_empty()) {
        return Err(RetrievalError::EmptyGold(j.article_url.clone()));
    }
    let depth = cutoffs.depth();
    let per_query: Vec<RetrievalJudgment> = judgments
        .par_iter()
        .map(|j| {
            let ranking = index.search(&j.query, depth);
            let ids: Vec<String> = ranking.iter().map(|(id, _)| id.clone()).collect();
            let gold: HashSet<String> = j.gold_ids.iter().cloned().collect();
            RetrievalJudgment {
                article_url: j.article_url.clone(),
                gold_ids: j.gold_ids.clone(),
                ranking,
                metrics: cutoffs.compute(&ids, &gold).into_iter().collect(),
            }
        })
        .collect();
    let aggregates = aggregate_metrics(&per_query, cutoffs);
    Ok(RetrievalReport { per_query, aggregates })
}

/// Means of per-query metric records; zero when there are no queries.
pub fn aggregate_metrics(per_query: &[RetrievalJudgment], cutoffs: &MetricCutoffs) -> BTreeMap<String, f64> {
    let n = per_query.len();
    cutoffs
        .names()
        .into_iter()
        .map(|name| {
            let sum: f64 = per_query.iter().map(|q| q.metrics.get(&name).copied().unwrap_or(0.0)).sum();
            let mean = if n == 0 { 0.0 } else { sum / n as f64 };
            (name, mean)
        })
        .collect()
}

/// Queries for every article that has at least one premise in the index's
/// mode. `claims` maps article url to claim text.
pub fn judgments_for(premises: &[Premise], claims: &BTreeMap<String, String>) -> Vec<JudgmentSpec> {
    let mut gold: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for p in premises {
        gold.entry(p.article_url.as_str()).or_default().push(p.premise_id.clone());
    }
    gold.into_iter()
        .filter_map(|(url, ids)| {
            Some(JudgmentSpec {
                article_url: url.to_string(),
                query: claims.get(url)?.clone(),
                gold_ids: ids,
            })
        })
        .collect()
}
