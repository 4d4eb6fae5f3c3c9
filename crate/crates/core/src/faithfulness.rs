//! Decontextualization faithfulness: forward entailment discounted by how
//! much of the premise is copied from its source.
//!
//! For a premise `p` rewritten from source sentence `s`:
//!
//! ```text
//! O(p, s)   = |t(p) ∩ t(s)| / |t(p)|      (multiset intersection)
//! dfs(p, s) = E(p, s) * (1 - O(p, s))
//! DFS(D)    = mean of dfs over D
//! ```
//!
//! where `E(p, s)` is the probability that `p` entails `s`.

use std::collections::HashMap;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gateway::Limiter;
use crate::model::{Premise, SentenceUnit};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaithfulnessError {
    #[error("premise has no tokens")]
    EmptyPremise,
    #[error("no pair could be scored")]
    EmptyDataset,
    #[error("entailment backend failure: {0}")]
    Backend(String),
}

/// Lowercased whitespace tokens with non-alphanumeric characters trimmed from
/// both ends. Internal hyphens and apostrophes survive; numbers are kept
/// verbatim.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

/// Share of the premise's tokens that also occur in the source, counting
/// multiplicities.
pub fn overlap(p: &str, s: &str) -> Result<f64, FaithfulnessError> {
    let tp = tokenize(p);
    if tp.is_empty() {
        return Err(FaithfulnessError::EmptyPremise);
    }
    let ts = tokenize(s);
    let cs = counts(&ts);
    let shared: usize = counts(&tp)
        .into_iter()
        .map(|(tok, n)| n.min(cs.get(tok).copied().unwrap_or(0)))
        .sum();
    Ok(shared as f64 / tp.len() as f64)
}

/// Wire form of one pair sent to an entailment service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
}

/// Class probabilities returned for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliScores {
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

/// Scores (premise, hypothesis) pairs; results come back in request order.
pub trait EntailmentBackend: Send + Sync {
    fn score_batch(&self, pairs: &[NliPair]) -> Result<Vec<NliScores>, FaithfulnessError>;
}

/// Fixed entailment probability for every pair.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl EntailmentBackend for ConstantScorer {
    fn score_batch(&self, pairs: &[NliPair]) -> Result<Vec<NliScores>, FaithfulnessError> {
        Ok(pairs
            .iter()
            .map(|_| NliScores {
                entail: self.0,
                neutral: 1.0 - self.0,
                contradict: 0.0,
            })
            .collect())
    }
}

/// Entailment approximated by how much of the hypothesis the premise covers:
/// `overlap(hypothesis, premise)`, or 0 for a token-less hypothesis.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl EntailmentBackend for LexicalScorer {
    fn score_batch(&self, pairs: &[NliPair]) -> Result<Vec<NliScores>, FaithfulnessError> {
        Ok(pairs
            .iter()
            .map(|pair| {
                let e = overlap(&pair.hypothesis, &pair.premise).unwrap_or(0.0);
                NliScores {
                    entail: e,
                    neutral: 1.0 - e,
                    contradict: 0.0,
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteScorerConfig {
    /// Endpoint receiving `[{premise, hypothesis}, ..]` as a JSON POST body.
    pub url: String,
    pub timeout_ms: u64,
    pub auth_env: Option<String>,
    pub max_retries: u32,
}

/// HTTP entailment service client.
pub struct RemoteScorer {
    config: RemoteScorerConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteScorer {
    pub fn new(config: RemoteScorerConfig) -> Result<Self, FaithfulnessError> {
        let token = match &config.auth_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| FaithfulnessError::Backend(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms.max(1)))
            .build()
            .map_err(|e| FaithfulnessError::Backend(e.to_string()))?;
        Ok(Self { config, token, client })
    }

    fn post_once(&self, pairs: &[NliPair]) -> Result<Vec<NliScores>, String> {
        let mut req = self.client.post(&self.config.url).json(pairs);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}", resp.status()));
        }
        let scores: Vec<NliScores> = resp.json().map_err(|e| format!("malformed response: {e}"))?;
        if scores.len() != pairs.len() {
            return Err(format!("expected {} scores, got {}", pairs.len(), scores.len()));
        }
        Ok(scores)
    }
}

impl EntailmentBackend for RemoteScorer {
    fn score_batch(&self, pairs: &[NliPair]) -> Result<Vec<NliScores>, FaithfulnessError> {
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            match self.post_once(pairs) {
                Ok(scores) => return Ok(scores),
                Err(e) => {
                    log::warn!("entailment batch attempt {}: {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(FaithfulnessError::Backend(last))
    }
}

/// Probability that `p` entails `s` (premise = p, hypothesis = s).
pub fn entail(p: &str, s: &str, scorer: &dyn EntailmentBackend) -> Result<f64, FaithfulnessError> {
    let pair = NliPair {
        premise: p.to_string(),
        hypothesis: s.to_string(),
    };
    let scores = scorer.score_batch(std::slice::from_ref(&pair))?;
    let e = scores
        .first()
        .ok_or_else(|| FaithfulnessError::Backend("empty response".into()))?
        .entail;
    if !(0.0..=1.0).contains(&e) {
        return Err(FaithfulnessError::Backend(format!("entailment probability {e} outside [0, 1]")));
    }
    Ok(e)
}

/// A premise paired with the sentence it must stay faithful to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfsPair {
    pub premise_id: String,
    pub premise: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub premise_id: String,
    pub premise_text: String,
    pub source_text: String,
    pub entailment: f64,
    pub overlap: f64,
    pub dfs: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedPair {
    pub premise_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfsReport {
    pub mean_e: f64,
    pub mean_dfs: f64,
    pub scored: Vec<ScoredPair>,
    pub failed: Vec<FailedPair>,
}

#[derive(Debug, Clone, Copy)]
pub struct DfsOptions {
    pub batch_size: usize,
}

impl Default for DfsOptions {
    fn default() -> Self {
        Self { batch_size: 32 }
    }
}

/// Pairs each premise with the text of the sentence at its letter: the
/// anchored sentence for mode B, the cited sentence for mode C. Premises
/// whose letter does not resolve are skipped.
pub fn build_dfs_pairs(premises: &[Premise], units: &[SentenceUnit]) -> Vec<DfsPair> {
    let by_key: HashMap<(&str, &str), &str> = units
        .iter()
        .map(|u| ((u.article_url.as_str(), u.letter_id.as_str()), u.text.as_str()))
        .collect();
    premises
        .iter()
        .filter_map(|p| {
            let source = by_key.get(&(p.article_url.as_str(), p.letter_id.as_str()))?;
            Some(DfsPair {
                premise_id: p.premise_id.clone(),
                premise: p.text.clone(),
                source: source.to_string(),
            })
        })
        .collect()
}

/// Scores every pair and averages E and dfs over the pairs that scored.
/// Failed pairs are reported, never averaged.
pub fn dfs_corpus(
    pairs: &[DfsPair],
    scorer: &dyn EntailmentBackend,
    options: DfsOptions,
    limiter: &Limiter,
) -> Result<DfsReport, FaithfulnessError> {
    let mut failed = Vec::new();
    let mut ready: Vec<(&DfsPair, f64)> = Vec::new();
    for pair in pairs {
        match overlap(&pair.premise, &pair.source) {
            Ok(o) => ready.push((pair, o)),
            Err(e) => failed.push(FailedPair {
                premise_id: pair.premise_id.clone(),
                reason: e.to_string(),
            }),
        }
    }

    let batches: Vec<Result<Vec<NliScores>, FaithfulnessError>> = ready
        .par_chunks(options.batch_size.max(1))
        .map(|chunk| {
            let request: Vec<NliPair> = chunk
                .iter()
                .map(|(p, _)| NliPair {
                    premise: p.premise.clone(),
                    hypothesis: p.source.clone(),
                })
                .collect();
            let _permit = limiter.acquire();
            scorer.score_batch(&request)
        })
        .collect();

    let mut scored = Vec::new();
    for (chunk, batch) in ready.chunks(options.batch_size.max(1)).zip(batches) {
        let scores = match batch {
            Ok(s) if s.len() == chunk.len() => s,
            Ok(s) => {
                let reason = format!("backend returned {} scores for {} pairs", s.len(), chunk.len());
                failed.extend(chunk.iter().map(|(p, _)| FailedPair {
                    premise_id: p.premise_id.clone(),
                    reason: reason.clone(),
                }));
                continue;
            }
            Err(e) => {
                failed.extend(chunk.iter().map(|(p, _)| FailedPair {
                    premise_id: p.premise_id.clone(),
                    reason: e.to_string(),
                }));
                continue;
            }
        };
        for ((pair, o), score) in chunk.iter().zip(scores) {
            if !(0.0..=1.0).contains(&score.entail) {
                failed.push(FailedPair {
                    premise_id: pair.premise_id.clone(),
                    reason: format!("entailment probability {} outside [0, 1]", score.entail),
                });
                continue;
            }
            scored.push(ScoredPair {
                premise_id: pair.premise_id.clone(),
                premise_text: pair.premise.clone(),
                source_text: pair.source.clone(),
                entailment: score.entail,
                overlap: *o,
                dfs: score.entail * (1.0 - o),
            });
        }
    }
    if scored.is_empty() {
        return Err(FaithfulnessError::EmptyDataset);
    }
    let n = scored.len() as f64;
    let mean_e = scored.iter().map(|s| s.entailment).sum::<f64>() / n;
    let mean_dfs = scored.iter().map(|s| s.dfs).sum::<f64>() / n;
    Ok(DfsReport {
        mean_e,
        mean_dfs,
        scored,
        failed,
    })
}
