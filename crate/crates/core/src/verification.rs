//! Zero-shot claim verification over premise sets, Macro-F1 and citation
//! coverage.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError, GenerationRequest, Parsed, ResponseSchema};
use crate::model::{collapse_verdict, letter_order, BinaryLabel, Mode, Premise, VerdictLabel};

/// Stored as `predicted` when no valid verdict could be obtained. Never a
/// member of any label set, so it always counts as wrong.
pub const INVALID_LABEL: &str = "<invalid>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSet {
    Binary,
    Five,
}

impl LabelSet {
    pub fn labels(self) -> Vec<String> {
        match self {
            LabelSet::Binary => vec!["true".into(), "false".into()],
            LabelSet::Five => VerdictLabel::ALL.iter().map(|v| v.as_str().to_string()).collect(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelSet::Binary => "binary",
            LabelSet::Five => "five",
        }
    }

    /// Gold label of an article under this set; `None` excludes it
    /// (half-true in binary runs).
    pub fn gold(self, verdict: VerdictLabel) -> Option<String> {
        match self {
            LabelSet::Five => Some(verdict.as_str().to_string()),
            LabelSet::Binary => collapse_verdict(verdict).map(|b| match b {
                BinaryLabel::TrueSide => "true".to_string(),
                BinaryLabel::FalseSide => "false".to_string(),
            }),
        }
    }
}

impl std::str::FromStr for LabelSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(LabelSet::Binary),
            "five" => Ok(LabelSet::Five),
            other => Err(format!("unknown label set {other:?} (expected binary or five)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerificationError {
    #[error("article {0} has no premises to verify against")]
    NoPremises(String),
    #[error("result for {0} has an empty given-id set")]
    EmptyGiven(String),
    #[error("backend configuration: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub article_url: String,
    pub mode: Mode,
    pub predicted: String,
    pub gold: String,
    pub justification: String,
    pub cited_ids: BTreeSet<String>,
    pub given_ids: BTreeSet<String>,
    pub coverage: f64,
    pub parse_ok: bool,
    /// Cited identifiers that were not presented, discarded from `cited_ids`.
    pub hallucinated_ids: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One article to verify.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationItem {
    pub article_url: String,
    pub mode: Mode,
    pub claim: String,
    pub gold: String,
    pub premises: Vec<Premise>,
}

fn seq_of(display_id: &str) -> usize {
    display_id
        .split_once(':')
        .and_then(|(_, s)| s.parse().ok())
        .unwrap_or(1)
}

/// Premises in letter order, repeated letters by sequence number.
pub fn ordered_premises(premises: &[Premise]) -> Vec<&Premise> {
    let mut ordered: Vec<&Premise> = premises.iter().collect();
    ordered.sort_by(|a, b| {
        letter_order(&a.letter_id, &b.letter_id).then_with(|| seq_of(a.display_id()).cmp(&seq_of(b.display_id())))
    });
    ordered
}

/// Builds the verify_v1 prompts. Each premise is listed as `id: text` under
/// `Premises:`; the system prompt carries an `Allowed labels:` line holding
/// the label set as a JSON array.
pub fn build_verification_prompt(claim: &str, premises: &[Premise], labels: &[String]) -> (String, String) {
    let allowed = serde_json::to_string(labels).unwrap_or_else(|_| "[]".into());
    let system = format!(
        "You verify fact-check claims using only the premises provided.\n\
Allowed labels: {allowed}\n\
Respond with JSON only, in the form {{\"verdict\": <one allowed label>, \"justification\": <brief explanation>, \
\"cited_ids\": [<identifiers of the premises you relied on>]}}.\n\
Cite premises by the identifier shown before the colon on their line."
    );
    let mut user = String::from("Premises:\n");
    for p in ordered_premises(premises) {
        let text = p.text.split_whitespace().collect::<Vec<_>>().join(" ");
        user.push_str(&format!("{}: {}\n", p.display_id(), text));
    }
    user.push_str(&format!("Claim: {}\nReturn JSON only.", claim.trim()));
    (system, user)
}

/// `|cited| / |given|`, zero for an empty given set.
pub fn coverage(cited: &BTreeSet<String>, given: &BTreeSet<String>) -> f64 {
    if given.is_empty() {
        0.0
    } else {
        cited.len() as f64 / given.len() as f64
    }
}

/// Splits raw cited ids into the given ones and a count of the rest.
pub fn intersect_cited(raw: &[String], given: &BTreeSet<String>) -> (BTreeSet<String>, usize) {
    let mut cited = BTreeSet::new();
    let mut hallucinated = BTreeSet::new();
    for id in raw {
        if given.contains(id) {
            cited.insert(id.clone());
        } else {
            hallucinated.insert(id.clone());
        }
    }
    (cited, hallucinated.len())
}

pub fn verify_one(
    item: &VerificationItem,
    labels: &[String],
    gateway: &Gateway,
) -> Result<VerificationResult, VerificationError> {
    if item.premises.is_empty() {
        return Err(VerificationError::NoPremises(item.article_url.clone()));
    }
    let given: BTreeSet<String> = item.premises.iter().map(|p| p.display_id().to_string()).collect();
    let (system, user) = build_verification_prompt(&item.claim, &item.premises, labels);
    let request = GenerationRequest::new(system, user, ResponseSchema::Verify { labels: labels.to_vec() });
    let mut result = VerificationResult {
        article_url: item.article_url.clone(),
        mode: item.mode,
        predicted: INVALID_LABEL.to_string(),
        gold: item.gold.clone(),
        justification: String::new(),
        cited_ids: BTreeSet::new(),
        given_ids: given,
        coverage: 0.0,
        parse_ok: false,
        hallucinated_ids: 0,
        error: None,
    };
    match gateway.generate(&request) {
        Ok(gen) => {
            let Parsed::Verdict(v) = gen.parsed else {
                unreachable!("verify_v1 validation yields a verdict")
            };
            let (cited, hallucinated) = intersect_cited(&v.cited_ids, &result.given_ids);
            result.coverage = coverage(&cited, &result.given_ids);
            result.predicted = v.verdict;
            result.justification = v.justification;
            result.cited_ids = cited;
            result.hallucinated_ids = hallucinated;
            result.parse_ok = true;
        }
        Err(e @ (GatewayError::SchemaFailure { .. } | GatewayError::TransportFailure { .. })) => {
            log::warn!("verification of {} failed: {e}", item.article_url);
            result.error = Some(e.to_string());
        }
        Err(e) => return Err(VerificationError::Backend(e.to_string())),
    }
    Ok(result)
}

/// Macro-F1 over `(gold, predicted)` pairs: unweighted mean of per-label F1
/// across `labels`, with F1 = 0 whenever precision + recall = 0. Returns 0
/// for no pairs.
pub fn macro_f1_pairs<G: AsRef<str>, P: AsRef<str>>(pairs: &[(G, P)], labels: &[String]) -> f64 {
    if pairs.is_empty() || labels.is_empty() {
        return 0.0;
    }
    let mut tp: HashMap<&str, usize> = HashMap::new();
    let mut pred_n: HashMap<&str, usize> = HashMap::new();
    let mut gold_n: HashMap<&str, usize> = HashMap::new();
    for (g, p) in pairs {
        let (g, p) = (g.as_ref(), p.as_ref());
        *gold_n.entry(g).or_insert(0) += 1;
        *pred_n.entry(p).or_insert(0) += 1;
        if g == p {
            *tp.entry(g).or_insert(0) += 1;
        }
    }
    let sum: f64 = labels
        .iter()
        .map(|label| {
            let tp = tp.get(label.as_str()).copied().unwrap_or(0) as f64;
            let pn = pred_n.get(label.as_str()).copied().unwrap_or(0) as f64;
            let gn = gold_n.get(label.as_str()).copied().unwrap_or(0) as f64;
            let precision = if pn > 0.0 { tp / pn } else { 0.0 };
            let recall = if gn > 0.0 { tp / gn } else { 0.0 };
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .sum();
    sum / labels.len() as f64
}

/// Macro-F1 of verification results. Parse failures carry
/// [`INVALID_LABEL`] and therefore count as wrong.
pub fn macro_f1(results: &[VerificationResult], labels: &[String]) -> f64 {
    let pairs: Vec<(&str, &str)> = results
        .iter()
        .map(|r| {
            let predicted = if r.parse_ok { r.predicted.as_str() } else { INVALID_LABEL };
            (r.gold.as_str(), predicted)
        })
        .collect();
    macro_f1_pairs(&pairs, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    /// `None` when no result parsed.
    pub mean: Option<f64>,
    pub n_scored: usize,
}

/// Mean coverage over parsed results.
pub fn coverage_aggregate(results: &[VerificationResult]) -> Result<CoverageSummary, VerificationError> {
    if let Some(r) = results.iter().find(|r| r.given_ids.is_empty()) {
        return Err(VerificationError::EmptyGiven(r.article_url.clone()));
    }
    let scored: Vec<f64> = results.iter().filter(|r| r.parse_ok).map(|r| r.coverage).collect();
    let mean = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);
    Ok(CoverageSummary {
        mean,
        n_scored: scored.len(),
    })
}

/// Groups premises by article and pairs them with claims and gold labels.
/// Articles without premises, or without a gold label in this set, are left
/// out. Output is sorted by article url.
pub fn build_items(
    articles: &[(String, String, VerdictLabel)],
    premises: &[Premise],
    mode: Mode,
    label_set: LabelSet,
) -> Vec<VerificationItem> {
    let mut by_url: HashMap<&str, Vec<Premise>> = HashMap::new();
    for p in premises.iter().filter(|p| p.mode == mode) {
        by_url.entry(p.article_url.as_str()).or_default().push(p.clone());
    }
    let mut items: Vec<VerificationItem> = articles
        .iter()
        .filter_map(|(url, claim, verdict)| {
            let gold = label_set.gold(*verdict)?;
            let premises = by_url.remove(url.as_str())?;
            Some(VerificationItem {
                article_url: url.clone(),
                mode,
                claim: claim.clone(),
                gold,
                premises,
            })
        })
        .collect();
    items.sort_by(|a, b| a.article_url.cmp(&b.article_url));
    items
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub results: Vec<VerificationResult>,
    pub macro_f1: f64,
    pub coverage: Option<f64>,
    pub n: usize,
    pub n_parse_failed: usize,
    pub n_hallucinated_ids: usize,
}

/// Verifies every item in parallel (bounded by the gateway's limiter);
/// results come back in article url order.
pub fn verify_corpus(
    items: &[VerificationItem],
    label_set: LabelSet,
    gateway: &Gateway,
) -> Result<VerificationReport, VerificationError> {
    let labels = label_set.labels();
    let mut results = items
        .par_iter()
        .map(|item| verify_one(item, &labels, gateway))
        .collect::<Result<Vec<_>, _>>()?;
    results.sort_by(|a, b| a.article_url.cmp(&b.article_url));
    let cov = coverage_aggregate(&results)?;
    Ok(VerificationReport {
        macro_f1: macro_f1(&results, &labels),
        coverage: cov.mean,
        n: results.len(),
        n_parse_failed: results.iter().filter(|r| !r.parse_ok).count(),
        n_hallucinated_ids: results.iter().map(|r| r.hallucinated_ids).sum(),
        results,
    })
}
