//! Record types shared by every pipeline stage, plus corpus validation.
//!
//! All records persist as JSON Lines with keys in declaration order. Optional
//! fields are omitted when absent.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::letters;

/// Five-way verdict assigned by the fact-checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictLabel {
    True,
    MostlyTrue,
    HalfTrue,
    MostlyFalse,
    False,
}

impl VerdictLabel {
    pub const ALL: [VerdictLabel; 5] = [
        VerdictLabel::True,
        VerdictLabel::MostlyTrue,
        VerdictLabel::HalfTrue,
        VerdictLabel::MostlyFalse,
        VerdictLabel::False,
    ];

    /// Wire form, e.g. `mostly-true`.
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictLabel::True => "true",
            VerdictLabel::MostlyTrue => "mostly-true",
            VerdictLabel::HalfTrue => "half-true",
            VerdictLabel::MostlyFalse => "mostly-false",
            VerdictLabel::False => "false",
        }
    }

    /// Phrase as it appears in running prose, e.g. `mostly false`.
    pub fn display_phrase(self) -> &'static str {
        match self {
            VerdictLabel::True => "true",
            VerdictLabel::MostlyTrue => "mostly true",
            VerdictLabel::HalfTrue => "half true",
            VerdictLabel::MostlyFalse => "mostly false",
            VerdictLabel::False => "false",
        }
    }
}

impl fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown verdict label {0:?}")]
pub struct UnknownVerdict(pub String);

impl FromStr for VerdictLabel {
    type Err = UnknownVerdict;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VerdictLabel::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownVerdict(s.to_string()))
    }
}

/// Two-way verdict. Only obtainable through [`collapse_verdict`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinaryLabel {
    TrueSide,
    FalseSide,
}

impl BinaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::TrueSide => "true-side",
            BinaryLabel::FalseSide => "false-side",
        }
    }
}

/// Maps the five-way verdict onto the binary setting. `half-true` has no
/// binary counterpart.
pub fn collapse_verdict(v: VerdictLabel) -> Option<BinaryLabel> {
    match v {
        VerdictLabel::True | VerdictLabel::MostlyTrue => Some(BinaryLabel::TrueSide),
        VerdictLabel::MostlyFalse | VerdictLabel::False => Some(BinaryLabel::FalseSide),
        VerdictLabel::HalfTrue => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EvidenceType {
    Quote,
    Statistic,
    Document,
    Context,
    Other,
}

impl EvidenceType {
    pub const ALL: [EvidenceType; 5] = [
        EvidenceType::Quote,
        EvidenceType::Statistic,
        EvidenceType::Document,
        EvidenceType::Context,
        EvidenceType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceType::Quote => "QUOTE",
            EvidenceType::Statistic => "STATISTIC",
            EvidenceType::Document => "DOCUMENT",
            EvidenceType::Context => "CONTEXT",
            EvidenceType::Other => "OTHER",
        }
    }

    /// Case-insensitive parse of a category name.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        EvidenceType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for EvidenceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Evidence extraction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    /// Anchored sentences, verbatim.
    A,
    /// Anchored sentences, decontextualized.
    B,
    /// Open extraction bounded by the anchor count.
    C,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::A => "A",
            Mode::B => "B",
            Mode::C => "C",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Mode::A),
            "B" | "b" => Ok(Mode::B),
            "C" | "c" => Ok(Mode::C),
            other => Err(format!("unknown mode {other:?} (expected A, B or C)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_url: Option<String>,
}

impl SourceEntry {
    pub fn new(name: impl Into<String>, url: Option<&str>) -> Self {
        Self {
            name: name.into(),
            url: url.map(str::to_string),
            normalized_url: None,
        }
    }

    /// Fills `normalized_url` from `url`.
    pub fn with_normalized_url(mut self) -> Self {
        self.normalized_url = self.url.as_deref().map(crate::ingest::normalize_url);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub canonical_url: String,
    pub claim_text: String,
    pub verdict: VerdictLabel,
    pub crawl_timestamp: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub author_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    #[serde(default)]
    pub sources: Vec<SourceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_html: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceUnit {
    pub article_url: String,
    pub letter_id: String,
    pub text: String,
    #[serde(default)]
    pub hyperlink_urls: Vec<String>,
    #[serde(default)]
    pub is_verdict_sentence: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub article_url: String,
    pub letter_id: String,
    pub matched_source: SourceEntry,
    pub hyperlink_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Premise {
    pub article_url: String,
    pub mode: Mode,
    pub premise_id: String,
    pub letter_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_type: Option<EvidenceType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
}

impl Premise {
    /// Identifier shown to a verifier: the letter plus any disambiguating
    /// sequence number carried by the premise id (`B`, `B:2`).
    pub fn display_id(&self) -> &str {
        let prefix_len = self
            .premise_id
            .splitn(3, ':')
            .take(2)
            .map(|p| p.len() + 1)
            .sum::<usize>();
        self.premise_id.get(prefix_len..).unwrap_or(&self.letter_id)
    }
}

/// Builds `<sha1(article_url)[:12]>:<mode>:<letter>[:<seq>]`. `seq` is only
/// appended for values above 1.
pub fn premise_id(article_url: &str, mode: Mode, letter_id: &str, seq: usize) -> String {
    let digest = hex::encode(Sha1::digest(article_url.as_bytes()));
    let mut id = format!("{}:{}:{}", &digest[..12], mode, letter_id);
    if seq > 1 {
        id.push_str(&format!(":{seq}"));
    }
    id
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Dfs,
    Retrieval,
    Verification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Dfs => "dfs",
            Task::Retrieval => "retrieval",
            Task::Verification => "verification",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dfs" => Ok(Task::Dfs),
            "retrieval" => Ok(Task::Retrieval),
            "verification" => Ok(Task::Verification),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// A scored experiment. Persisted as `runs/<run_id>.jsonl`, see
/// [`crate::pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRun {
    pub run_id: String,
    pub task: Task,
    pub mode: Mode,
    /// Label granularity of verification runs (`binary` or `five`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    pub config_digest: String,
    pub per_item: Vec<serde_json::Value>,
    pub aggregates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown verdict {value:?}")]
    UnknownVerdict { line: usize, value: String },
    #[error("duplicate canonical_url {url:?} (records {first} and {second})")]
    DuplicateUrl {
        url: String,
        first: usize,
        second: usize,
    },
    #[error("record {index}: empty canonical_url")]
    EmptyUrl { index: usize },
    #[error("record {index} ({url}): empty claim_text")]
    EmptyClaim { index: usize, url: String },
    #[error("record {index} ({url}): neither body_html nor body_text present")]
    MissingBody { index: usize, url: String },
    #[error("record {index} ({url}): source {source_index} has an empty name")]
    EmptySourceName {
        index: usize,
        url: String,
        source_index: usize,
    },
    #[error("record {index} ({url}): source {source_index} normalized_url does not match its url")]
    StaleNormalizedUrl {
        index: usize,
        url: String,
        source_index: usize,
    },
}

fn is_blank(s: &Option<String>) -> bool {
    s.as_deref().is_none_or(|s| s.trim().is_empty())
}

/// Returns one error per invariant violation; an empty list means the corpus
/// is valid.
pub fn validate_corpus(records: &[ArticleRecord]) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (index, rec) in records.iter().enumerate() {
        let url = rec.canonical_url.clone();
        if rec.canonical_url.trim().is_empty() {
            errors.push(ValidationError::EmptyUrl { index });
        } else if let Some(&first) = seen.get(rec.canonical_url.as_str()) {
            errors.push(ValidationError::DuplicateUrl {
                url: url.clone(),
                first,
                second: index,
            });
        } else {
            seen.insert(&rec.canonical_url, index);
        }
        if rec.claim_text.trim().is_empty() {
            errors.push(ValidationError::EmptyClaim {
                index,
                url: url.clone(),
            });
        }
        if is_blank(&rec.body_html) && is_blank(&rec.body_text) {
            errors.push(ValidationError::MissingBody {
                index,
                url: url.clone(),
            });
        }
        for (source_index, src) in rec.sources.iter().enumerate() {
            if src.name.trim().is_empty() {
                errors.push(ValidationError::EmptySourceName {
                    index,
                    url: url.clone(),
                    source_index,
                });
            }
            if let Some(norm) = &src.normalized_url {
                let expected = src.url.as_deref().map(crate::ingest::normalize_url);
                if expected.as_deref() != Some(norm.as_str()) {
                    errors.push(ValidationError::StaleNormalizedUrl {
                        index,
                        url: url.clone(),
                        source_index,
                    });
                }
            }
        }
    }
    errors
}

/// Decodes an `articles.jsonl` body. Lines that fail to decode are reported
/// as validation errors (unknown verdicts are rejected, never coerced) and
/// the well-formed records are still returned.
pub fn parse_articles(jsonl: &str) -> (Vec<ArticleRecord>, Vec<ValidationError>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                errors.push(ValidationError::Malformed {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if let Some(v) = value.get("verdict").and_then(|v| v.as_str()) {
            if v.parse::<VerdictLabel>().is_err() {
                errors.push(ValidationError::UnknownVerdict {
                    line: line_no,
                    value: v.to_string(),
                });
                continue;
            }
        }
        match serde_json::from_value::<ArticleRecord>(value) {
            Ok(rec) => records.push(rec),
            Err(e) => errors.push(ValidationError::Malformed {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    (records, errors)
}

/// Orders letter ids by document position (`A < Z < AA`).
pub fn letter_order(a: &str, b: &str) -> std::cmp::Ordering {
    letters::index_of(a)
        .cmp(&letters::index_of(b))
        .then_with(|| a.cmp(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(url: &str, claim: &str) -> ArticleRecord {
        ArticleRecord {
            canonical_url: url.into(),
            claim_text: claim.into(),
            verdict: VerdictLabel::False,
            crawl_timestamp: "2025-09-01T00:00:00Z".into(),
            tags: vec![],
            author_ids: vec![],
            speaker_id: None,
            sources: vec![SourceEntry::new("BLS", Some("https://bls.gov/data"))],
            body_html: Some("<p>Body text.</p>".into()),
            body_text: None,
        }
    }

    #[test]
    fn collapse_examples() {
        assert_eq!(
            collapse_verdict(VerdictLabel::MostlyTrue),
            Some(BinaryLabel::TrueSide)
        );
        assert_eq!(collapse_verdict(VerdictLabel::True), Some(BinaryLabel::TrueSide));
        assert_eq!(collapse_verdict(VerdictLabel::HalfTrue), None);
        assert_eq!(collapse_verdict(VerdictLabel::False), Some(BinaryLabel::FalseSide));
        assert_eq!(
            collapse_verdict(VerdictLabel::MostlyFalse),
            Some(BinaryLabel::FalseSide)
        );
    }

    #[test]
    fn duplicate_url_reported_once() {
        let errs = validate_corpus(&[record("u1", "c"), record("u1", "c")]);
        assert_eq!(errs.len(), 1);
        assert!(matches!(errs[0], ValidationError::DuplicateUrl { .. }));
    }

    #[test]
    fn empty_claim_reported() {
        let errs = validate_corpus(&[record("u1", "  ")]);
        assert_eq!(errs.len(), 1);
        assert!(matches!(errs[0], ValidationError::EmptyClaim { .. }));
    }

    #[test]
    fn valid_corpus_has_no_errors() {
        assert!(validate_corpus(&[record("u1", "a"), record("u2", "b")]).is_empty());
    }

    #[test]
    fn missing_body_reported() {
        let mut r = record("u1", "c");
        r.body_html = None;
        r.body_text = Some("".into());
        let errs = validate_corpus(&[r]);
        assert!(matches!(errs[..], [ValidationError::MissingBody { .. }]));
    }

    #[test]
    fn stale_normalized_url_reported() {
        let mut r = record("u1", "c");
        r.sources[0].normalized_url = Some("example.com".into());
        assert!(matches!(
            validate_corpus(&[r.clone()])[..],
            [ValidationError::StaleNormalizedUrl { .. }]
        ));
        r.sources[0] = r.sources[0].clone().with_normalized_url();
        assert!(validate_corpus(&[r]).is_empty());
    }

    #[test]
    fn unknown_verdict_rejected_not_coerced() {
        let good = serde_json::to_string(&record("u1", "c")).unwrap();
        let bad = good.replace("\"false\"", "\"pants-on-fire\"");
        let (recs, errs) = parse_articles(&format!("{good}\n{bad}\n"));
        assert_eq!(recs.len(), 1);
        assert_eq!(
            errs,
            vec![ValidationError::UnknownVerdict {
                line: 2,
                value: "pants-on-fire".into()
            }]
        );
    }

    #[test]
    fn article_keys_follow_field_order() {
        let json = serde_json::to_string(&record("u1", "c")).unwrap();
        let keys = [
            "canonical_url",
            "claim_text",
            "verdict",
            "crawl_timestamp",
            "tags",
            "author_ids",
            "sources",
            "body_html",
        ];
        let positions: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn premise_id_scheme() {
        let id = premise_id("https://example.org/a", Mode::C, "AB", 1);
        let parts: Vec<&str> = id.split(':').collect();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[0].len(), 12);
        assert_eq!(&parts[1..], &["C", "AB"]);
        let second = premise_id("https://example.org/a", Mode::C, "AB", 2);
        assert!(second.ends_with(":AB:2"));
    }

    #[test]
    fn display_id_keeps_sequence() {
        let mk = |seq| Premise {
            article_url: "u".into(),
            mode: Mode::C,
            premise_id: premise_id("u", Mode::C, "B", seq),
            letter_id: "B".into(),
            text: "t".into(),
            evidence_type: None,
            model_id: None,
        };
        assert_eq!(mk(1).display_id(), "B");
        assert_eq!(mk(2).display_id(), "B:2");
    }

    #[test]
    fn serde_wire_names() {
        assert_eq!(
            serde_json::to_string(&VerdictLabel::MostlyFalse).unwrap(),
            "\"mostly-false\""
        );
        assert_eq!(
            serde_json::to_string(&BinaryLabel::TrueSide).unwrap(),
            "\"true-side\""
        );
        assert_eq!(
            serde_json::to_string(&EvidenceType::Statistic).unwrap(),
            "\"STATISTIC\""
        );
        assert_eq!(EvidenceType::parse("quote"), Some(EvidenceType::Quote));
        assert_eq!(EvidenceType::parse("OPINION"), None);
    }
}
