//! Premise extraction in three modes.
//!
//! * A: every anchored sentence, verbatim.
//! * B: every anchored sentence, rewritten to stand alone by a generator.
//! * C: open extraction of at most `n` premises, `n` being the article's
//!   anchored-sentence count.
//!
//! Every premise keeps the letter id of the sentence it came from.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gateway::{
    build_decontextualize_prompt, build_open_extract_prompt, Gateway, GatewayError, GenerationRequest, Parsed,
    ResponseSchema,
};
use crate::model::{letter_order, premise_id, Anchor, Mode, Premise, SentenceUnit};

/// Mode-C lower bound on the number of requested premises.
pub const MODE_C_MIN_PREMISES: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractionError {
    #[error("{article_url}: anchor references unknown letter {letter_id}")]
    DanglingAnchor { article_url: String, letter_id: String },
    #[error("{0}: no anchored sentences")]
    NoAnchors(String),
}

/// The article as the generator sees it: `A: <text>\nB: <text>...` over
/// non-verdict sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledArticle {
    pub article_url: String,
    pub rendering: String,
    texts: BTreeMap<String, String>,
}

impl LabeledArticle {
    pub fn from_units(article_url: &str, units: &[SentenceUnit]) -> Self {
        let visible: Vec<&SentenceUnit> = units.iter().filter(|u| !u.is_verdict_sentence).collect();
        let rendering = visible
            .iter()
            .map(|u| format!("{}: {}", u.letter_id, u.text))
            .collect::<Vec<_>>()
            .join("\n");
        Self {
            article_url: article_url.to_string(),
            rendering,
            texts: visible
                .iter()
                .map(|u| (u.letter_id.clone(), u.text.clone()))
                .collect(),
        }
    }

    pub fn text_of(&self, letter: &str) -> Option<&str> {
        self.texts.get(letter).map(String::as_str)
    }

    pub fn letters(&self) -> Vec<String> {
        self.texts.keys().cloned().collect()
    }
}

/// A log line for the extraction-failures file. Only `schema_failure` and
/// `transport_failure` count as failures; `letter_corrected` and
/// `unknown_letter` record repairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionEvent {
    pub article_url: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub letter_id: Option<String>,
    pub kind: String,
    pub raw_text_digest: String,
    pub message: String,
}

impl ExtractionEvent {
    pub fn is_failure(&self) -> bool {
        matches!(self.kind.as_str(), "schema_failure" | "transport_failure" | "bounds" | "config")
    }

    fn new(article_url: &str, mode: Mode, letter_id: Option<&str>, kind: &str, raw: &str, message: String) -> Self {
        Self {
            article_url: article_url.to_string(),
            mode,
            letter_id: letter_id.map(str::to_string),
            kind: kind.to_string(),
            raw_text_digest: raw_digest(raw),
            message,
        }
    }

    fn from_error(article_url: &str, mode: Mode, letter_id: Option<&str>, err: &GatewayError) -> Self {
        Self::new(article_url, mode, letter_id, err.kind(), err.last_raw(), err.to_string())
    }
}

/// First 16 hex chars of the SHA-256 of a raw response; empty input gives an
/// empty digest.
pub fn raw_digest(raw: &str) -> String {
    if raw.is_empty() {
        return String::new();
    }
    hex::encode(Sha256::digest(raw.as_bytes()))[..16].to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModeOutput {
    pub premises: Vec<Premise>,
    pub events: Vec<ExtractionEvent>,
}

impl ModeOutput {
    pub fn failure_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_failure()).count()
    }
}

/// Distinct anchored letters, in document order.
fn anchored_letters(anchors: &[Anchor]) -> Vec<&str> {
    let mut letters: Vec<&str> = anchors
        .iter()
        .map(|a| a.letter_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    letters.sort_by(|a, b| letter_order(a, b));
    letters
}

fn sort_premises(premises: &mut [Premise]) {
    premises.sort_by(|a, b| letter_order(&a.letter_id, &b.letter_id).then_with(|| a.premise_id.cmp(&b.premise_id)));
}

/// One verbatim premise per distinct anchored sentence.
pub fn mode_a(anchors: &[Anchor], units: &[SentenceUnit]) -> Result<Vec<Premise>, ExtractionError> {
    let by_letter: HashMap<&str, &SentenceUnit> = units.iter().map(|u| (u.letter_id.as_str(), u)).collect();
    let mut premises = Vec::new();
    for letter in anchored_letters(anchors) {
        let anchor = anchors.iter().find(|a| a.letter_id == letter).expect("letter from anchors");
        let unit = by_letter.get(letter).ok_or_else(|| ExtractionError::DanglingAnchor {
            article_url: anchor.article_url.clone(),
            letter_id: letter.to_string(),
        })?;
        premises.push(Premise {
            article_url: unit.article_url.clone(),
            mode: Mode::A,
            premise_id: premise_id(&unit.article_url, Mode::A, letter, 1),
            letter_id: letter.to_string(),
            text: unit.text.clone(),
            evidence_type: None,
            model_id: None,
        });
    }
    Ok(premises)
}

/// One decontextualized premise per distinct anchored sentence. Failed items
/// are logged and skipped; the rest of the article continues.
pub fn mode_b(article: &LabeledArticle, claim: &str, anchors: &[Anchor], gateway: &Gateway) -> ModeOutput {
    let url = &article.article_url;
    let results: Vec<(Option<Premise>, Vec<ExtractionEvent>)> = anchored_letters(anchors)
        .into_par_iter()
        .map(|letter| {
            let Some(target) = article.text_of(letter) else {
                let e = ExtractionEvent::new(url, Mode::B, Some(letter), "unknown_letter", "", format!("anchored letter {letter} is not a visible sentence"));
                return (None, vec![e]);
            };
            let req = match build_decontextualize_prompt(claim, &article.rendering, letter, target) {
                Ok((system, user)) => GenerationRequest::new(
                    system,
                    user,
                    ResponseSchema::Decontextualize {
                        letters: article.letters(),
                    },
                ),
                Err(err) => return (None, vec![ExtractionEvent::from_error(url, Mode::B, Some(letter), &err)]),
            };
            match gateway.generate(&req) {
                Ok(res) => {
                    let Parsed::Decontextualized(out) = res.parsed else {
                        unreachable!("decontextualize schema yields a sentence")
                    };
                    let mut events = Vec::new();
                    if out.letter != letter {
                        log::warn!("{url}: requested letter {letter}, model returned {}; corrected", out.letter);
                        events.push(ExtractionEvent::new(
                            url,
                            Mode::B,
                            Some(letter),
                            "letter_corrected",
                            &res.raw_text,
                            format!("model returned letter {}", out.letter),
                        ));
                    }
                    let premise = Premise {
                        article_url: url.clone(),
                        mode: Mode::B,
                        premise_id: premise_id(url, Mode::B, letter, 1),
                        letter_id: letter.to_string(),
                        text: out.decontextualized,
                        evidence_type: Some(out.category),
                        model_id: Some(res.model_id),
                    };
                    (Some(premise), events)
                }
                Err(err) => {
                    log::warn!("{url}: mode B letter {letter} failed: {err}");
                    (None, vec![ExtractionEvent::from_error(url, Mode::B, Some(letter), &err)])
                }
            }
        })
        .collect();

    let mut output = ModeOutput::default();
    for (premise, events) in results {
        output.premises.extend(premise);
        output.events.extend(events);
    }
    sort_premises(&mut output.premises);
    output
}

/// Open extraction bounded by `n_anchors` premises.
pub fn mode_c(article: &LabeledArticle, claim: &str, n_anchors: usize, gateway: &Gateway) -> ModeOutput {
    let url = &article.article_url;
    let mut output = ModeOutput::default();
    let req = match build_open_extract_prompt(claim, &article.rendering, MODE_C_MIN_PREMISES, n_anchors) {
        Ok((system, user)) => GenerationRequest::new(
            system,
            user,
            ResponseSchema::OpenExtract {
                letters: article.letters(),
                min_n: MODE_C_MIN_PREMISES,
                max_n: n_anchors,
            },
        ),
        Err(err) => {
            output.events.push(ExtractionEvent::from_error(url, Mode::C, None, &err));
            return output;
        }
    };
    let res = match gateway.generate(&req) {
        Ok(res) => res,
        Err(err) => {
            log::warn!("{url}: mode C failed: {err}");
            output.events.push(ExtractionEvent::from_error(url, Mode::C, None, &err));
            return output;
        }
    };
    let Parsed::Premises(items) = res.parsed else {
        unreachable!("open-extract schema yields a list")
    };
    let mut seq: HashMap<String, usize> = HashMap::new();
    for item in items.into_iter().take(n_anchors) {
        if article.text_of(&item.letter).is_none() {
            log::warn!("{url}: mode C cited unknown letter {}; dropped", item.letter);
            output.events.push(ExtractionEvent::new(
                url,
                Mode::C,
                Some(&item.letter),
                "unknown_letter",
                &res.raw_text,
                "premise cites a letter that is not a visible sentence".into(),
            ));
            continue;
        }
        let n = seq.entry(item.letter.clone()).or_insert(0);
        *n += 1;
        output.premises.push(Premise {
            article_url: url.clone(),
            mode: Mode::C,
            premise_id: premise_id(url, Mode::C, &item.letter, *n),
            letter_id: item.letter,
            text: item.decontextualized,
            evidence_type: Some(item.category),
            model_id: Some(res.model_id.clone()),
        });
    }
    sort_premises(&mut output.premises);
    output
}

/// Fraction of mode-C premises whose letter also carries a mode-A premise.
/// Zero when `c` is empty.
pub fn overlap_report(a: &[Premise], c: &[Premise]) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let a_letters: BTreeSet<&str> = a.iter().map(|p| p.letter_id.as_str()).collect();
    let hits = c.iter().filter(|p| a_letters.contains(p.letter_id.as_str())).count();
    hits as f64 / c.len() as f64
}

/// Everything extraction needs to know about one ingested article.
#[derive(Debug, Clone, Copy)]
pub struct ArticleInput<'a> {
    pub article_url: &'a str,
    pub claim: &'a str,
    pub units: &'a [SentenceUnit],
    pub anchors: &'a [Anchor],
}

/// Runs one mode over one article. Articles without anchors yield nothing.
pub fn extract_article(input: ArticleInput<'_>, mode: Mode, gateway: Option<&Gateway>) -> Result<ModeOutput, ExtractionError> {
    if input.anchors.is_empty() {
        return Ok(ModeOutput::default());
    }
    let labeled = || LabeledArticle::from_units(input.article_url, input.units);
    match mode {
        Mode::A => Ok(ModeOutput {
            premises: mode_a(input.anchors, input.units)?,
            events: vec![],
        }),
        Mode::B => {
            let gw = gateway.expect("mode B requires a gateway");
            Ok(mode_b(&labeled(), input.claim, input.anchors, gw))
        }
        Mode::C => {
            let gw = gateway.expect("mode C requires a gateway");
            let n = anchored_letters(input.anchors).len();
            Ok(mode_c(&labeled(), input.claim, n, gw))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusExtraction {
    pub premises: Vec<Premise>,
    pub events: Vec<ExtractionEvent>,
    pub articles_total: usize,
    /// Articles that produced no premise because of generation failures.
    pub articles_failed: usize,
}

impl CorpusExtraction {
    pub fn failure_rate(&self) -> f64 {
        if self.articles_total == 0 {
            0.0
        } else {
            self.articles_failed as f64 / self.articles_total as f64
        }
    }
}

/// Runs `mode` over every article in parallel. Per-article failures never
/// abort the run. Output follows input article order.
pub fn extract_corpus(inputs: &[ArticleInput<'_>], mode: Mode, gateway: Option<&Gateway>) -> CorpusExtraction {
    let outputs: Vec<Result<ModeOutput, ExtractionError>> = inputs
        .par_iter()
        .filter(|i| !i.anchors.is_empty())
        .map(|i| extract_article(*i, mode, gateway))
        .collect();
    let mut corpus = CorpusExtraction::default();
    for (input, out) in inputs.iter().filter(|i| !i.anchors.is_empty()).zip(outputs) {
        corpus.articles_total += 1;
        match out {
            Ok(out) => {
                if out.premises.is_empty() && out.failure_count() > 0 {
                    corpus.articles_failed += 1;
                }
                corpus.premises.extend(out.premises);
                corpus.events.extend(out.events);
            }
            Err(e) => {
                corpus.articles_failed += 1;
                corpus.events.push(ExtractionEvent::new(input.article_url, mode, None, "dangling_anchor", "", e.to_string()));
            }
        }
    }
    corpus
}
