//! Article normalization, sentence segmentation, label-leak filtering and
//! anchor qualification.

mod anchors;
mod html;
mod leak;
mod segment;

pub use anchors::{extract_anchors, host_path_key, normalize_url};
pub use html::{normalize_html, normalize_text, LinkSpan, NormalizedDocument, TextBlock, MIN_BLOCK_CHARS};
pub use leak::{mark_verdict_sentences, LeakFilter, DEFAULT_LEAK_PATTERNS, RATING_TRIGGERS, TRIGGER_WINDOW_CHARS};
pub use segment::{Segmenter, DEFAULT_ABBREVIATIONS};

use std::collections::BTreeSet;

use crate::model::{Anchor, ArticleRecord, SentenceUnit};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("{0}: no non-empty text block survived normalization")]
    EmptyDocument(String),
    #[error("{0}: article has neither body_html nor body_text")]
    MissingBody(String),
}

#[derive(Debug, Clone, Default)]
pub struct IngestConfig {
    pub segmenter: Segmenter,
    pub leak_filter: LeakFilter,
}

/// Units and anchors of one article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestedArticle {
    pub units: Vec<SentenceUnit>,
    pub anchors: Vec<Anchor>,
}

impl IngestedArticle {
    /// Distinct anchored sentences (a unit citing two sources counts once).
    pub fn anchored_unit_count(&self) -> usize {
        self.anchors
            .iter()
            .map(|a| a.letter_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn verdict_unit_count(&self) -> usize {
        self.units.iter().filter(|u| u.is_verdict_sentence).count()
    }

    pub fn has_anchors(&self) -> bool {
        !self.anchors.is_empty()
    }
}

/// normalize → segment → mark verdict sentences → extract anchors.
///
/// HTML bodies take precedence over pre-normalized text.
pub fn ingest_article(record: &ArticleRecord, config: &IngestConfig) -> Result<IngestedArticle, IngestError> {
    let url = &record.canonical_url;
    let doc = match (&record.body_html, &record.body_text) {
        (Some(html), _) if !html.trim().is_empty() => normalize_html(url, html)?,
        (_, Some(text)) if !text.trim().is_empty() => normalize_text(url, text)?,
        _ => return Err(IngestError::MissingBody(url.clone())),
    };
    let units = config.segmenter.segment(&doc);
    let units = mark_verdict_sentences(units, record.verdict, &config.leak_filter);
    let anchors = extract_anchors(&units, &record.sources);
    Ok(IngestedArticle { units, anchors })
}
