use crate::model::{SentenceUnit, VerdictLabel};

/// Phrases that introduce a rating.
pub const RATING_TRIGGERS: &[&str] = &["we rate", "our ruling", "rates this"];

/// Default leak list: standalone patterns followed by the five label phrases.
pub const DEFAULT_LEAK_PATTERNS: &[&str] = &[
    "we rate",
    "our ruling",
    "rates this",
    "pants on fire",
    "true",
    "mostly true",
    "half true",
    "mostly false",
    "false",
];

/// Maximum distance, in characters, between a rating trigger and the label
/// phrase.
pub const TRIGGER_WINDOW_CHARS: usize = 40;

/// Flags sentences that state the verdict.
///
/// List entries equal to a label display phrase only count when they occur
/// near a rating trigger; every other entry flags on any case-insensitive
/// occurrence.
#[derive(Debug, Clone)]
pub struct LeakFilter {
    patterns: Vec<String>,
    label_phrases: Vec<String>,
    window_chars: usize,
}

impl Default for LeakFilter {
    fn default() -> Self {
        Self::new(DEFAULT_LEAK_PATTERNS.iter().copied())
    }
}

/// Lowercases, maps hyphens to spaces and collapses whitespace.
fn fold(text: &str) -> String {
    text.to_lowercase()
        .replace(['-', '\u{2010}', '\u{2011}'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_word_char(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphanumeric)
}

/// Byte ranges of whole-word occurrences of `needle` in `hay`.
fn find_words(hay: &str, needle: &str) -> Vec<(usize, usize)> {
    hay.match_indices(needle)
        .filter(|&(i, m)| {
            !is_word_char(hay[..i].chars().next_back()) && !is_word_char(hay[i + m.len()..].chars().next())
        })
        .map(|(i, m)| (i, i + m.len()))
        .collect()
}

impl LeakFilter {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let labels: Vec<&str> = VerdictLabel::ALL.iter().map(|v| v.display_phrase()).collect();
        let mut patterns = Vec::new();
        let mut label_phrases = Vec::new();
        for e in entries {
            let e = fold(e.as_ref());
            if e.is_empty() {
                continue;
            }
            if labels.contains(&e.as_str()) {
                label_phrases.push(e);
            } else {
                patterns.push(e);
            }
        }
        Self {
            patterns,
            label_phrases,
            window_chars: TRIGGER_WINDOW_CHARS,
        }
    }

    /// Parses a one-entry-per-line list. Blank lines and `#` comments are
    /// skipped.
    pub fn from_list(list: &str) -> Self {
        Self::new(
            list.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty() && self.label_phrases.is_empty()
    }

    pub fn is_leak(&self, text: &str, verdict: VerdictLabel) -> bool {
        let folded = fold(text);
        if self.patterns.iter().any(|p| folded.contains(p.as_str())) {
            return true;
        }
        let phrase = verdict.display_phrase();
        if !self.label_phrases.iter().any(|p| p == phrase) {
            return false;
        }
        let labels = find_words(&folded, phrase);
        RATING_TRIGGERS.iter().any(|trigger| {
            find_words(&folded, trigger).into_iter().any(|(ts, te)| {
                labels.iter().any(|&(ls, le)| {
                    let gap = if ls >= te {
                        folded[te..ls].chars().count()
                    } else if ts >= le {
                        folded[le..ts].chars().count()
                    } else {
                        0
                    };
                    gap <= self.window_chars
                })
            })
        })
    }
}

/// Sets `is_verdict_sentence` on every unit that states the verdict.
pub fn mark_verdict_sentences(
    mut units: Vec<SentenceUnit>,
    verdict: VerdictLabel,
    filter: &LeakFilter,
) -> Vec<SentenceUnit> {
    for u in &mut units {
        u.is_verdict_sentence = filter.is_leak(&u.text, verdict);
    }
    units
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leak(text: &str, v: VerdictLabel) -> bool {
        LeakFilter::default().is_leak(text, v)
    }

    #[test]
    fn canonical_leak_sentences() {
        assert!(leak("We rate this claim False.", VerdictLabel::False));
        assert!(leak("Our ruling: Half True.", VerdictLabel::HalfTrue));
        assert!(leak("That earns a Pants on Fire!", VerdictLabel::False));
    }

    #[test]
    fn label_word_without_trigger_is_kept() {
        assert!(!leak("The false alarm rate rose.", VerdictLabel::False));
        assert!(!leak("It is true that prices rose.", VerdictLabel::True));
    }

    #[test]
    fn window_rule_with_label_only_list() {
        // Without standalone trigger patterns only the window rule applies.
        let f = LeakFilter::new(["mostly false", "false"]);
        assert!(f.is_leak("So we rate the statement Mostly False.", VerdictLabel::MostlyFalse));
        assert!(f.is_leak("Mostly-false is how our ruling ends.", VerdictLabel::MostlyFalse));
        // Other article's label does not count.
        assert!(!f.is_leak("So we rate the statement Mostly False.", VerdictLabel::True));
        let far = format!("We rate {} false.", "x".repeat(45));
        assert!(!f.is_leak(&far, VerdictLabel::False));
        let near = format!("We rate {} false.", "x".repeat(30));
        assert!(f.is_leak(&near, VerdictLabel::False));
    }

    #[test]
    fn label_phrase_needs_word_boundary() {
        let f = LeakFilter::new(["true"]);
        assert!(!f.is_leak("We rate this untrue.", VerdictLabel::True));
    }

    #[test]
    fn marks_units() {
        let mk = |t: &str| SentenceUnit {
            article_url: "u".into(),
            letter_id: "A".into(),
            text: t.into(),
            hyperlink_urls: vec![],
            is_verdict_sentence: false,
        };
        let units = mark_verdict_sentences(
            vec![mk("Prices rose."), mk("We rate it False.")],
            VerdictLabel::False,
            &LeakFilter::default(),
        );
        assert!(!units[0].is_verdict_sentence);
        assert!(units[1].is_verdict_sentence);
    }
}
