use std::collections::HashSet;

use super::html::NormalizedDocument;
use crate::letters::letter_id;
use crate::model::SentenceUnit;

/// Abbreviations that end in a period without ending the sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Sen.", "Sens.", "Rep.", "Reps.", "Gov.", "Lt.", "Gen.",
    "Col.", "Capt.", "Sgt.", "Rev.", "Pres.", "Sr.", "Jr.", "St.", "Mt.", "Ft.", "U.S.", "U.K.",
    "U.N.", "No.", "Nos.", "Vol.", "Inc.", "Corp.", "Co.", "Ltd.", "Dept.", "vs.", "v.", "approx.",
    "Jan.", "Feb.", "Mar.", "Apr.", "Jun.", "Jul.", "Aug.", "Sep.", "Sept.", "Oct.", "Nov.",
    "Dec.", "Ala.", "Ariz.", "Ark.", "Calif.", "Colo.", "Conn.", "Del.", "Fla.", "Ga.", "Ill.",
    "Ind.", "Kan.", "Ky.", "La.", "Md.", "Mass.", "Mich.", "Minn.", "Miss.", "Mo.", "Mont.",
    "Neb.", "Nev.", "Okla.", "Ore.", "Pa.", "Tenn.", "Va.", "Vt.", "Wash.", "Wis.", "Wyo.",
];

const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', ')', ']'];
const OPENERS: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '(', '['];

/// Rule-based sentence splitter.
///
/// A boundary is a run of `.`, `!` or `?` (plus closing quotes or brackets)
/// followed by whitespace and an uppercase letter, optionally behind an
/// opening quote. Periods that close a listed abbreviation never split.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: HashSet<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl Segmenter {
    pub fn new<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.as_ref().trim().to_string())
                .filter(|a| !a.is_empty())
                .collect(),
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

    fn is_abbreviation(&self, text: &str, period: usize) -> bool {
        let word_start = text[..period]
            .rfind(char::is_whitespace)
            .map(|i| i + text[i..].chars().next().map_or(1, char::len_utf8))
            .unwrap_or(0);
        let word = text[word_start..=period].trim_start_matches(OPENERS);
        self.abbreviations.contains(word)
    }

    /// Byte ranges of the sentences in one block of text.
    pub fn sentence_spans(&self, text: &str) -> Vec<(usize, usize)> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut spans = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if !matches!(c, '.' | '!' | '?') {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || CLOSERS.contains(&chars[j].1)) {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let spaced = k > j;
            while k < chars.len() && OPENERS.contains(&chars[k].1) {
                k += 1;
            }
            let capital_follows = chars.get(k).is_some_and(|&(_, c)| c.is_uppercase());
            let abbreviated = c == '.' && self.is_abbreviation(text, pos);
            if spaced && capital_follows && !abbreviated {
                spans.push((start, end));
                start = chars[j..]
                    .iter()
                    .find(|(_, c)| !c.is_whitespace())
                    .map_or(text.len(), |&(p, _)| p);
            }
            i = j;
        }
        if start < text.len() {
            spans.push((start, text.len()));
        }
        spans
            .into_iter()
            .map(|(s, e)| {
                let trimmed = text[s..e].trim_end();
                (s, s + trimmed.len())
            })
            .filter(|(s, e)| e > s)
            .collect()
    }

    /// Splits every block into sentence units and assigns letter ids in
    /// document order. Units never span blocks and inherit every link whose
    /// span intersects them.
    pub fn segment(&self, doc: &NormalizedDocument) -> Vec<SentenceUnit> {
        let mut units = Vec::new();
        for block in &doc.blocks {
            for (s, e) in self.sentence_spans(&block.text) {
                let mut hrefs: Vec<String> = Vec::new();
                for link in &block.links {
                    if link.start < e && link.end > s && !hrefs.contains(&link.href) {
                        hrefs.push(link.href.clone());
                    }
                }
                units.push(SentenceUnit {
                    article_url: doc.article_url.clone(),
                    letter_id: letter_id(units.len()),
                    text: block.text[s..e].to_string(),
                    hyperlink_urls: hrefs,
                    is_verdict_sentence: false,
                });
            }
        }
        units
    }
}
