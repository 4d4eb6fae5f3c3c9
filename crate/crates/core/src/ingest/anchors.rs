use std::collections::HashSet;

use url::Url;

use crate::model::{Anchor, SentenceUnit, SourceEntry};

fn is_tracking_param(key: &str) -> bool {
    let key = key.to_ascii_lowercase();
    key.starts_with("utm_") || key == "fbclid" || key == "gclid"
}

fn parse_lenient(raw: &str) -> Option<Url> {
    let raw = raw.trim();
    match Url::parse(raw) {
        Ok(u) if u.has_host() => Some(u),
        Ok(_) => None,
        Err(url::ParseError::RelativeUrlWithoutBase) => {
            let stripped = raw.trim_start_matches('/');
            Url::parse(&format!("http://{stripped}")).ok().filter(Url::has_host)
        }
        Err(_) => None,
    }
}

fn host_port_path(u: &Url) -> String {
    let mut out = u.host_str().unwrap_or_default().to_ascii_lowercase();
    if let Some(port) = u.port() {
        out.push_str(&format!(":{port}"));
    }
    out.push_str(u.path().trim_end_matches('/'));
    out
}

/// Canonical comparison key for a link: lowercase host plus path and the
/// non-tracking query parameters. Scheme, fragment and trailing slash are
/// dropped.
///
/// Inputs that do not parse as URLs fall back to a trimmed, lowercased copy
/// without trailing slashes.
pub fn normalize_url(raw: &str) -> String {
    let Some(u) = parse_lenient(raw) else {
        return raw.trim().trim_end_matches('/').to_lowercase();
    };
    let mut out = host_port_path(&u);
    if let Some(q) = u.query() {
        let kept: Vec<&str> = q
            .split('&')
            .filter(|kv| !kv.is_empty())
            .filter(|kv| !is_tracking_param(kv.split('=').next().unwrap_or_default()))
            .collect();
        if !kept.is_empty() {
            out.push('?');
            out.push_str(&kept.join("&"));
        }
    }
    out
}

/// Host and path only; the fallback match key.
pub fn host_path_key(raw: &str) -> Option<String> {
    parse_lenient(raw).map(|u| host_port_path(&u))
}

struct SourceKey<'a> {
    entry: &'a SourceEntry,
    full: String,
    host_path: Option<String>,
}

/// Qualifies hyperlinks against the author's source list.
///
/// Verdict sentences never yield anchors. A link matches a source when the
/// normalized forms agree, falling back to a host+path comparison. Each
/// (unit, source) pair yields at most one anchor; a link matching several
/// sources binds to the first.
pub fn extract_anchors(units: &[SentenceUnit], sources: &[SourceEntry]) -> Vec<Anchor> {
    let keys: Vec<SourceKey<'_>> = sources
        .iter()
        .filter_map(|entry| {
            let url = entry.url.as_deref()?.trim();
            if url.is_empty() {
                return None;
            }
            Some(SourceKey {
                entry,
                full: normalize_url(url),
                host_path: host_path_key(url),
            })
        })
        .collect();

    let mut anchors = Vec::new();
    for unit in units.iter().filter(|u| !u.is_verdict_sentence) {
        let mut seen: HashSet<usize> = HashSet::new();
        for href in &unit.hyperlink_urls {
            let full = normalize_url(href);
            let matched = keys.iter().position(|k| k.full == full).or_else(|| {
                let hp = host_path_key(href)?;
                keys.iter().position(|k| k.host_path.as_deref() == Some(hp.as_str()))
            });
            if let Some(i) = matched {
                if seen.insert(i) {
                    anchors.push(Anchor {
                        article_url: unit.article_url.clone(),
                        letter_id: unit.letter_id.clone(),
                        matched_source: keys[i].entry.clone(),
                        hyperlink_url: href.clone(),
                    });
                }
            }
        }
    }
    anchors
}
