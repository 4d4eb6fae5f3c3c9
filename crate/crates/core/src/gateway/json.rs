use serde_json::Value;

/// End (exclusive) of the balanced JSON value starting at `start`, which must
/// be `{` or `[`. String literals and escapes are honored.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Pulls the first balanced top-level JSON object or array out of a model
/// response. Balanced spans that do not parse (e.g. `[1]` style footnotes in
/// prose) are skipped.
pub fn extract_json(raw: &str) -> Option<Value> {
    let bytes = raw.as_bytes();
    let mut pos = 0;
    while let Some(offset) = raw[pos..].find(['{', '[']) {
        let start = pos + offset;
        if let Some(end) = balanced_end(bytes, start) {
            if let Ok(v) = serde_json::from_str::<Value>(&raw[start..end]) {
                return Some(v);
            }
        }
        pos = start + 1;
    }
    None
}
