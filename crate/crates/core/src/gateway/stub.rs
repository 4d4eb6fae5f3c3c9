use super::{article_letters, BackendCall, SchemaId, TextBackend, TransportError};
use serde_json::{json, Value};

/// Verdict policy of the stub for verify_v1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubVerdict {
    /// First label of the allowed set.
    FirstLabel,
    /// Always this label (e.g. the majority class).
    Fixed(String),
}

/// Deterministic offline backend. It reads the same prompts a remote model
/// would and answers from them:
///
/// * decontextualize_v1: the target sentence behind the claim's first five
///   words, category CONTEXT.
/// * open_extract_v1: the first `min` lines of the labeled article, verbatim,
///   category CONTEXT.
/// * verify_v1: the configured verdict, citing every presented premise.
#[derive(Debug, Clone)]
pub struct StubBackend {
    model_id: String,
    verdict: StubVerdict,
}

impl Default for StubBackend {
    fn default() -> Self {
        Self::new(StubVerdict::FirstLabel)
    }
}

fn between<'a>(hay: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = hay.find(start)? + start.len();
    let to = hay[from..].find(end).map_or(hay.len(), |i| from + i);
    Some(&hay[from..to])
}

fn claim_prefix(claim: &str) -> String {
    claim.split_whitespace().take(5).collect::<Vec<_>>().join(" ")
}

impl StubBackend {
    pub fn new(verdict: StubVerdict) -> Self {
        Self {
            model_id: "stub".into(),
            verdict,
        }
    }

    fn decontextualize(&self, user: &str) -> Option<Value> {
        let claim = between(user, "Claim: ", "\nArticle (labeled): ")?;
        let letter = between(user, "\nTarget letter: ", "\n")?;
        let target = between(user, "\nTarget sentence: ", "\nReturn JSON only.")?;
        Some(json!({
            "letter": letter,
            "decontextualized": format!("{}, {}", claim_prefix(claim), target),
            "category": "CONTEXT",
        }))
    }

    fn open_extract(&self, system: &str, user: &str) -> Option<Value> {
        let bounds = between(system, "Extract ", " non-redundant")?;
        let min_n: usize = bounds.split('\u{2013}').next()?.trim().parse().ok()?;
        let article = between(user, "\nArticle (labeled): ", "\nReturn JSON only.")?;
        let items: Vec<Value> = article
            .lines()
            .filter_map(|line| {
                let (letter, text) = line.split_once(": ")?;
                article_letters(line).next()?;
                Some(json!({"letter": letter, "decontextualized": text, "category": "CONTEXT"}))
            })
            .take(min_n)
            .collect();
        Some(Value::Array(items))
    }

    fn verify(&self, system: &str, user: &str) -> Option<Value> {
        let labels: Vec<String> = system
            .lines()
            .find_map(|l| l.strip_prefix("Allowed labels: "))
            .and_then(|l| serde_json::from_str(l).ok())?;
        let verdict = match &self.verdict {
            StubVerdict::FirstLabel => labels.first()?.clone(),
            StubVerdict::Fixed(label) => label.clone(),
        };
        let premises = between(user, "Premises:\n", "\nClaim: ")?;
        let ids: Vec<&str> = premises
            .lines()
            .filter_map(|l| l.split_once(": ").map(|(id, _)| id))
            .collect();
        Some(json!({
            "verdict": verdict,
            "justification": format!("Based on premises {}.", ids.join(", ")),
            "cited_ids": ids,
        }))
    }
}

impl TextBackend for StubBackend {
    fn complete(&self, call: &BackendCall<'_>) -> Result<String, TransportError> {
        let value = match call.schema {
            SchemaId::DecontextualizeV1 => self.decontextualize(call.user),
            SchemaId::OpenExtractV1 => self.open_extract(call.system, call.user),
            SchemaId::VerifyV1 => self.verify(call.system, call.user),
        };
        Ok(value.map_or_else(|| "stub: prompt not understood".to_string(), |v| v.to_string()))
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }
}
