//! Schema-constrained text generation.
//!
//! A [`Gateway`] wraps a [`TextBackend`] (remote chat service, deterministic
//! stub, or any closure) and turns raw responses into validated values,
//! retrying with a corrective instruction when validation fails.

mod json;
mod limiter;
mod prompts;
mod remote;
mod stub;

pub use json::extract_json;
pub use limiter::{Limiter, Permit};
pub use prompts::{
    article_has_letter, article_letters, build_decontextualize_prompt, build_open_extract_prompt, CATEGORY_GUIDE,
};
pub use remote::{RemoteBackend, RemoteConfig};
pub use stub::{StubBackend, StubVerdict};

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::EvidenceType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    DecontextualizeV1,
    OpenExtractV1,
    VerifyV1,
}

impl SchemaId {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::DecontextualizeV1 => "decontextualize_v1",
            SchemaId::OpenExtractV1 => "open_extract_v1",
            SchemaId::VerifyV1 => "verify_v1",
        }
    }
}

/// A schema together with the request-specific facts its validator needs.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseSchema {
    Decontextualize { letters: Vec<String> },
    OpenExtract { letters: Vec<String>, min_n: usize, max_n: usize },
    Verify { labels: Vec<String> },
}

impl ResponseSchema {
    pub fn id(&self) -> SchemaId {
        match self {
            ResponseSchema::Decontextualize { .. } => SchemaId::DecontextualizeV1,
            ResponseSchema::OpenExtract { .. } => SchemaId::OpenExtractV1,
            ResponseSchema::Verify { .. } => SchemaId::VerifyV1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub schema: ResponseSchema,
    /// In `[0, 1]`.
    pub temperature: f64,
    pub max_retries: u32,
}

impl GenerationRequest {
    pub const DEFAULT_MAX_RETRIES: u32 = 2;

    pub fn new(system_prompt: String, user_prompt: String, schema: ResponseSchema) -> Self {
        Self {
            system_prompt,
            user_prompt,
            schema,
            temperature: 0.0,
            max_retries: Self::DEFAULT_MAX_RETRIES,
        }
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }
}

/// One decontextualized sentence (decontextualize_v1, or an element of
/// open_extract_v1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecontextualizedSentence {
    pub letter: String,
    pub decontextualized: String,
    pub category: EvidenceType,
}

/// verify_v1 payload. `verdict` is canonicalized to the label set's spelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictResponse {
    pub verdict: String,
    pub justification: String,
    pub cited_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Parsed {
    Decontextualized(DecontextualizedSentence),
    Premises(Vec<DecontextualizedSentence>),
    Verdict(VerdictResponse),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub raw_text: String,
    pub parsed: Parsed,
    pub attempts: u32,
    pub model_id: String,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("response failed {schema} validation after {attempts} attempts: {reason}")]
    SchemaFailure {
        schema: &'static str,
        attempts: u32,
        reason: String,
        last_raw: String,
    },
    #[error("transport failure after {attempts} attempts: {message}")]
    TransportFailure {
        attempts: u32,
        message: String,
        last_raw: String,
    },
    #[error("letter {0:?} does not label any line of the article")]
    UnknownLetter(String),
    #[error("invalid premise bounds {min_n}..={max_n} (need 1 <= min <= max)")]
    Bounds { min_n: usize, max_n: usize },
    #[error("backend configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// Short machine-readable kind for failure logs.
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::SchemaFailure { .. } => "schema_failure",
            GatewayError::TransportFailure { .. } => "transport_failure",
            GatewayError::UnknownLetter(_) => "unknown_letter",
            GatewayError::Bounds { .. } => "bounds",
            GatewayError::Config(_) => "config",
        }
    }

    pub fn last_raw(&self) -> &str {
        match self {
            GatewayError::SchemaFailure { last_raw, .. } | GatewayError::TransportFailure { last_raw, .. } => last_raw,
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// What a backend sees for a single attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendCall<'a> {
    pub system: &'a str,
    pub user: &'a str,
    pub schema: SchemaId,
    pub temperature: f64,
    /// 1-based.
    pub attempt: u32,
}

/// A text-generation service: one system and one user message in, one text
/// out.
pub trait TextBackend: Send + Sync {
    fn complete(&self, call: &BackendCall<'_>) -> Result<String, TransportError>;
    fn model_id(&self) -> &str;
}

/// Backend defined by a closure; handy for scripted behaviour in tests.
pub struct FnBackend<F> {
    model_id: String,
    f: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&BackendCall<'_>) -> Result<String, TransportError> + Send + Sync,
{
    pub fn new(model_id: impl Into<String>, f: F) -> Self {
        Self {
            model_id: model_id.into(),
            f,
        }
    }
}

impl<F> TextBackend for FnBackend<F>
where
    F: Fn(&BackendCall<'_>) -> Result<String, TransportError> + Send + Sync,
{
    fn complete(&self, call: &BackendCall<'_>) -> Result<String, TransportError> {
        (self.f)(call)
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }
}

fn str_field<'a>(obj: &'a Value, key: &str) -> Result<&'a str, String> {
    obj.get(key)
        .ok_or_else(|| format!("missing field {key:?}"))?
        .as_str()
        .ok_or_else(|| format!("field {key:?} must be a string"))
}

fn parse_sentence(obj: &Value, letters: &HashSet<&str>) -> Result<DecontextualizedSentence, String> {
    if !obj.is_object() {
        return Err("expected a JSON object".into());
    }
    let letter = str_field(obj, "letter")?.trim();
    if !letters.contains(letter) {
        return Err(format!("letter {letter:?} is not a letter of the article"));
    }
    let text = str_field(obj, "decontextualized")?.trim();
    if text.is_empty() {
        return Err("field \"decontextualized\" is empty".into());
    }
    let category = str_field(obj, "category")?;
    let category = EvidenceType::parse(category).ok_or_else(|| {
        format!("category {category:?} is not one of QUOTE, STATISTIC, DOCUMENT, CONTEXT, OTHER")
    })?;
    Ok(DecontextualizedSentence {
        letter: letter.to_string(),
        decontextualized: text.to_string(),
        category,
    })
}

/// Validates an extracted JSON payload against `schema`.
pub fn validate(schema: &ResponseSchema, value: &Value) -> Result<Parsed, String> {
    match schema {
        ResponseSchema::Decontextualize { letters } => {
            let letters: HashSet<&str> = letters.iter().map(String::as_str).collect();
            parse_sentence(value, &letters).map(Parsed::Decontextualized)
        }
        ResponseSchema::OpenExtract { letters, min_n, max_n } => {
            let letters: HashSet<&str> = letters.iter().map(String::as_str).collect();
            let items = match value {
                Value::Array(items) => items,
                Value::Object(o) => match o.get("premises") {
                    Some(Value::Array(items)) => items,
                    _ => return Err("expected a JSON array of premises".into()),
                },
                _ => return Err("expected a JSON array of premises".into()),
            };
            if items.len() > *max_n {
                return Err(format!("{} premises exceeds the maximum of {max_n}", items.len()));
            }
            if items.len() < *min_n {
                return Err(format!("{} premises is below the minimum of {min_n}", items.len()));
            }
            items
                .iter()
                .enumerate()
                .map(|(i, item)| parse_sentence(item, &letters).map_err(|e| format!("premise {i}: {e}")))
                .collect::<Result<Vec<_>, _>>()
                .map(Parsed::Premises)
        }
        ResponseSchema::Verify { labels } => {
            if !value.is_object() {
                return Err("expected a JSON object".into());
            }
            let verdict = str_field(value, "verdict")?.trim();
            let verdict = labels
                .iter()
                .find(|l| l.eq_ignore_ascii_case(verdict))
                .ok_or_else(|| format!("verdict {verdict:?} is not one of {labels:?}"))?;
            let justification = str_field(value, "justification")?;
            let cited = value
                .get("cited_ids")
                .ok_or("missing field \"cited_ids\"")?
                .as_array()
                .ok_or("field \"cited_ids\" must be a list")?
                .iter()
                .map(|v| v.as_str().map(|s| s.trim().to_string()))
                .collect::<Option<Vec<_>>>()
                .ok_or("field \"cited_ids\" must contain only strings")?;
            Ok(Parsed::Verdict(VerdictResponse {
                verdict: verdict.clone(),
                justification: justification.to_string(),
                cited_ids: cited,
            }))
        }
    }
}

fn corrective_instruction(reason: &str) -> String {
    format!(
        "\n\nYour previous response could not be used: {reason}. \
Respond again with JSON only, exactly matching the required fields."
    )
}

/// Shared, rate-limited entry point to a text backend.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn TextBackend>,
    limiter: Arc<Limiter>,
    max_retries: Option<u32>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn TextBackend>, limiter: Limiter) -> Self {
        Self {
            backend,
            limiter: Arc::new(limiter),
            max_retries: None,
        }
    }

    /// Overrides the retry budget of every request sent through this gateway.
    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = Some(max_retries);
        self
    }

    pub fn unlimited(backend: Arc<dyn TextBackend>) -> Self {
        Self::new(backend, Limiter::unlimited())
    }

    pub fn model_id(&self) -> &str {
        self.backend.model_id()
    }

    /// Returns the first response (within `max_retries + 1` attempts) whose
    /// extracted JSON validates against the request schema.
    pub fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, GatewayError> {
        let started = Instant::now();
        let schema_id = req.schema.id();
        let total = self.max_retries.unwrap_or(req.max_retries) + 1;
        let mut user = req.user_prompt.clone();
        let mut last_raw = String::new();
        let mut last_schema_error: Option<String> = None;
        let mut last_transport_error: Option<String> = None;

        for attempt in 1..=total {
            let call = BackendCall {
                system: &req.system_prompt,
                user: &user,
                schema: schema_id,
                temperature: req.temperature,
                attempt,
            };
            let response = {
                let _permit = self.limiter.acquire();
                self.backend.complete(&call)
            };
            let raw = match response {
                Ok(raw) => raw,
                Err(e) => {
                    log::warn!("{} attempt {attempt}/{total}: transport error: {e}", schema_id.as_str());
                    last_transport_error = Some(e.0);
                    last_schema_error = None;
                    continue;
                }
            };
            last_transport_error = None;
            let outcome = extract_json(&raw)
                .ok_or_else(|| "no JSON object or array found in the response".to_string())
                .and_then(|v| validate(&req.schema, &v));
            match outcome {
                Ok(parsed) => {
                    return Ok(GenerationResult {
                        raw_text: raw,
                        parsed,
                        attempts: attempt,
                        model_id: self.backend.model_id().to_string(),
                        latency_ms: started.elapsed().as_secs_f64() * 1000.0,
                    })
                }
                Err(reason) => {
                    log::debug!("{} attempt {attempt}/{total}: {reason}", schema_id.as_str());
                    user = format!("{}{}", req.user_prompt, corrective_instruction(&reason));
                    last_raw = raw;
                    last_schema_error = Some(reason);
                }
            }
        }
        match (last_transport_error, last_schema_error) {
            (Some(message), _) => Err(GatewayError::TransportFailure {
                attempts: total,
                message,
                last_raw,
            }),
            (None, reason) => Err(GatewayError::SchemaFailure {
                schema: schema_id.as_str(),
                attempts: total,
                reason: reason.unwrap_or_default(),
                last_raw,
            }),
        }
    }
}
