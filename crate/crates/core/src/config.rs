//! Plain-text `key = value` pipeline configuration.
//!
//! Every key has a default; a config file and then explicit overrides are
//! layered on top. Secrets are never read from here: backends only receive
//! the *name* of the environment variable that holds a token.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::gateway::{Limiter, RemoteConfig};
use crate::retrieval::{Bm25Params, MetricCutoffs};
use crate::verification::LabelSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Invalid { key: String, value: String, reason: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// `(key, default, part of the config digest)`. Paths, parallelism and
/// credentials do not change results, so they stay out of the digest.
const KEYS: &[(&str, &str, bool)] = &[
    ("corpus_dir", ".", false),
    ("output_dir", "out", false),
    ("workers", "0", false),
    ("seed", "0", true),
    ("ingest.leak_patterns", "", true),
    ("ingest.abbreviations", "", true),
    ("extract.max_failure_rate", "0.5", true),
    ("generation.backend", "none", true),
    ("generation.base_url", "", true),
    ("generation.model", "", true),
    ("generation.timeout_ms", "60000", false),
    ("generation.auth_env", "", false),
    ("generation.max_inflight", "4", false),
    ("generation.rate_per_s", "0", false),
    ("generation.max_retries", "2", true),
    ("generation.stub_verdict", "", true),
    ("entailment.backend", "lexical", true),
    ("entailment.constant", "0.5", true),
    ("entailment.url", "", true),
    ("entailment.timeout_ms", "60000", false),
    ("entailment.auth_env", "", false),
    ("entailment.batch_size", "32", true),
    ("entailment.max_retries", "2", true),
    ("entailment.max_inflight", "4", false),
    ("retrieval.k1", "1.5", true),
    ("retrieval.b", "0.75", true),
    ("retrieval.mrr", "10", true),
    ("retrieval.ndcg", "3,10", true),
    ("retrieval.recall", "1,3,10", true),
    ("verification.labels", "binary", true),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    values: BTreeMap<String, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationBackendKind {
    None,
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntailmentBackendKind {
    Constant,
    Lexical,
    Remote,
}

impl PipelineConfig {
    pub fn keys() -> impl Iterator<Item = &'static str> {
        KEYS.iter().map(|(k, _, _)| *k)
    }

    /// Defaults overlaid with the `key = value` lines of `text`. Blank lines
    /// and `#` comments are ignored; later lines win.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(ConfigError::UnknownKey(key.to_string())),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: assignment.to_string(),
        })?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn opt(&self, key: &str) -> Option<&str> {
        Some(self.get(key)).filter(|v| !v.is_empty())
    }

    fn parse_num<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(key);
        v.parse().map_err(|e: T::Err| invalid(key, v, e.to_string()))
    }

    fn parse_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        let v = self.get(key);
        let list = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|e| invalid(key, v, e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if list.contains(&0) {
            return Err(invalid(key, v, "cutoffs must be at least 1"));
        }
        Ok(list)
    }

    pub fn corpus_dir(&self) -> PathBuf {
        PathBuf::from(self.get("corpus_dir"))
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output_dir"))
    }

    pub fn workers(&self) -> Result<usize, ConfigError> {
        self.parse_num("workers")
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.parse_num("seed")
    }

    pub fn leak_patterns_path(&self) -> Option<PathBuf> {
        self.opt("ingest.leak_patterns").map(PathBuf::from)
    }

    pub fn abbreviations_path(&self) -> Option<PathBuf> {
        self.opt("ingest.abbreviations").map(PathBuf::from)
    }

    pub fn max_failure_rate(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.parse_num("extract.max_failure_rate")?;
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid("extract.max_failure_rate", self.get("extract.max_failure_rate"), "must be in [0, 1]"));
        }
        Ok(v)
    }

    pub fn generation_backend(&self) -> Result<GenerationBackendKind, ConfigError> {
        match self.get("generation.backend") {
            "none" | "" => Ok(GenerationBackendKind::None),
            "stub" => Ok(GenerationBackendKind::Stub),
            "remote" => Ok(GenerationBackendKind::Remote),
            other => Err(invalid("generation.backend", other, "expected none, stub or remote")),
        }
    }

    pub fn generation_max_retries(&self) -> Result<u32, ConfigError> {
        self.parse_num("generation.max_retries")
    }

    pub fn stub_verdict(&self) -> Option<&str> {
        self.opt("generation.stub_verdict")
    }

    pub fn generation_limiter(&self) -> Result<Limiter, ConfigError> {
        Ok(Limiter::new(
            self.parse_num("generation.max_inflight")?,
            self.parse_num("generation.rate_per_s")?,
        ))
    }

    pub fn remote_generation(&self) -> Result<RemoteConfig, ConfigError> {
        let base_url = self.get("generation.base_url");
        if base_url.is_empty() {
            return Err(invalid("generation.base_url", "", "required for the remote backend"));
        }
        let model = self.get("generation.model");
        if model.is_empty() {
            return Err(invalid("generation.model", "", "required for the remote backend"));
        }
        Ok(RemoteConfig {
            base_url: base_url.to_string(),
            model_id: model.to_string(),
            timeout_ms: self.parse_num("generation.timeout_ms")?,
            auth_env: self.opt("generation.auth_env").map(String::from),
            seed: Some(self.seed()?),
        })
    }

    pub fn entailment_backend(&self) -> Result<EntailmentBackendKind, ConfigError> {
        match self.get("entailment.backend") {
            "constant" => Ok(EntailmentBackendKind::Constant),
            "lexical" => Ok(EntailmentBackendKind::Lexical),
            "remote" => Ok(EntailmentBackendKind::Remote),
            other => Err(invalid("entailment.backend", other, "expected constant, lexical or remote")),
        }
    }

    pub fn entailment_constant(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.parse_num("entailment.constant")?;
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid("entailment.constant", self.get("entailment.constant"), "must be in [0, 1]"));
        }
        Ok(v)
    }

    pub fn entailment_remote(&self) -> Result<crate::faithfulness::RemoteScorerConfig, ConfigError> {
        let url = self.get("entailment.url");
        if url.is_empty() {
            return Err(invalid("entailment.url", "", "required for the remote backend"));
        }
        Ok(crate::faithfulness::RemoteScorerConfig {
            url: url.to_string(),
            timeout_ms: self.parse_num("entailment.timeout_ms")?,
            auth_env: self.opt("entailment.auth_env").map(String::from),
            max_retries: self.parse_num("entailment.max_retries")?,
        })
    }

    pub fn entailment_batch_size(&self) -> Result<usize, ConfigError> {
        let v: usize = self.parse_num("entailment.batch_size")?;
        if v == 0 {
            return Err(invalid("entailment.batch_size", "0", "must be at least 1"));
        }
        Ok(v)
    }

    pub fn entailment_limiter(&self) -> Result<Limiter, ConfigError> {
        Ok(Limiter::new(self.parse_num("entailment.max_inflight")?, 0.0))
    }

    pub fn bm25(&self) -> Result<Bm25Params, ConfigError> {
        let k1: f64 = self.parse_num("retrieval.k1")?;
        let b: f64 = self.parse_num("retrieval.b")?;
        if !(k1 > 0.0) {
            return Err(invalid("retrieval.k1", self.get("retrieval.k1"), "must be positive"));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(invalid("retrieval.b", self.get("retrieval.b"), "must be in [0, 1]"));
        }
        Ok(Bm25Params { k1, b })
    }

    pub fn cutoffs(&self) -> Result<MetricCutoffs, ConfigError> {
        Ok(MetricCutoffs {
            mrr: self.parse_list("retrieval.mrr")?,
            ndcg: self.parse_list("retrieval.ndcg")?,
            recall: self.parse_list("retrieval.recall")?,
        })
    }

    pub fn labels(&self) -> Result<LabelSet, ConfigError> {
        let v = self.get("verification.labels");
        v.parse().map_err(|e: String| invalid("verification.labels", v, e))
    }

    /// Checks every typed accessor once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workers()?;
        self.seed()?;
        self.max_failure_rate()?;
        self.generation_backend()?;
        self.generation_max_retries()?;
        self.generation_limiter()?;
        if self.generation_backend()? == GenerationBackendKind::Remote {
            self.remote_generation()?;
        }
        let kind = self.entailment_backend()?;
        self.entailment_constant()?;
        self.entailment_batch_size()?;
        self.entailment_limiter()?;
        if kind == EntailmentBackendKind::Remote {
            self.entailment_remote()?;
        }
        self.bm25()?;
        self.cutoffs()?;
        self.labels()?;
        Ok(())
    }

    /// The resolved configuration, one `key=value` per line in key order.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 over the result-relevant keys. Referenced pattern files
    /// contribute their contents, not their paths, so identical files give
    /// identical digests on any machine.
    pub fn digest(&self) -> Result<String, ConfigError> {
        let mut hasher = Sha256::new();
        for (key, _, in_digest) in KEYS {
            if !in_digest {
                continue;
            }
            let value = self.get(key);
            let value = if matches!(*key, "ingest.leak_patterns" | "ingest.abbreviations") && !value.is_empty() {
                let bytes = std::fs::read(value).map_err(|e| ConfigError::Io {
                    path: value.to_string(),
                    message: e.to_string(),
                })?;
                format!("sha256:{}", hex::encode(Sha256::digest(&bytes)))
            } else {
                value.to_string()
            };
            hasher.update(format!("{key}={value}\n").as_bytes());
        }
        Ok(hex::encode(hasher.finalize()))
    }
}
