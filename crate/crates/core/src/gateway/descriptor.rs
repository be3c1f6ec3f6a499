use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{GatewayError, Result};
use crate::vector_store::DEFAULT_DIM;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Generation,
    FillMask,
    Embedding,
}

impl BackendKind {
    pub const ALL: [BackendKind; 3] = [
        BackendKind::Generation,
        BackendKind::FillMask,
        BackendKind::Embedding,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Generation => "generation",
            BackendKind::FillMask => "fill_mask",
            BackendKind::Embedding => "embedding",
        }
    }

    /// Prefix of the environment variables that override this kind's
    /// endpoint and timeout, e.g. `PARC_FILL_MASK`.
    pub fn env_prefix(self) -> String {
        format!("PARC_{}", self.as_str().to_ascii_uppercase())
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeParams {
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            max_new_tokens: default_max_new_tokens(),
            temperature: 0.0,
            stop_sequences: Vec::new(),
        }
    }
}

fn default_max_new_tokens() -> u32 {
    32
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_retries() -> u32 {
    3
}
fn default_retry_backoff_ms() -> u64 {
    200
}
fn default_batch_size() -> usize {
    32
}

/// Where and how to reach one backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    #[serde(default)]
    pub kind: BackendKind,
    /// `http(s)://...` or `mock:<seed>`.
    pub endpoint: String,
    pub model_name: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Retries after the first attempt.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Linear backoff: the n-th retry waits `n * retry_backoff_ms`.
    #[serde(default = "default_retry_backoff_ms")]
    pub retry_backoff_ms: u64,
    #[serde(default)]
    pub decode: DecodeParams,
    /// Expected embedding dimension (embedding backends only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Texts per embedding request.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_requests_per_second: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint<'a> {
    Mock { seed: u64 },
    Http(&'a str),
}

impl BackendDescriptor {
    pub fn new(kind: BackendKind, endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        BackendDescriptor {
            kind,
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            retry_backoff_ms: default_retry_backoff_ms(),
            decode: DecodeParams::default(),
            dim: None,
            batch_size: default_batch_size(),
            max_requests_per_second: None,
        }
    }

    pub fn mock(kind: BackendKind, seed: u64) -> Self {
        Self::new(kind, format!("mock:{seed}"), format!("mock-{kind}"))
    }

    pub fn endpoint(&self) -> Result<Endpoint<'_>> {
        let e = self.endpoint.trim();
        if let Some(seed) = e.strip_prefix("mock:") {
            return seed
                .parse()
                .map(|seed| Endpoint::Mock { seed })
                .map_err(|_| GatewayError::InvalidDescriptor(format!("bad mock seed in {e:?}")));
        }
        if e.starts_with("http://") || e.starts_with("https://") {
            return Ok(Endpoint::Http(e));
        }
        Err(GatewayError::InvalidDescriptor(format!(
            "endpoint {e:?} is neither http(s) nor mock:<seed>"
        )))
    }

    pub fn is_mock(&self) -> bool {
        matches!(self.endpoint(), Ok(Endpoint::Mock { .. }))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn embedding_dim(&self) -> usize {
        self.dim.unwrap_or(DEFAULT_DIM)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(GatewayError::InvalidDescriptor(m));
        self.endpoint()?;
        if self.model_name.trim().is_empty() {
            return invalid("empty model_name".into());
        }
        if self.timeout_ms == 0 {
            return invalid("timeout_ms must be positive".into());
        }
        if !(self.decode.temperature >= 0.0 && self.decode.temperature.is_finite()) {
            return invalid(format!("temperature {} must be >= 0", self.decode.temperature));
        }
        if self.decode.max_new_tokens == 0 {
            return invalid("max_new_tokens must be positive".into());
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be positive".into());
        }
        if self.dim == Some(0) {
            return invalid("dim must be positive".into());
        }
        if let Some(rps) = self.max_requests_per_second {
            if !(rps > 0.0 && rps.is_finite()) {
                return invalid(format!("max_requests_per_second {rps} must be positive"));
            }
        }
        Ok(())
    }

    /// Applies `PARC_<KIND>_ENDPOINT` and `PARC_<KIND>_TIMEOUT_MS`.
    pub fn apply_env_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        let prefix = self.kind.env_prefix();
        if let Some(endpoint) = lookup(&format!("{prefix}_ENDPOINT")) {
            self.endpoint = endpoint;
        }
        let key = format!("{prefix}_TIMEOUT_MS");
        if let Some(timeout) = lookup(&key) {
            self.timeout_ms = timeout
                .trim()
                .parse()
                .map_err(|_| GatewayError::InvalidDescriptor(format!("{key}={timeout:?} is not an integer")))?;
        }
        Ok(())
    }
}
