use std::time::Duration;

use super::protocol::{decode_response, BackendRequest, BackendResponse};

/// Why a single attempt failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    /// Connection refused, DNS failure, reset mid-body and similar.
    Unreachable(String),
    Timeout,
    /// Non-2xx HTTP status.
    Status { code: u16, body: String },
    /// 2xx with a body that is not a valid response document.
    Malformed(String),
}

impl TransportFailure {
    /// Worth another attempt: network trouble, timeouts, 408, 429 and 5xx.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportFailure::Unreachable(_) | TransportFailure::Timeout => true,
            TransportFailure::Status { code, .. } => matches!(code, 408 | 429 | 500..=599),
            TransportFailure::Malformed(_) => false,
        }
    }
}

impl std::fmt::Display for TransportFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportFailure::Unreachable(m) => write!(f, "unreachable: {m}"),
            TransportFailure::Timeout => f.write_str("timed out"),
            TransportFailure::Status { code, body } => write!(f, "HTTP {code}: {body}"),
            TransportFailure::Malformed(m) => write!(f, "malformed response: {m}"),
        }
    }
}

/// One request/response exchange, no retries.
pub trait Transport: Send + Sync {
    fn send(&self, request: &BackendRequest) -> Result<BackendResponse, TransportFailure>;
}

/// JSON over HTTP POST.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            agent,
            url: url.into(),
        }
    }
}

fn classify(err: ureq::Error) -> TransportFailure {
    match err {
        ureq::Error::Timeout(_) => TransportFailure::Timeout,
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => TransportFailure::Timeout,
        other => TransportFailure::Unreachable(other.to_string()),
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &BackendRequest) -> Result<BackendResponse, TransportFailure> {
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(request)
            .map_err(classify)?;
        let code = response.status().as_u16();
        let body = response.body_mut().read_to_vec().map_err(classify)?;
        if !(200..300).contains(&code) {
            return Err(TransportFailure::Status {
                code,
                body: String::from_utf8_lossy(&body).chars().take(512).collect(),
            });
        }
        decode_response(&body).map_err(|e| TransportFailure::Malformed(e.to_string()))
    }
}
