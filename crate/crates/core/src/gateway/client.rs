use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::mock::MockTransport;
use super::protocol::{BackendRequest, BackendResponse, RequestParams, ResponseStatus};
use super::transport::{HttpTransport, Transport, TransportFailure};
use super::{BackendDescriptor, BackendKind, Endpoint, GatewayError, Result};
use crate::vector_store::EmbeddingVector;

/// A candidate word and its backend score; `None` when the backend could
/// not score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub word: String,
    pub score: Option<f64>,
}

impl CandidateScore {
    /// The score, with unscorable candidates at negative infinity.
    pub fn value(&self) -> f64 {
        self.score.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_flagged(&self) -> bool {
        self.score.is_none()
    }
}

/// The first candidate with the highest score, ignoring flagged ones.
pub fn best_candidate(scores: &[CandidateScore]) -> Option<&CandidateScore> {
    let mut best: Option<&CandidateScore> = None;
    for c in scores.iter().filter(|c| !c.is_flagged()) {
        if best.map_or(true, |b| c.value() > b.value()) {
            best = Some(c);
        }
    }
    best
}

struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    fn new(per_second: f64) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / per_second),
            next: Mutex::new(Instant::now()),
        }
    }

    fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// A shareable handle on one backend. Retries transient failures, trims
/// stop sequences and checks response shapes.
#[derive(Clone)]
pub struct Gateway {
    descriptor: BackendDescriptor,
    transport: Arc<dyn Transport>,
    limiter: Option<Arc<RateLimiter>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("descriptor", &self.descriptor)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// Builds the transport named by the descriptor's endpoint.
    pub fn connect(descriptor: BackendDescriptor) -> Result<Self> {
        descriptor.validate()?;
        let transport: Arc<dyn Transport> = match descriptor.endpoint()? {
            Endpoint::Mock { seed } => Arc::new(MockTransport::new(seed, descriptor.embedding_dim())),
            Endpoint::Http(url) => Arc::new(HttpTransport::new(url, descriptor.timeout())),
        };
        Ok(Self::with_transport(descriptor, transport))
    }

    pub fn with_transport(descriptor: BackendDescriptor, transport: Arc<dyn Transport>) -> Self {
        let limiter = descriptor
            .max_requests_per_second
            .map(|rps| Arc::new(RateLimiter::new(rps)));
        Gateway {
            descriptor,
            transport,
            limiter,
        }
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn expect_kind(&self, expected: BackendKind) -> Result<()> {
        if self.descriptor.kind != expected {
            return Err(GatewayError::WrongKind {
                expected,
                actual: self.descriptor.kind,
            });
        }
        Ok(())
    }

    fn request(&self, inputs: Vec<String>, params: RequestParams) -> BackendRequest {
        BackendRequest {
            model: self.descriptor.model_name.clone(),
            kind: self.descriptor.kind,
            inputs,
            params,
        }
    }

    /// Sends with up to `max_retries` retries on transient failures.
    pub fn call(&self, request: &BackendRequest) -> Result<BackendResponse> {
        let attempts = self.descriptor.max_retries.saturating_add(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            let failure = match self.transport.send(request) {
                Ok(r) if r.status == ResponseStatus::Error => {
                    return Err(GatewayError::BackendRejection {
                        status: None,
                        message: r.error.unwrap_or_else(|| "unspecified error".into()),
                    });
                }
                Ok(r) => return Ok(r),
                Err(f) => f,
            };
            if failure.is_transient() && attempt < attempts {
                tracing::debug!(attempt, %failure, model = %self.descriptor.model_name, "retrying");
                std::thread::sleep(Duration::from_millis(
                    self.descriptor.retry_backoff_ms.saturating_mul(attempt as u64),
                ));
                continue;
            }
            return Err(match failure {
                TransportFailure::Timeout => GatewayError::Timeout { attempts: attempt },
                TransportFailure::Status { code, body } if !failure_is_transient(code) => {
                    GatewayError::BackendRejection {
                        status: Some(code),
                        message: body,
                    }
                }
                TransportFailure::Malformed(m) => GatewayError::MalformedResponse(m),
                other => GatewayError::Transport {
                    attempts: attempt,
                    detail: other.to_string(),
                },
            });
        }
    }

    /// Decoded continuation of `prompt`, cut at the earliest stop sequence.
    pub fn generate(&self, prompt: &str) -> Result<String> {
        self.expect_kind(BackendKind::Generation)?;
        let decode = &self.descriptor.decode;
        let request = self.request(
            vec![prompt.to_string()],
            RequestParams {
                max_new_tokens: Some(decode.max_new_tokens),
                temperature: Some(decode.temperature),
                stop: decode.stop_sequences.clone(),
                ..Default::default()
            },
        );
        let mut outputs = self.call(&request)?.outputs;
        if outputs.len() != 1 {
            return Err(GatewayError::MalformedResponse(format!(
                "expected 1 output, got {}",
                outputs.len()
            )));
        }
        let mut text = outputs.pop().expect("one output");
        if let Some(cut) = decode
            .stop_sequences
            .iter()
            .filter(|s| !s.is_empty())
            .filter_map(|s| text.find(s.as_str()))
            .min()
        {
            text.truncate(cut);
        }
        Ok(text)
    }

    /// Scores every candidate for the single mask marker in `prompt`.
    pub fn fill_mask(
        &self,
        prompt: &str,
        mask_token: &str,
        candidates: &[String],
    ) -> Result<Vec<CandidateScore>> {
        self.expect_kind(BackendKind::FillMask)?;
        let found = if mask_token.is_empty() {
            0
        } else {
            prompt.matches(mask_token).count()
        };
        if found != 1 {
            return Err(GatewayError::NoMaskMarker {
                mask_token: mask_token.to_string(),
                found,
            });
        }
        if candidates.is_empty() {
            return Err(GatewayError::EmptyCandidates);
        }
        let request = self.request(
            vec![prompt.to_string()],
            RequestParams {
                mask_token: Some(mask_token.to_string()),
                candidates: candidates.to_vec(),
                ..Default::default()
            },
        );
        let rows = self
            .call(&request)?
            .scores
            .ok_or_else(|| GatewayError::MalformedResponse("missing scores".into()))?;
        let [row] = <[_; 1]>::try_from(rows).map_err(|rows: Vec<_>| {
            GatewayError::MalformedResponse(format!("expected 1 score row, got {}", rows.len()))
        })?;
        if row.len() != candidates.len() {
            return Err(GatewayError::MalformedResponse(format!(
                "{} scores for {} candidates",
                row.len(),
                candidates.len()
            )));
        }
        Ok(candidates
            .iter()
            .zip(row)
            .map(|(word, score)| {
                let score = score.filter(|s| s.is_finite());
                if score.is_none() {
                    tracing::warn!(candidate = %word, "backend could not score candidate");
                }
                CandidateScore {
                    word: word.clone(),
                    score,
                }
            })
            .collect())
    }

    /// One vector per text, in input order, sent in groups of `batch_size`.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        self.expect_kind(BackendKind::Embedding)?;
        if texts.is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let dim = self.descriptor.embedding_dim();
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.descriptor.batch_size.max(1)) {
            let request = self.request(chunk.to_vec(), RequestParams::default());
            let vectors = self
                .call(&request)?
                .vectors
                .ok_or_else(|| GatewayError::MalformedResponse("missing vectors".into()))?;
            if vectors.len() != chunk.len() {
                return Err(GatewayError::MalformedResponse(format!(
                    "{} vectors for {} texts",
                    vectors.len(),
                    chunk.len()
                )));
            }
            for v in vectors {
                if v.len() != dim {
                    return Err(GatewayError::DimensionMismatch {
                        expected: dim,
                        found: v.len(),
                    });
                }
                out.push(EmbeddingVector::new(v)?);
            }
        }
        Ok(out)
    }
}

fn failure_is_transient(code: u16) -> bool {
    TransportFailure::Status {
        code,
        body: String::new(),
    }
    .is_transient()
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicU32, Ordering};

    use super::*;

    struct Flaky {
        fail_first: u32,
        failure: TransportFailure,
        calls: AtomicU32,
        reply: BackendResponse,
    }

    impl Transport for Flaky {
        fn send(&self, _: &BackendRequest) -> std::result::Result<BackendResponse, TransportFailure> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(self.failure.clone())
            } else {
                Ok(self.reply.clone())
            }
        }
    }

    fn flaky(kind: BackendKind, retries: u32, fail_first: u32, failure: TransportFailure, reply: BackendResponse) -> (Gateway, Arc<Flaky>) {
        let mut d = BackendDescriptor::mock(kind, 0);
        d.max_retries = retries;
        d.retry_backoff_ms = 0;
        let t = Arc::new(Flaky {
            fail_first,
            failure,
            calls: AtomicU32::new(0),
            reply,
        });
        (Gateway::with_transport(d, t.clone()), t)
    }

    fn ok_text(s: &str) -> BackendResponse {
        BackendResponse::outputs(vec![s.into()])
    }

    #[test]
    fn retries_then_succeeds() {
        let down = TransportFailure::Unreachable("refused".into());
        let (g, t) = flaky(BackendKind::Generation, 3, 2, down.clone(), ok_text("slightly aggressive"));
        assert_eq!(g.generate("p").unwrap(), "slightly aggressive");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);

        let (g, t) = flaky(BackendKind::Generation, 1, 2, down, ok_text("x"));
        match g.generate("p") {
            Err(GatewayError::Transport { attempts: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(t.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn timeouts_and_rejections() {
        let (g, _) = flaky(BackendKind::Generation, 2, 9, TransportFailure::Timeout, ok_text("x"));
        assert!(matches!(g.generate("p"), Err(GatewayError::Timeout { attempts: 3 })));

        let bad = TransportFailure::Status { code: 400, body: "bad".into() };
        let (g, t) = flaky(BackendKind::Generation, 5, 9, bad, ok_text("x"));
        assert!(matches!(
            g.generate("p"),
            Err(GatewayError::BackendRejection { status: Some(400), .. })
        ));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);

        let (g, _) = flaky(BackendKind::Generation, 0, 0, TransportFailure::Timeout, BackendResponse::error("no"));
        assert!(matches!(g.generate("p"), Err(GatewayError::BackendRejection { status: None, .. })));
    }

    #[test]
    fn stop_sequences_trim_at_earliest() {
        let mut d = BackendDescriptor::mock(BackendKind::Generation, 0);
        d.decode.stop_sequences = vec!["\n".into(), ".".into()];
        let t = Arc::new(Flaky {
            fail_first: 0,
            failure: TransportFailure::Timeout,
            calls: AtomicU32::new(0),
            reply: ok_text("mild. aggression\nmore"),
        });
        let g = Gateway::with_transport(d, t);
        assert_eq!(g.generate("p").unwrap(), "mild");
    }

    #[test]
    fn wrong_kind() {
        let g = Gateway::connect(BackendDescriptor::mock(BackendKind::Embedding, 0)).unwrap();
        assert!(matches!(g.generate("p"), Err(GatewayError::WrongKind { .. })));
    }

    #[test]
    fn fill_mask_contract() {
        let g = Gateway::connect(BackendDescriptor::mock(BackendKind::FillMask, 4)).unwrap();
        let words: Vec<String> = ["assaultive", "indirect", "peaceful"].map(String::from).to_vec();
        let scores = g.fill_mask("The theme in x is [MASK].", "[MASK]", &words).unwrap();
        assert_eq!(scores.len(), 3);
        assert!(scores.iter().all(|s| s.value().is_finite()));
        let one = g.fill_mask("x [MASK]", "[MASK]", &words[..1]).unwrap();
        assert_eq!(best_candidate(&one).unwrap().word, "assaultive");
        assert!(matches!(
            g.fill_mask("no marker", "[MASK]", &words),
            Err(GatewayError::NoMaskMarker { found: 0, .. })
        ));
        assert!(matches!(
            g.fill_mask("[MASK] [MASK]", "[MASK]", &words),
            Err(GatewayError::NoMaskMarker { found: 2, .. })
        ));
        assert!(matches!(g.fill_mask("[MASK]", "[MASK]", &[]), Err(GatewayError::EmptyCandidates)));
    }

    #[test]
    fn unscorable_candidate_is_flagged() {
        let (g, _) = flaky(
            BackendKind::FillMask,
            0,
            0,
            TransportFailure::Timeout,
            BackendResponse::scores(vec![vec![Some(-3.0), None]]),
        );
        let s = g.fill_mask("[MASK]", "[MASK]", &["a".into(), "b".into()]).unwrap();
        assert!(s[1].is_flagged());
        assert_eq!(s[1].value(), f64::NEG_INFINITY);
        assert_eq!(best_candidate(&s).unwrap().word, "a");
    }

    #[test]
    fn argmax_ignores_positive_rescaling() {
        let scores = |xs: &[f64]| -> Vec<CandidateScore> {
            xs.iter()
                .enumerate()
                .map(|(i, x)| CandidateScore { word: i.to_string(), score: Some(*x) })
                .collect()
        };
        let raw = [-2.5, -0.1, -7.0, -0.1];
        for c in [1e-6, 0.3, 1.0, 42.0, 1e6] {
            let scaled: Vec<f64> = raw.iter().map(|x| x * c).collect();
            assert_eq!(best_candidate(&scores(&scaled)).unwrap().word, "1");
        }
    }

    #[test]
    fn embed_contract() {
        let mut d = BackendDescriptor::mock(BackendKind::Embedding, 2);
        d.batch_size = 2;
        let g = Gateway::connect(d).unwrap();
        let texts: Vec<String> = ["a b", "c", "a b"].map(String::from).to_vec();
        let v = g.embed(&texts).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|e| e.dim() == 768));
        assert_eq!(v[0], v[2]);
        assert!(matches!(g.embed(&[]), Err(GatewayError::EmptyInput)));

        let (g, _) = flaky(
            BackendKind::Embedding,
            0,
            0,
            TransportFailure::Timeout,
            BackendResponse::vectors(vec![vec![1.0; 512]]),
        );
        assert!(matches!(
            g.embed(&["x".into()]),
            Err(GatewayError::DimensionMismatch { expected: 768, found: 512 })
        ));
    }

    #[test]
    fn rate_limit_spaces_requests() {
        let mut d = BackendDescriptor::mock(BackendKind::Generation, 0);
        d.max_requests_per_second = Some(50.0);
        let g = Gateway::connect(d).unwrap();
        let start = Instant::now();
        for _ in 0..4 {
            g.generate("a b c").unwrap();
        }
        assert!(start.elapsed() >= Duration::from_millis(55));
    }
}
