//! Wire client for logprob-capable inference servers.
//!
//! Protocol (JSON bodies, paths relative to the base URL):
//!
//! ```text
//! POST /v1/score    {"prompt", "continuation", "chat"?}
//!   -> {"total_logprob": num | "-inf", "token_logprobs": [num, ...]}
//! POST /v1/generate {"prompt", "n", "method", "temperature", "k"?, "p"?,
//!                    "beam_size"?, "max_new_tokens", "seed", "chat"?}
//!   -> {"candidates": [{"text", "total_logprob", "token_logprobs"}]}
//! POST /v1/metric   {"candidate", "references"}
//!   -> {"score": num}
//! ```
//!
//! `prompt` is always the flattened form; role-aware servers can use the
//! optional `chat` object with separate `system` and `user` fields
//! instead. Transport failures and 5xx responses are retried up to three
//! attempts with exponential backoff starting at 250 ms; HTTP 413 maps to
//! `TokenizationOverflow`; everything else surfaces as
//! `BackendUnavailable`. When a server returns per-token logprobs, the
//! client checks they sum to the reported total within 1e-9.

use super::{Backend, DecodingSpec, Prompt, ScoredText};
use crate::error::{Error, Result};
use crate::metrics::MetricEval;
use crate::model::LogProb;
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Default endpoint, overridable per invocation by the CLI flag.
pub const BACKEND_URL_ENV: &str = "PRAGRANK_BACKEND_URL";

const DEFAULT_ATTEMPTS: u32 = 3;
const DEFAULT_BACKOFF: Duration = Duration::from_millis(250);

#[derive(Debug, Clone)]
pub struct HttpBackend {
    base: String,
    agent: ureq::Agent,
    attempts: u32,
    backoff: Duration,
}

#[derive(Serialize)]
struct ChatParts<'a> {
    system: &'a str,
    user: &'a str,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    prompt: String,
    continuation: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    chat: Option<ChatParts<'a>>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    total_logprob: LogProb,
    #[serde(default)]
    token_logprobs: Vec<f64>,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: String,
    n: usize,
    method: &'a str,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam_size: Option<usize>,
    max_new_tokens: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    chat: Option<ChatParts<'a>>,
}

#[derive(Deserialize)]
struct WireCandidate {
    text: String,
    total_logprob: LogProb,
    #[serde(default)]
    token_logprobs: Vec<f64>,
}

#[derive(Deserialize)]
struct GenerateResponse {
    candidates: Vec<WireCandidate>,
}

fn chat_parts(prompt: &Prompt) -> Option<ChatParts<'_>> {
    prompt.system.as_deref().map(|system| ChatParts {
        system,
        user: &prompt.user,
    })
}

fn check_consistency(total: f64, token_logprobs: &[f64]) -> Result<()> {
    if token_logprobs.is_empty() {
        return Ok(());
    }
    let sum: f64 = token_logprobs.iter().sum();
    let consistent = if total == f64::NEG_INFINITY {
        sum == f64::NEG_INFINITY
    } else {
        (total - sum).abs() <= 1e-9
    };
    if consistent {
        Ok(())
    } else {
        Err(Error::BackendUnavailable(format!(
            "server returned inconsistent logprobs: total {total} vs token sum {sum}"
        )))
    }
}

impl HttpBackend {
    pub fn new(base_url: &str) -> Self {
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            agent: ureq::Agent::new_with_defaults(),
            attempts: DEFAULT_ATTEMPTS,
            backoff: DEFAULT_BACKOFF,
        }
    }

    pub fn from_env() -> Result<Self> {
        match std::env::var(BACKEND_URL_ENV) {
            Ok(url) if !url.trim().is_empty() => Ok(Self::new(&url)),
            _ => Err(Error::invalid(
                "backend",
                format!("http backend requires --backend-url or {BACKEND_URL_ENV}"),
            )),
        }
    }

    /// Override the retry policy (mainly for tests).
    pub fn with_retry(mut self, attempts: u32, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    fn post<T: for<'de> Deserialize<'de>>(&self, path: &str, body: &impl Serialize) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let mut last = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.agent.post(&url).send_json(body) {
                Ok(mut resp) => {
                    return resp.body_mut().read_json::<T>().map_err(|e| {
                        Error::BackendUnavailable(format!("malformed response from {url}: {e}"))
                    });
                }
                Err(ureq::Error::StatusCode(413)) => return Err(Error::TokenizationOverflow),
                Err(ureq::Error::StatusCode(code)) if code < 500 => {
                    return Err(Error::BackendUnavailable(format!(
                        "{url} answered HTTP {code}"
                    )));
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(Error::BackendUnavailable(format!(
            "{url} failed after {} attempts: {last}",
            self.attempts
        )))
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.base)
    }

    fn score(&self, prompt: &Prompt, continuation: &str) -> Result<f64> {
        if continuation.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        let req = ScoreRequest {
            prompt: prompt.flat(),
            continuation,
            chat: chat_parts(prompt),
        };
        let resp: ScoreResponse = self.post("/v1/score", &req)?;
        check_consistency(resp.total_logprob.value(), &resp.token_logprobs)?;
        Ok(resp.total_logprob.value())
    }

    fn generate(&self, prompt: &Prompt, n: usize, spec: &DecodingSpec) -> Result<Vec<ScoredText>> {
        if n == 0 {
            return Err(Error::invalid("generation", "n must be >= 1"));
        }
        spec.validate()?;
        let req = GenerateRequest {
            prompt: prompt.flat(),
            n,
            method: spec.method.name(),
            temperature: spec.temperature,
            k: spec.k,
            p: spec.p,
            beam_size: spec.beam_size,
            max_new_tokens: spec.max_new_tokens,
            seed: spec.seed,
            chat: chat_parts(prompt),
        };
        let resp: GenerateResponse = self.post("/v1/generate", &req)?;
        if resp.candidates.len() != n {
            return Err(Error::BackendUnavailable(format!(
                "requested {n} candidates, server returned {}",
                resp.candidates.len()
            )));
        }
        resp.candidates
            .into_iter()
            .map(|c| {
                check_consistency(c.total_logprob.value(), &c.token_logprobs)?;
                Ok(ScoredText {
                    text: c.text,
                    total_logprob: c.total_logprob.value(),
                    token_logprobs: c.token_logprobs,
                })
            })
            .collect()
    }
}

/// Client for the external-metric endpoint, for learned metrics that
/// cannot run in-process. Implements [`MetricEval`], so it slots into
/// sweeps and evaluation next to the native metrics.
#[derive(Debug, Clone)]
pub struct ExtMetricClient {
    name: String,
    backend: HttpBackend,
}

#[derive(Serialize)]
struct MetricRequest<'a> {
    candidate: &'a str,
    references: Vec<&'a str>,
}

#[derive(Deserialize)]
struct MetricResponse {
    score: f64,
}

impl ExtMetricClient {
    pub fn new(base_url: &str, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            backend: HttpBackend::new(base_url),
        }
    }

    pub fn with_retry(mut self, attempts: u32, backoff: Duration) -> Self {
        self.backend = self.backend.with_retry(attempts, backoff);
        self
    }
}

impl MetricEval for ExtMetricClient {
    fn id(&self) -> String {
        format!("ext:{}", self.name)
    }

    fn eval(&self, candidate: &str, reference: &str) -> Result<f64> {
        let req = MetricRequest {
            candidate,
            references: vec![reference],
        };
        let resp: MetricResponse = self.backend.post("/v1/metric", &req)?;
        if resp.score.is_nan() {
            return Err(Error::BackendUnavailable(
                "metric endpoint returned NaN".to_string(),
            ));
        }
        Ok(resp.score)
    }
}
