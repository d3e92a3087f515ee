//! Generation and scoring backends.
//!
//! A [`Backend`] produces candidate texts from a prompt and computes the
//! exact conditional log-likelihood of a given continuation. Two
//! implementations ship in-repo: [`ToyLm`], a deterministic Laplace-
//! smoothed character-bigram model whose numbers can be checked by hand,
//! and [`HttpBackend`], a wire client for any server speaking the JSON
//! protocol in [`http`].

pub mod http;
pub mod toy;

pub use http::{ExtMetricClient, HttpBackend, BACKEND_URL_ENV};
pub use toy::ToyLm;

use crate::error::{Error, Result};
use crate::prompts::RenderedPrompt;
use crate::prompts::{PromptTemplate, TemplateName};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Decoding method requested from a backend.
///
/// `DiverseBeam` is passed through to wire backends opaquely; the toy
/// model rejects it with `UnsupportedDecoding`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingMethod {
    Greedy,
    Beam,
    Standard,
    TopK,
    Nucleus,
    DiverseBeam,
}

impl DecodingMethod {
    pub fn name(self) -> &'static str {
        match self {
            DecodingMethod::Greedy => "greedy",
            DecodingMethod::Beam => "beam",
            DecodingMethod::Standard => "standard",
            DecodingMethod::TopK => "top_k",
            DecodingMethod::Nucleus => "nucleus",
            DecodingMethod::DiverseBeam => "diverse_beam",
        }
    }
}

impl fmt::Display for DecodingMethod {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecodingMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "greedy" => Ok(DecodingMethod::Greedy),
            "beam" => Ok(DecodingMethod::Beam),
            "standard" | "sample" => Ok(DecodingMethod::Standard),
            "top_k" | "topk" => Ok(DecodingMethod::TopK),
            "nucleus" | "top_p" => Ok(DecodingMethod::Nucleus),
            "diverse_beam" | "dbs" => Ok(DecodingMethod::DiverseBeam),
            other => Err(format!("unknown decoding method {other:?}")),
        }
    }
}

/// Fully-specified decoding configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingSpec {
    pub method: DecodingMethod,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl DecodingSpec {
    pub fn greedy(max_new_tokens: usize) -> Self {
        Self {
            method: DecodingMethod::Greedy,
            temperature: 1.0,
            beam_size: None,
            k: None,
            p: None,
            max_new_tokens,
            seed: 0,
        }
    }

    pub fn beam(beam_size: usize, max_new_tokens: usize) -> Self {
        Self {
            method: DecodingMethod::Beam,
            beam_size: Some(beam_size),
            ..Self::greedy(max_new_tokens)
        }
    }

    pub fn standard(temperature: f64, max_new_tokens: usize, seed: u64) -> Self {
        Self {
            method: DecodingMethod::Standard,
            temperature,
            seed,
            ..Self::greedy(max_new_tokens)
        }
    }

    pub fn top_k(k: usize, temperature: f64, max_new_tokens: usize, seed: u64) -> Self {
        Self {
            method: DecodingMethod::TopK,
            k: Some(k),
            temperature,
            seed,
            ..Self::greedy(max_new_tokens)
        }
    }

    pub fn nucleus(p: f64, temperature: f64, max_new_tokens: usize, seed: u64) -> Self {
        Self {
            method: DecodingMethod::Nucleus,
            p: Some(p),
            temperature,
            seed,
            ..Self::greedy(max_new_tokens)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Parameter presence must match the method exactly.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::invalid("decoding spec", why));
        if self.temperature <= 0.0 || self.temperature.is_nan() || !self.temperature.is_finite() {
            return bad("temperature must be a positive finite number");
        }
        if self.max_new_tokens == 0 {
            return bad("max_new_tokens must be >= 1");
        }
        let (wants_beam, wants_k, wants_p) = match self.method {
            DecodingMethod::Beam | DecodingMethod::DiverseBeam => (true, false, false),
            DecodingMethod::TopK => (false, true, false),
            DecodingMethod::Nucleus => (false, false, true),
            DecodingMethod::Greedy | DecodingMethod::Standard => (false, false, false),
        };
        match (wants_beam, self.beam_size) {
            (true, None) => return bad("this method requires beam_size"),
            (true, Some(0)) => return bad("beam_size must be >= 1"),
            (false, Some(_)) => return bad("beam_size is only valid for beam methods"),
            _ => {}
        }
        match (wants_k, self.k) {
            (true, None) => return bad("top_k requires k"),
            (true, Some(0)) => return bad("k must be >= 1"),
            (false, Some(_)) => return bad("k is only valid for top_k"),
            _ => {}
        }
        match (wants_p, self.p) {
            (true, None) => return bad("nucleus requires p"),
            (true, Some(p)) if !(p > 0.0 && p <= 1.0) => return bad("p must be in (0, 1]"),
            (false, Some(_)) => return bad("p is only valid for nucleus"),
            _ => {}
        }
        Ok(())
    }

    /// Parse the CLI shorthand, e.g. `nucleus,p=0.95,temp=1.5` or
    /// `beam,beam=5`. Seed and max_new_tokens come from their own flags.
    pub fn parse_cli(spec: &str, max_new_tokens: usize, seed: u64) -> Result<Self> {
        let mut parts = spec.split(',').map(str::trim);
        let method: DecodingMethod = parts
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::invalid("decoding spec", "missing method"))?
            .parse()
            .map_err(|e: String| Error::invalid("decoding spec", e))?;
        let mut out = DecodingSpec {
            method,
            temperature: 1.0,
            beam_size: None,
            k: None,
            p: None,
            max_new_tokens,
            seed,
        };
        for part in parts {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::invalid("decoding spec", format!("expected key=value, got {part:?}"))
            })?;
            let parse_f64 = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::invalid("decoding spec", format!("bad number {value:?}")))
            };
            let parse_usize = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::invalid("decoding spec", format!("bad integer {value:?}")))
            };
            match key {
                "temp" | "temperature" => out.temperature = parse_f64()?,
                "p" => out.p = Some(parse_f64()?),
                "k" => out.k = Some(parse_usize()?),
                "beam" | "beam_size" => out.beam_size = Some(parse_usize()?),
                other => {
                    return Err(Error::invalid(
                        "decoding spec",
                        format!("unknown parameter {other:?}"),
                    ))
                }
            }
        }
        out.validate()?;
        Ok(out)
    }
}

/// A generated or scored continuation with its log-likelihood breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredText {
    pub text: String,
    pub total_logprob: f64,
    pub token_logprobs: Vec<f64>,
}

/// Prompt with optional chat roles. Role-less backends consume
/// [`Prompt::flat`]; the wire protocol forwards the parts separately as
/// well.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub system: Option<String>,
    pub user: String,
}

impl Prompt {
    pub fn plain(user: impl Into<String>) -> Self {
        Self {
            system: None,
            user: user.into(),
        }
    }

    pub fn flat(&self) -> String {
        match &self.system {
            Some(system) => format!("{system}\n\n{}", self.user),
            None => self.user.clone(),
        }
    }
}

impl From<RenderedPrompt> for Prompt {
    fn from(r: RenderedPrompt) -> Self {
        Self {
            system: Some(r.system),
            user: r.user,
        }
    }
}

/// Generation and exact conditional scoring.
///
/// Implementations are read-only after construction; concurrent calls are
/// safe, and seeded generation derives all randomness from the decoding spec, so
/// results do not depend on call interleaving.
pub trait Backend: Send + Sync {
    fn id(&self) -> String;

    /// Natural-log P(continuation | prompt). The continuation must be
    /// non-empty; the prompt may be empty.
    fn score(&self, prompt: &Prompt, continuation: &str) -> Result<f64>;

    /// Produce exactly `n` candidates in generation order. Each returned
    /// `total_logprob` is the model's raw conditional log-likelihood of
    /// the emitted text (decoding transforms never leak into scores).
    fn generate(&self, prompt: &Prompt, n: usize, spec: &DecodingSpec) -> Result<Vec<ScoredText>>;
}

/// Question-answer generation: the top beam continuation of the QA prompt
/// for (source, query), with its conditional log-likelihood.
pub fn answer(
    backend: &dyn Backend,
    template: &PromptTemplate,
    source: &str,
    query: &str,
    beam_size: usize,
    max_new_tokens: usize,
) -> Result<ScoredText> {
    debug_assert_eq!(template.name, TemplateName::QuestionAnswer);
    if source.trim().is_empty() {
        return Err(Error::invalid("answer input", "source must be non-empty"));
    }
    if query.trim().is_empty() {
        return Err(Error::invalid("answer input", "query must be non-empty"));
    }
    let rendered = template.render(&[("d", source), ("q", query)])?;
    let spec = DecodingSpec::beam(beam_size, max_new_tokens);
    let mut out = backend.generate(&Prompt::from(rendered), 1, &spec)?;
    out.pop()
        .ok_or_else(|| Error::BackendUnavailable("backend returned no candidates".to_string()))
}
