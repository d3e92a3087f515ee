//! Backend-agnostic engine and experiment harness for pragmatically
//! re-ranking candidate query-focused summaries.
//!
//! A literal summarizer proposes a pool of candidate summaries with their
//! conditional log-likelihoods; a modeled reader scores each candidate by
//! how well a reconstruction target (the query's answer, the source
//! document, or an arbitrary latent string) can be regenerated from it; a
//! rationality parameter λ interpolates the two signals and the best
//! candidate wins. The harness sweeps λ (and the answer/source mix α)
//! over a grid, evaluates selections with native ROUGE and METEOR-lite
//! metrics, and emits comparison tables and tradeoff curves.
//!
//! Module map:
//!
//! - [`model`] — shared domain types and their JSONL forms
//! - [`backend`] — generation/scoring backends: deterministic toy bigram
//!   LM and an HTTP wire client
//! - [`prompts`] — the prompt templates and placeholder substitution
//! - [`scoring`] — score combiners and candidate selection
//! - [`metrics`] — ROUGE-1/2/L and METEOR-lite with multi-reference max
//! - [`dataset`] — JSONL ingestion, truncation, statistics, fixtures
//! - [`experiments`] — grid sweeps, aggregate tables, tradeoff curves
//! - [`pipeline`] — the file-to-file stages behind the CLI

pub mod backend;
pub mod concurrent;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod prompts;
pub mod rng;
pub mod scoring;

pub use error::{Error, Result};
