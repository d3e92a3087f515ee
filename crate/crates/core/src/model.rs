//! Domain types flowing through the pipeline: instances, candidate pools,
//! selector configurations, and selections.
//!
//! All types are immutable after construction and safe to share across
//! threads; pipeline stages produce new records instead of mutating.
//!
//! Log-scores are natural-log conditional likelihoods, summed over tokens
//! and deliberately not length-normalized. Zero-probability continuations
//! are representable as negative infinity and serialize as the quoted
//! string `"-inf"`; finite values serialize as plain JSON numbers with
//! exact round-trip.

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// A validated log-probability: finite and <= 0, or negative infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProb(f64);

impl LogProb {
    pub const NEG_INF: LogProb = LogProb(f64::NEG_INFINITY);

    pub fn new(value: f64) -> Result<Self, String> {
        if value.is_nan() {
            Err("log-probability must not be NaN".to_string())
        } else if value > 0.0 {
            Err(format!("log-probability {value} above zero"))
        } else {
            Ok(Self(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_impossible(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl From<LogProb> for f64 {
    fn from(lp: LogProb) -> f64 {
        lp.0
    }
}

impl Serialize for LogProb {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::NEG_INFINITY {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

struct LogProbVisitor;

impl Visitor<'_> for LogProbVisitor {
    type Value = LogProb;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number <= 0 or the string \"-inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<LogProb, E> {
        LogProb::new(v).map_err(de::Error::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<LogProb, E> {
        self.visit_f64(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<LogProb, E> {
        self.visit_f64(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<LogProb, E> {
        if v == "-inf" {
            Ok(LogProb::NEG_INF)
        } else {
            Err(de::Error::custom(format!(
                "expected \"-inf\" or a number, got {v:?}"
            )))
        }
    }
}

impl<'de> Deserialize<'de> for LogProb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(LogProbVisitor)
    }
}

/// One (source document, query, references) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub source: String,
    pub query: String,
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<String>,
    /// Unknown input fields, preserved on round-trip.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        query: impl Into<String>,
        references: Vec<String>,
    ) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            query: query.into(),
            references,
            gold_answer: None,
            latent: None,
            extra: serde_json::Map::new(),
        }
    }

    /// Returns the offending field name on failure.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id".to_string());
        }
        if self.source.trim().is_empty() {
            return Err("source".to_string());
        }
        if self.query.trim().is_empty() {
            return Err("query".to_string());
        }
        if self.references.is_empty() || self.references.iter().any(|r| r.is_empty()) {
            return Err("references".to_string());
        }
        Ok(())
    }
}

/// One candidate summary with its per-objective log-scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logp_s0: Option<LogProb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logp_answer_rec: Option<LogProb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logp_source_rec: Option<LogProb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logp_latent_rec: Option<LogProb>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Candidate {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            logp_s0: None,
            logp_answer_rec: None,
            logp_source_rec: None,
            logp_latent_rec: None,
            extra: serde_json::Map::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.text.is_empty() {
            return Err("text".to_string());
        }
        Ok(())
    }
}

/// Ordered candidates for one instance; order is generation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub instance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub candidates: Vec<Candidate>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl CandidatePool {
    pub fn new(instance_id: impl Into<String>, candidates: Vec<Candidate>) -> Self {
        Self {
            instance_id: instance_id.into(),
            answer: None,
            candidates,
            extra: serde_json::Map::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.instance_id.trim().is_empty() {
            return Err("instance_id".to_string());
        }
        if self.candidates.is_empty() {
            return Err("candidates".to_string());
        }
        for c in &self.candidates {
            c.validate()?;
        }
        Ok(())
    }
}

/// Selection rule applied to a candidate pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorRule {
    AnswerRec,
    SourceRec,
    AnsSrcRec,
    LatentRec,
    Random,
    Oracle,
}

impl SelectorRule {
    pub const ALL: [SelectorRule; 6] = [
        SelectorRule::AnswerRec,
        SelectorRule::SourceRec,
        SelectorRule::AnsSrcRec,
        SelectorRule::LatentRec,
        SelectorRule::Random,
        SelectorRule::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectorRule::AnswerRec => "answer_rec",
            SelectorRule::SourceRec => "source_rec",
            SelectorRule::AnsSrcRec => "ans_src_rec",
            SelectorRule::LatentRec => "latent_rec",
            SelectorRule::Random => "random",
            SelectorRule::Oracle => "oracle",
        }
    }
}

impl fmt::Display for SelectorRule {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectorRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "answer_rec" => Ok(SelectorRule::AnswerRec),
            "source_rec" => Ok(SelectorRule::SourceRec),
            "ans_src_rec" => Ok(SelectorRule::AnsSrcRec),
            "latent_rec" => Ok(SelectorRule::LatentRec),
            "random" => Ok(SelectorRule::Random),
            "oracle" => Ok(SelectorRule::Oracle),
            other => Err(format!("unknown selector rule {other:?}")),
        }
    }
}

/// Full selector configuration: rule plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub rule: SelectorRule,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_metric: Option<String>,
}

impl SelectorConfig {
    pub fn answer_rec(lambda: f64) -> Self {
        Self {
            rule: SelectorRule::AnswerRec,
            lambda,
            alpha: None,
            seed: None,
            oracle_metric: None,
        }
    }

    pub fn source_rec(lambda: f64) -> Self {
        Self {
            rule: SelectorRule::SourceRec,
            ..Self::answer_rec(lambda)
        }
    }

    pub fn ans_src_rec(lambda: f64, alpha: f64) -> Self {
        Self {
            rule: SelectorRule::AnsSrcRec,
            alpha: Some(alpha),
            ..Self::answer_rec(lambda)
        }
    }

    pub fn latent_rec(lambda: f64) -> Self {
        Self {
            rule: SelectorRule::LatentRec,
            ..Self::answer_rec(lambda)
        }
    }

    pub fn random(seed: u64) -> Self {
        Self {
            rule: SelectorRule::Random,
            seed: Some(seed),
            ..Self::answer_rec(0.0)
        }
    }

    pub fn oracle(metric: impl Into<String>) -> Self {
        Self {
            rule: SelectorRule::Oracle,
            oracle_metric: Some(metric.into()),
            ..Self::answer_rec(0.0)
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) || self.lambda.is_nan() {
            return Err(crate::Error::LambdaOutOfRange(self.lambda));
        }
        match self.rule {
            SelectorRule::AnsSrcRec => {
                let alpha = self.alpha.ok_or_else(|| {
                    crate::Error::invalid("selector", "ans_src_rec requires alpha")
                })?;
                if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
                    return Err(crate::Error::AlphaOutOfRange(alpha));
                }
            }
            SelectorRule::Random => {
                if self.seed.is_none() {
                    return Err(crate::Error::invalid("selector", "random requires a seed"));
                }
            }
            SelectorRule::Oracle if self.oracle_metric.is_none() => {
                return Err(crate::Error::invalid(
                    "selector",
                    "oracle requires a metric id",
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Result of applying one selector to one pool. Candidate indices are
/// 0-based everywhere, including on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub instance_id: String,
    pub rule: SelectorConfig,
    pub chosen_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined_scores: Option<Vec<LogProb>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logprob_rejects_nan_and_positive() {
        assert!(LogProb::new(f64::NAN).is_err());
        assert!(LogProb::new(0.5).is_err());
        assert!(LogProb::new(f64::INFINITY).is_err());
        assert!(LogProb::new(0.0).is_ok());
        assert!(LogProb::new(-3.25).is_ok());
        assert!(LogProb::new(f64::NEG_INFINITY).is_ok());
    }

    #[test]
    fn logprob_serializes_neg_inf_as_token() {
        let inf = serde_json::to_string(&LogProb::NEG_INF).unwrap();
        assert_eq!(inf, "\"-inf\"");
        let finite = serde_json::to_string(&LogProb::new(-2.5).unwrap()).unwrap();
        assert_eq!(finite, "-2.5");
        let back: LogProb = serde_json::from_str("\"-inf\"").unwrap();
        assert!(back.is_impossible());
        let back: LogProb = serde_json::from_str("-2.5").unwrap();
        assert_eq!(back.value(), -2.5);
    }

    #[test]
    fn logprob_deserialize_rejects_bad_values() {
        assert!(serde_json::from_str::<LogProb>("0.1").is_err());
        assert!(serde_json::from_str::<LogProb>("\"inf\"").is_err());
        assert!(serde_json::from_str::<LogProb>("\"oops\"").is_err());
    }

    #[test]
    fn instance_validation_names_the_field() {
        let mut inst = Instance::new("a", "src", "q", vec!["r".into()]);
        assert!(inst.validate().is_ok());
        inst.query = "  ".into();
        assert_eq!(inst.validate().unwrap_err(), "query");
        inst.query = "q".into();
        inst.references.clear();
        assert_eq!(inst.validate().unwrap_err(), "references");
    }

    #[test]
    fn unknown_fields_round_trip() {
        let line = r#"{"id":"a","source":"s","query":"q","references":["r"],"annotator":"x9"}"#;
        let inst: Instance = serde_json::from_str(line).unwrap();
        assert_eq!(inst.extra["annotator"], "x9");
        let out = serde_json::to_string(&inst).unwrap();
        let again: Instance = serde_json::from_str(&out).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn selector_config_validation() {
        assert!(SelectorConfig::answer_rec(0.5).validate().is_ok());
        assert!(matches!(
            SelectorConfig::answer_rec(1.5).validate(),
            Err(crate::Error::LambdaOutOfRange(_))
        ));
        assert!(matches!(
            SelectorConfig::ans_src_rec(0.5, -0.1).validate(),
            Err(crate::Error::AlphaOutOfRange(_))
        ));
        let mut random = SelectorConfig::random(9);
        assert!(random.validate().is_ok());
        random.seed = None;
        assert!(random.validate().is_err());
        let mut oracle = SelectorConfig::oracle("rouge1");
        assert!(oracle.validate().is_ok());
        oracle.oracle_metric = None;
        assert!(oracle.validate().is_err());
    }

    #[test]
    fn selector_rule_parses_both_separators() {
        assert_eq!(
            "answer-rec".parse::<SelectorRule>().unwrap(),
            SelectorRule::AnswerRec
        );
        assert_eq!(
            "ans_src_rec".parse::<SelectorRule>().unwrap(),
            SelectorRule::AnsSrcRec
        );
        assert!("bogus".parse::<SelectorRule>().is_err());
    }

    #[test]
    fn pool_round_trip_preserves_candidate_order() {
        let pool = CandidatePool::new(
            "i1",
            vec![Candidate::new("first"), Candidate::new("second")],
        );
        let json = serde_json::to_string(&pool).unwrap();
        let back: CandidatePool = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pool);
        assert_eq!(back.candidates[0].text, "first");
    }
}
