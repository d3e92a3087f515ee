//! Combining literal-summarizer and reader log-scores, and selecting the
//! final candidate.
//!
//! All combiners work in log space over raw (not length-normalized)
//! conditional log-likelihoods:
//!
//! ```text
//! answer_rec:  (1 − λ)·logp_s0 + λ·logp_answer_rec
//! source_rec:  (1 − λ)·logp_s0 + λ·logp_source_rec
//! ans_src_rec: (1 − λ)·logp_s0 + λ·((1 − α)·logp_answer_rec + α·logp_source_rec)
//! latent_rec:  (1 − λ)·logp_s0 + λ·logp_latent_rec
//! ```
//!
//! λ = 1 scores by the reader alone, λ = 0 by the literal summarizer
//! alone. A zero weight annihilates its term even when the term is −∞
//! (the 0·(−∞) = 0 convention), so the endpoints ignore the unused
//! constituent entirely. A candidate with −∞ in any positively-weighted
//! constituent ranks below every finite candidate; among equal scores the
//! lowest index wins, everywhere.

use crate::error::{Error, Result};
use crate::model::{CandidatePool, Instance, LogProb, Selection, SelectorConfig, SelectorRule};
use crate::rng::{self, SplitMix64};

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) && !lambda.is_nan() {
        Ok(())
    } else {
        Err(Error::LambdaOutOfRange(lambda))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) && !alpha.is_nan() {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

/// 0·(−∞) = 0, so endpoint weights drop their term entirely.
fn weighted(weight: f64, logp: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * logp
    }
}

pub fn combine_answer_rec(logp_s0: f64, logp_answer: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(weighted(1.0 - lambda, logp_s0) + weighted(lambda, logp_answer))
}

pub fn combine_source_rec(logp_s0: f64, logp_source: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(weighted(1.0 - lambda, logp_s0) + weighted(lambda, logp_source))
}

pub fn combine_latent_rec(logp_s0: f64, logp_latent: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(weighted(1.0 - lambda, logp_s0) + weighted(lambda, logp_latent))
}

/// Hybrid combiner; α = 0 reduces exactly to [`combine_answer_rec`] and
/// α = 1 to [`combine_source_rec`], bit for bit.
pub fn combine_ans_src(
    logp_s0: f64,
    logp_answer: f64,
    logp_source: f64,
    lambda: f64,
    alpha: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_alpha(alpha)?;
    let reader = weighted(1.0 - alpha, logp_answer) + weighted(alpha, logp_source);
    Ok(weighted(1.0 - lambda, logp_s0) + weighted(lambda, reader))
}

/// First index of the maximum; ties break toward the lowest index.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

fn require(value: Option<LogProb>, rule: SelectorRule, field: &str, index: usize) -> Result<f64> {
    value
        .map(LogProb::value)
        .ok_or_else(|| Error::MissingScore {
            rule: rule.name().to_string(),
            field: field.to_string(),
            index,
        })
}

/// Combined scores for a score-based rule over the whole pool.
pub fn combined_scores(pool: &CandidatePool, config: &SelectorConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if pool.candidates.is_empty() {
        return Err(Error::EmptyPool);
    }
    let rule = config.rule;
    let lambda = config.lambda;
    pool.candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let s0 = require(c.logp_s0, rule, "logp_s0", i)?;
            match rule {
                SelectorRule::AnswerRec => {
                    let ans = require(c.logp_answer_rec, rule, "logp_answer_rec", i)?;
                    combine_answer_rec(s0, ans, lambda)
                }
                SelectorRule::SourceRec => {
                    let src = require(c.logp_source_rec, rule, "logp_source_rec", i)?;
                    combine_source_rec(s0, src, lambda)
                }
                SelectorRule::AnsSrcRec => {
                    let ans = require(c.logp_answer_rec, rule, "logp_answer_rec", i)?;
                    let src = require(c.logp_source_rec, rule, "logp_source_rec", i)?;
                    combine_ans_src(s0, ans, src, lambda, config.alpha.expect("validated"))
                }
                SelectorRule::LatentRec => {
                    let lat = require(c.logp_latent_rec, rule, "logp_latent_rec", i)?;
                    combine_latent_rec(s0, lat, lambda)
                }
                SelectorRule::Random | SelectorRule::Oracle => {
                    unreachable!("combined_scores is only defined for score-based rules")
                }
            }
        })
        .collect()
}

fn select_scored(pool: &CandidatePool, config: &SelectorConfig) -> Result<Selection> {
    let scores = combined_scores(pool, config)?;
    let chosen_index = argmax_lowest(&scores);
    let combined = scores
        .into_iter()
        .map(|s| LogProb::new(s).map_err(|e| Error::invalid("combined score", e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Selection {
        instance_id: pool.instance_id.clone(),
        rule: config.clone(),
        chosen_index,
        combined_scores: Some(combined),
    })
}

/// Uniform draw keyed by (seed, instance id): per-instance results do not
/// depend on record order or scheduling.
pub fn random_index(seed: u64, instance_id: &str, n: usize) -> usize {
    let mut rng = SplitMix64::new(rng::mix(seed, rng::hash_str(instance_id)));
    rng.next_below(n as u64) as usize
}

/// Multi-reference metric used by the oracle selector.
pub type OracleMetricFn<'a> = &'a dyn Fn(&str, &[String]) -> Result<f64>;

/// Apply a selector to a pool.
///
/// Score-based rules take the argmax of their combiner; `Random` draws
/// uniformly keyed by (seed, instance id); `Oracle` picks the candidate
/// maximizing the supplied multi-reference metric against
/// `instance.references`. `combined_scores` is populated for score-based
/// rules only.
pub fn select(
    pool: &CandidatePool,
    config: &SelectorConfig,
    instance: &Instance,
    oracle_metric: Option<OracleMetricFn>,
) -> Result<Selection> {
    config.validate()?;
    if pool.candidates.is_empty() {
        return Err(Error::EmptyPool);
    }
    if pool.instance_id != instance.id {
        return Err(Error::invalid(
            "selection input",
            format!(
                "pool belongs to {:?} but instance is {:?}",
                pool.instance_id, instance.id
            ),
        ));
    }
    match config.rule {
        SelectorRule::Random => {
            let seed = config.seed.expect("validated");
            Ok(Selection {
                instance_id: pool.instance_id.clone(),
                rule: config.clone(),
                chosen_index: random_index(seed, &pool.instance_id, pool.candidates.len()),
                combined_scores: None,
            })
        }
        SelectorRule::Oracle => {
            let metric = oracle_metric
                .ok_or_else(|| Error::invalid("selector", "oracle requires a metric function"))?;
            if instance.references.is_empty() {
                return Err(Error::EmptyReferences);
            }
            let scores = pool
                .candidates
                .iter()
                .map(|c| metric(&c.text, &instance.references))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Selection {
                instance_id: pool.instance_id.clone(),
                rule: config.clone(),
                chosen_index: argmax_lowest(&scores),
                combined_scores: None,
            })
        }
        _ => select_scored(pool, config),
    }
}

/// Selection under the latent-reconstruction objective; mechanically
/// identical to the answer-reconstruction path with `logp_latent_rec` in
/// place of the answer score, under the same λ convention (λ = 1 is pure
/// reconstruction).
pub fn latent_rec_select(pool: &CandidatePool, lambda: f64) -> Result<Selection> {
    select_scored(pool, &SelectorConfig::latent_rec(lambda))
}
