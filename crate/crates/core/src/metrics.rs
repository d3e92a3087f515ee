//! Native summary-quality metrics: ROUGE-1/2, ROUGE-L, and METEOR-lite,
//! with multi-reference max aggregation.
//!
//! Tokenization is fixed and documented: lowercase, split on any maximal
//! run of non-alphanumeric characters, drop empties. No stemming and no
//! synonym matching by default; a stemming option exists but is off, which
//! keeps scores reproducible without lexical resources (and means absolute
//! values can differ from tools that stem by default).
//!
//! METEOR-lite is exact-match METEOR with the original parameters
//! (alpha = 0.9, beta = 3, gamma = 0.5) and no WordNet stages; it is named
//! `meteor_lite` in all outputs to signal that divergence. The alignment
//! maximizes matches and then exactly minimizes chunk count.
//!
//! All functions here are pure; external learned metrics plug in through
//! the [`MetricEval`] trait instead.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

/// Token sequence produced by the documented tokenizer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MetricOptions {
    /// Strip common English suffixes before matching. Off by default.
    pub stemming: bool,
}

impl TokenSeq {
    pub fn from_text(text: &str) -> Self {
        Self::with_options(text, MetricOptions::default())
    }

    pub fn with_options(text: &str, opts: MetricOptions) -> Self {
        let tokens = text
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if opts.stemming {
                    stem(t)
                } else {
                    t.to_string()
                }
            })
            .collect();
        Self { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Minimal suffix stripper: longest of `ing`, `ed`, `es`, `s`, keeping a
/// stem of at least three characters. Deliberately crude; see module doc.
fn stem(token: &str) -> String {
    for suffix in ["ing", "ed", "es", "s"] {
        if let Some(stripped) = token.strip_suffix(suffix) {
            if stripped.chars().count() >= 3 {
                return stripped.to_string();
            }
        }
    }
    token.to_string()
}

/// Precision / recall / F1 triple, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricScore {
    pub const ZERO: MetricScore = MetricScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// ROUGE-N via clipped n-gram overlap. Empty n-gram sets on either side
/// give all-zero scores.
pub fn rouge_n(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> MetricScore {
    let cand_grams = ngram_counts(candidate.tokens(), n);
    let ref_grams = ngram_counts(reference.tokens(), n);
    let cand_total: usize = cand_grams.values().sum();
    let ref_total: usize = ref_grams.values().sum();
    if cand_total == 0 || ref_total == 0 {
        return MetricScore::ZERO;
    }
    let mut overlap = 0usize;
    for (gram, c) in &cand_grams {
        if let Some(r) = ref_grams.get(gram) {
            overlap += (*c).min(*r);
        }
    }
    MetricScore::from_pr(
        overlap as f64 / cand_total as f64,
        overlap as f64 / ref_total as f64,
    )
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        *counts.entry(window).or_insert(0) += 1;
    }
    counts
}

/// ROUGE-L via longest common subsequence.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> MetricScore {
    if candidate.is_empty() || reference.is_empty() {
        return MetricScore::ZERO;
    }
    let l = lcs_len(candidate.tokens(), reference.tokens()) as f64;
    MetricScore::from_pr(l / candidate.len() as f64, l / reference.len() as f64)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// METEOR-lite score in [0, 1].
///
/// m = matched unigrams (maximum matching), P = m/|cand|, R = m/|ref|,
/// F_mean = P·R / (0.9·P + 0.1·R), penalty = 0.5·(chunks/m)^3,
/// score = F_mean·(1 − penalty). Zero matches score 0.
pub fn meteor_lite(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    let (matches, chunks) = align_min_chunks(candidate.tokens(), reference.tokens());
    if matches == 0 {
        return 0.0;
    }
    let p = matches as f64 / candidate.len() as f64;
    let r = matches as f64 / reference.len() as f64;
    let f_mean = p * r / (0.9 * p + 0.1 * r);
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    f_mean * (1.0 - penalty)
}

/// Exact-match unigram alignment: maximum match count first, then the
/// minimum number of chunks among all maximum matchings.
///
/// The match count has a closed form (sum of clipped token counts); chunk
/// minimization is branch-and-bound over assignments of candidate
/// positions to unused reference positions. Adjacent continuations are
/// explored first and partial chunk counts prune the search, so typical
/// summary-scale inputs resolve quickly even though the worst case is
/// exponential.
fn align_min_chunks(cand: &[String], refr: &[String]) -> (usize, usize) {
    let mut ref_avail: HashMap<&str, usize> = HashMap::new();
    for t in refr {
        *ref_avail.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut cand_counts: HashMap<&str, usize> = HashMap::new();
    for t in cand {
        *cand_counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let max_matches: usize = cand_counts
        .iter()
        .map(|(t, c)| (*c).min(ref_avail.get(t).copied().unwrap_or(0)))
        .sum();
    if max_matches == 0 {
        return (0, 0);
    }

    // suffix_best[i] = max matches attainable from cand[i..] against a full
    // reference; combined with live availability it bounds skips.
    let mut search = ChunkSearch {
        cand,
        refr,
        ref_used: vec![false; refr.len()],
        ref_avail,
        max_matches,
        best: max_matches + 1,
    };
    search.dfs(0, 0, None, 0);
    (max_matches, search.best)
}

struct ChunkSearch<'a> {
    cand: &'a [String],
    refr: &'a [String],
    ref_used: Vec<bool>,
    ref_avail: HashMap<&'a str, usize>,
    max_matches: usize,
    best: usize,
}

impl<'a> ChunkSearch<'a> {
    fn remaining_capacity(&self, from: usize) -> usize {
        let mut suffix: HashMap<&str, usize> = HashMap::new();
        for t in &self.cand[from..] {
            *suffix.entry(t.as_str()).or_insert(0) += 1;
        }
        suffix
            .iter()
            .map(|(t, c)| (*c).min(self.ref_avail.get(t).copied().unwrap_or(0)))
            .sum()
    }

    fn dfs(&mut self, pos: usize, matched: usize, prev: Option<(usize, usize)>, chunks: usize) {
        if chunks >= self.best {
            return;
        }
        if pos == self.cand.len() {
            if matched == self.max_matches {
                self.best = chunks;
            }
            return;
        }
        let token = self.cand[pos].as_str();

        // Adjacent continuation is the only zero-cost move; explore it
        // first so the incumbent tightens quickly.
        let adjacent_j = prev.and_then(|(pi, pj)| (pi + 1 == pos).then_some(pj + 1));
        if let Some(j) = adjacent_j {
            if j < self.refr.len() && !self.ref_used[j] && self.refr[j] == token {
                self.take(pos, j, matched, chunks);
            }
        }
        for j in 0..self.refr.len() {
            if self.ref_used[j] || self.refr[j] != token || adjacent_j == Some(j) {
                continue;
            }
            self.take(pos, j, matched, chunks + 1);
        }

        // Skipping is allowed only when the suffix can still reach the
        // maximum match count.
        if matched + self.remaining_capacity(pos + 1) >= self.max_matches {
            self.dfs(pos + 1, matched, prev, chunks);
        }
    }

    fn take(&mut self, pos: usize, j: usize, matched: usize, chunks: usize) {
        self.ref_used[j] = true;
        let token = self.cand[pos].as_str();
        *self.ref_avail.get_mut(token).unwrap() -= 1;
        self.dfs(pos + 1, matched + 1, Some((pos, j)), chunks.max(1));
        *self.ref_avail.get_mut(token).unwrap() += 1;
        self.ref_used[j] = false;
    }
}

/// Metric identifiers accepted throughout the CLI and report files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricId {
    Rouge1,
    Rouge2,
    RougeL,
    MeteorLite,
    /// Learned or otherwise external metric served over HTTP.
    Ext(String),
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            MetricId::Rouge1 => f.write_str("rouge1"),
            MetricId::Rouge2 => f.write_str("rouge2"),
            MetricId::RougeL => f.write_str("rougeL"),
            MetricId::MeteorLite => f.write_str("meteor_lite"),
            MetricId::Ext(name) => write!(f, "ext:{name}"),
        }
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rouge1" => Ok(MetricId::Rouge1),
            "rouge2" => Ok(MetricId::Rouge2),
            "rougeL" => Ok(MetricId::RougeL),
            "meteor_lite" => Ok(MetricId::MeteorLite),
            other => match other.strip_prefix("ext:") {
                Some(name) if !name.is_empty() => Ok(MetricId::Ext(name.to_string())),
                _ => Err(format!("unknown metric id {other:?}")),
            },
        }
    }
}

/// Candidate-versus-reference scorer. Built-in metrics are pure; external
/// metrics go over the wire and may fail.
pub trait MetricEval: Sync {
    fn id(&self) -> String;
    fn eval(&self, candidate: &str, reference: &str) -> Result<f64>;
}

/// The in-repo metrics behind the [`MetricEval`] interface. ROUGE variants
/// report F1; METEOR-lite reports its single score.
pub struct BuiltinMetric {
    id: MetricId,
    opts: MetricOptions,
}

impl BuiltinMetric {
    pub fn new(id: MetricId, opts: MetricOptions) -> Result<Self> {
        if matches!(id, MetricId::Ext(_)) {
            return Err(Error::invalid(
                "metric",
                format!("{id} requires an external metric endpoint"),
            ));
        }
        Ok(Self { id, opts })
    }
}

impl MetricEval for BuiltinMetric {
    fn id(&self) -> String {
        self.id.to_string()
    }

    fn eval(&self, candidate: &str, reference: &str) -> Result<f64> {
        let c = TokenSeq::with_options(candidate, self.opts);
        let r = TokenSeq::with_options(reference, self.opts);
        Ok(match self.id {
            MetricId::Rouge1 => rouge_n(&c, &r, 1).f1,
            MetricId::Rouge2 => rouge_n(&c, &r, 2).f1,
            MetricId::RougeL => rouge_l(&c, &r).f1,
            MetricId::MeteorLite => meteor_lite(&c, &r),
            MetricId::Ext(_) => unreachable!("rejected in constructor"),
        })
    }
}

/// Maximum of the per-reference scores.
pub fn multi_ref(metric: &dyn MetricEval, candidate: &str, references: &[String]) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::EmptyReferences);
    }
    let mut best = f64::NEG_INFINITY;
    for reference in references {
        let s = metric.eval(candidate, reference)?;
        if s > best {
            best = s;
        }
    }
    Ok(best)
}
