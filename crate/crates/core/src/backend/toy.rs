//! Deterministic character-bigram language model.
//!
//! The model is a Laplace-smoothed bigram over the distinct bytes of an
//! ASCII training corpus. Conditional probabilities have the closed form
//!
//! ```text
//! P(next | prev) = (count(prev, next) + 1) / (count(prev, ·) + V)
//! ```
//!
//! where V is the alphabet size, so every log-likelihood the pipeline
//! produces from this backend can be recomputed by hand. The start-of-text
//! state observes the first corpus byte once; a context byte outside the
//! alphabet is a zero-count state (uniform 1/V); a continuation byte
//! outside the alphabet has probability zero, i.e. log-probability −∞.
//!
//! Generation emits exactly `max_new_tokens` bytes. Temperature reshapes
//! the smoothed distribution as p_i^(1/T) / Σ p_j^(1/T) before top-k or
//! nucleus truncation; reported log-probabilities are always the raw
//! model's, never the tempered ones. Sampling draws come from SplitMix64
//! streams keyed by (spec seed, candidate index), so output is
//! reproducible and independent of scheduling. Determinism across
//! platforms holds as far as the platform libm agrees on `ln` and `powf`,
//! which mainstream targets do.

use super::{Backend, DecodingMethod, DecodingSpec, Prompt, ScoredText};
use crate::error::{Error, Result};
use crate::rng::{self, SplitMix64};

pub const DEFAULT_CORPUS: &str = include_str!("../../assets/toy_corpus.txt");

const NO_INDEX: u16 = u16::MAX;

#[derive(Debug, Clone)]
pub struct ToyLm {
    alphabet: Vec<u8>,
    index: [u16; 256],
    /// (V + 1) rows of V counts; the last row is the start-of-text state.
    counts: Vec<u64>,
    row_totals: Vec<u64>,
    corpus_hash: u64,
}

impl ToyLm {
    pub fn from_corpus(corpus: &str) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("toy corpus", "corpus must be non-empty"));
        }
        if !corpus.is_ascii() {
            return Err(Error::invalid(
                "toy corpus",
                "corpus must be ASCII so byte-level generation yields valid text",
            ));
        }
        let mut alphabet: Vec<u8> = corpus.bytes().collect();
        alphabet.sort_unstable();
        alphabet.dedup();

        let mut index = [NO_INDEX; 256];
        for (i, b) in alphabet.iter().enumerate() {
            index[*b as usize] = i as u16;
        }

        let v = alphabet.len();
        let mut counts = vec![0u64; (v + 1) * v];
        let mut row_totals = vec![0u64; v + 1];
        let bytes = corpus.as_bytes();

        let bos = v;
        counts[bos * v + index[bytes[0] as usize] as usize] += 1;
        row_totals[bos] += 1;
        for pair in bytes.windows(2) {
            let prev = index[pair[0] as usize] as usize;
            let next = index[pair[1] as usize] as usize;
            counts[prev * v + next] += 1;
            row_totals[prev] += 1;
        }

        Ok(Self {
            alphabet,
            index,
            counts,
            row_totals,
            corpus_hash: rng::hash_str(corpus),
        })
    }

    pub fn from_corpus_file(path: &std::path::Path) -> Result<Self> {
        let corpus = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_corpus(&corpus)
    }

    /// Model over the embedded default corpus.
    pub fn default_model() -> Self {
        Self::from_corpus(DEFAULT_CORPUS).expect("embedded corpus is valid")
    }

    pub fn alphabet(&self) -> &[u8] {
        &self.alphabet
    }

    /// Row for the conditioning state: alphabet byte, start-of-text for an
    /// empty prompt, or `None` for an out-of-alphabet byte (zero counts).
    fn state_row(&self, prompt: &str) -> Option<usize> {
        match prompt.as_bytes().last() {
            None => Some(self.alphabet.len()),
            Some(b) => match self.index[*b as usize] {
                NO_INDEX => None,
                i => Some(i as usize),
            },
        }
    }

    fn state_after(&self, byte: u8) -> Option<usize> {
        match self.index[byte as usize] {
            NO_INDEX => None,
            i => Some(i as usize),
        }
    }

    /// Smoothed probability of the alphabet entry `next_idx` given a state
    /// row (None = zero-count state).
    fn prob(&self, row: Option<usize>, next_idx: usize) -> f64 {
        let v = self.alphabet.len() as u64;
        let (count, total) = match row {
            Some(r) => (
                self.counts[r * self.alphabet.len() + next_idx],
                self.row_totals[r],
            ),
            None => (0, 0),
        };
        (count + 1) as f64 / (total + v) as f64
    }

    fn probs(&self, row: Option<usize>) -> Vec<f64> {
        (0..self.alphabet.len())
            .map(|i| self.prob(row, i))
            .collect()
    }

    fn greedy_path(&self, prompt: &str, steps: usize) -> ScoredText {
        let mut row = self.state_row(prompt);
        let mut path = Vec::with_capacity(steps);
        let mut logps = Vec::with_capacity(steps);
        for _ in 0..steps {
            let probs = self.probs(row);
            let mut best = 0;
            for (i, p) in probs.iter().enumerate() {
                if *p > probs[best] {
                    best = i;
                }
            }
            path.push(self.alphabet[best]);
            logps.push(probs[best].ln());
            row = Some(best);
        }
        scored_from_path(path, logps)
    }

    fn beam_paths(
        &self,
        prompt: &str,
        n: usize,
        beam_size: usize,
        steps: usize,
    ) -> Vec<ScoredText> {
        struct Hyp {
            path: Vec<u8>,
            logps: Vec<f64>,
            total: f64,
            row: Option<usize>,
        }
        let mut beams = vec![Hyp {
            path: Vec::new(),
            logps: Vec::new(),
            total: 0.0,
            row: self.state_row(prompt),
        }];
        for _ in 0..steps {
            let mut expanded = Vec::with_capacity(beams.len() * self.alphabet.len());
            for hyp in &beams {
                let probs = self.probs(hyp.row);
                for (i, p) in probs.iter().enumerate() {
                    let lp = p.ln();
                    let mut path = hyp.path.clone();
                    path.push(self.alphabet[i]);
                    let mut logps = hyp.logps.clone();
                    logps.push(lp);
                    expanded.push(Hyp {
                        path,
                        logps,
                        total: hyp.total + lp,
                        row: Some(i),
                    });
                }
            }
            // Ties break toward the lexicographically smallest path so the
            // search is fully deterministic.
            expanded.sort_by(|a, b| {
                b.total
                    .partial_cmp(&a.total)
                    .expect("logprobs are never NaN")
                    .then_with(|| a.path.cmp(&b.path))
            });
            expanded.truncate(beam_size);
            beams = expanded;
        }
        beams
            .into_iter()
            .take(n)
            .map(|h| scored_from_path(h.path, h.logps))
            .collect()
    }

    fn sampled_path(&self, prompt: &str, spec: &DecodingSpec, rng: &mut SplitMix64) -> ScoredText {
        let mut row = self.state_row(prompt);
        let mut path = Vec::with_capacity(spec.max_new_tokens);
        let mut logps = Vec::with_capacity(spec.max_new_tokens);
        for _ in 0..spec.max_new_tokens {
            let raw = self.probs(row);
            let tempered = temper(&raw, spec.temperature);
            let kept = match spec.method {
                DecodingMethod::Standard => (0..raw.len()).collect::<Vec<_>>(),
                DecodingMethod::TopK => {
                    truncate_sorted(&tempered, |taken, _| taken < spec.k.unwrap())
                }
                DecodingMethod::Nucleus => {
                    let p = spec.p.unwrap();
                    truncate_sorted(&tempered, |_, cum| cum < p)
                }
                _ => unreachable!("sampled_path only handles sampling methods"),
            };
            let chosen = draw(&kept, &tempered, rng);
            path.push(self.alphabet[chosen]);
            logps.push(raw[chosen].ln());
            row = Some(chosen);
        }
        scored_from_path(path, logps)
    }
}

fn scored_from_path(path: Vec<u8>, logps: Vec<f64>) -> ScoredText {
    ScoredText {
        text: String::from_utf8(path).expect("alphabet is ASCII"),
        total_logprob: logps.iter().sum(),
        token_logprobs: logps,
    }
}

/// p_i^(1/T) / Σ p_j^(1/T); T = 1 is the identity so untempered sampling
/// stays bit-exact with the raw distribution.
fn temper(probs: &[f64], temperature: f64) -> Vec<f64> {
    if temperature == 1.0 {
        return probs.to_vec();
    }
    let inv = 1.0 / temperature;
    let powered: Vec<f64> = probs.iter().map(|p| p.powf(inv)).collect();
    let total: f64 = powered.iter().sum();
    powered.into_iter().map(|p| p / total).collect()
}

/// Indices ordered by probability descending (ties toward the lower
/// index), cut off by `keep(taken_so_far, cumulative_before)`; always
/// keeps at least one entry and keeps everything if the predicate never
/// fails within the list.
fn truncate_sorted(probs: &[f64], keep: impl Fn(usize, f64) -> bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|a, b| {
        probs[*b]
            .partial_cmp(&probs[*a])
            .expect("probabilities are never NaN")
            .then(a.cmp(b))
    });
    let mut kept = Vec::new();
    let mut cum = 0.0;
    for idx in order {
        if kept.is_empty() || keep(kept.len(), cum) {
            cum += probs[idx];
            kept.push(idx);
        } else {
            break;
        }
    }
    kept
}

fn draw(kept: &[usize], weights: &[f64], rng: &mut SplitMix64) -> usize {
    let total: f64 = kept.iter().map(|i| weights[*i]).sum();
    let u = rng.next_f64() * total;
    let mut acc = 0.0;
    for idx in kept {
        acc += weights[*idx];
        if u < acc {
            return *idx;
        }
    }
    *kept.last().expect("kept is never empty")
}

impl Backend for ToyLm {
    fn id(&self) -> String {
        format!("toy:{:016x}", self.corpus_hash)
    }

    fn score(&self, prompt: &Prompt, continuation: &str) -> Result<f64> {
        if continuation.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        let flat = prompt.flat();
        let mut row = self.state_row(&flat);
        let mut total = 0.0;
        for byte in continuation.bytes() {
            match self.state_after(byte) {
                None => return Ok(f64::NEG_INFINITY),
                Some(idx) => {
                    total += self.prob(row, idx).ln();
                    row = Some(idx);
                }
            }
        }
        Ok(total)
    }

    fn generate(&self, prompt: &Prompt, n: usize, spec: &DecodingSpec) -> Result<Vec<ScoredText>> {
        if n == 0 {
            return Err(Error::invalid("generation", "n must be >= 1"));
        }
        spec.validate()?;
        let flat = prompt.flat();
        match spec.method {
            DecodingMethod::DiverseBeam => {
                Err(Error::UnsupportedDecoding("diverse_beam".to_string()))
            }
            DecodingMethod::Greedy => {
                let one = self.greedy_path(&flat, spec.max_new_tokens);
                Ok(vec![one; n])
            }
            DecodingMethod::Beam => {
                let beam_size = spec.beam_size.expect("validated");
                if n > beam_size {
                    return Err(Error::invalid(
                        "generation",
                        format!("n = {n} exceeds beam_size = {beam_size}"),
                    ));
                }
                Ok(self.beam_paths(&flat, n, beam_size, spec.max_new_tokens))
            }
            DecodingMethod::Standard | DecodingMethod::TopK | DecodingMethod::Nucleus => {
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    let mut rng = SplitMix64::new(rng::mix(spec.seed, i as u64));
                    out.push(self.sampled_path(&flat, spec, &mut rng));
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lm(corpus: &str) -> ToyLm {
        ToyLm::from_corpus(corpus).unwrap()
    }

    #[test]
    fn abab_hand_computation() {
        // Corpus "abab": alphabet {a, b}, V = 2.
        // count(a, b) = 2 over total 2 -> P(b|a) = (2+1)/(2+2) = 0.75.
        // count(a, a) = 0             -> P(a|a) = (0+1)/(2+2) = 0.25.
        let m = lm("abab");
        let p = Prompt::plain("a");
        assert_eq!(m.score(&p, "b").unwrap(), 0.75f64.ln());
        assert_eq!(m.score(&p, "a").unwrap(), 0.25f64.ln());
        // BOS state saw only "a": P(a|BOS) = (1+1)/(1+2) = 2/3.
        assert_eq!(
            m.score(&Prompt::plain(""), "a").unwrap(),
            (2.0f64 / 3.0).ln()
        );
    }

    #[test]
    fn single_step_distribution_normalizes() {
        let m = ToyLm::default_model();
        for prompt in ["", "a", "z", "bad cab"] {
            let p = Prompt::plain(prompt);
            let sum: f64 = m
                .alphabet()
                .to_vec()
                .iter()
                .map(|b| m.score(&p, &(*b as char).to_string()).unwrap().exp())
                .sum();
            assert!((sum - 1.0).abs() < 1e-9, "prompt {prompt:?} sums to {sum}");
        }
    }

    #[test]
    fn empty_continuation_is_rejected() {
        let m = lm("abab");
        assert!(matches!(
            m.score(&Prompt::plain("a"), ""),
            Err(Error::EmptyContinuation)
        ));
    }

    #[test]
    fn out_of_alphabet_continuation_is_impossible() {
        let m = lm("abab");
        assert_eq!(
            m.score(&Prompt::plain("a"), "z").unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(
            m.score(&Prompt::plain("a"), "az").unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn chain_rule_holds() {
        let m = ToyLm::default_model();
        let p = Prompt::plain("bad");
        let joint = m.score(&p, "cafe").unwrap();
        let split = m.score(&p, "ca").unwrap() + m.score(&Prompt::plain("badca"), "fe").unwrap();
        assert!((joint - split).abs() < 1e-9);
    }

    #[test]
    fn unknown_context_is_uniform() {
        let m = lm("abab");
        // 'z' never appears: zero-count state, P = 1/V = 1/2 for each.
        assert_eq!(m.score(&Prompt::plain("z"), "a").unwrap(), 0.5f64.ln());
        assert_eq!(m.score(&Prompt::plain("z"), "b").unwrap(), 0.5f64.ln());
    }

    #[test]
    fn greedy_is_deterministic_and_replicated() {
        let m = ToyLm::default_model();
        let spec = DecodingSpec::greedy(6);
        let a = m.generate(&Prompt::plain("ba"), 3, &spec).unwrap();
        let b = m.generate(&Prompt::plain("ba"), 3, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|t| t.text == a[0].text));
    }

    #[test]
    fn beam_one_equals_greedy() {
        let m = ToyLm::default_model();
        let greedy = m
            .generate(&Prompt::plain("fa"), 1, &DecodingSpec::greedy(5))
            .unwrap();
        let beam = m
            .generate(&Prompt::plain("fa"), 1, &DecodingSpec::beam(1, 5))
            .unwrap();
        assert_eq!(greedy[0].text, beam[0].text);
        assert!((greedy[0].total_logprob - beam[0].total_logprob).abs() < 1e-12);
    }

    #[test]
    fn beam_rejects_n_beyond_width() {
        let m = ToyLm::default_model();
        assert!(m
            .generate(&Prompt::plain("a"), 4, &DecodingSpec::beam(2, 3))
            .is_err());
    }

    #[test]
    fn diverse_beam_is_unsupported() {
        let m = ToyLm::default_model();
        let spec = DecodingSpec {
            method: DecodingMethod::DiverseBeam,
            beam_size: Some(4),
            ..DecodingSpec::greedy(3)
        };
        assert!(matches!(
            m.generate(&Prompt::plain("a"), 1, &spec),
            Err(Error::UnsupportedDecoding(_))
        ));
    }

    #[test]
    fn seeded_sampling_reproduces() {
        let m = ToyLm::default_model();
        let spec = DecodingSpec::nucleus(0.95, 1.5, 8, 42);
        let a = m.generate(&Prompt::plain("head"), 5, &spec).unwrap();
        let b = m.generate(&Prompt::plain("head"), 5, &spec).unwrap();
        assert_eq!(a, b);
        let other = m
            .generate(&Prompt::plain("head"), 5, &spec.clone().with_seed(43))
            .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn generated_totals_match_score() {
        let m = ToyLm::default_model();
        for spec in [
            DecodingSpec::standard(2.0, 6, 7),
            DecodingSpec::top_k(4, 1.0, 6, 7),
            DecodingSpec::nucleus(0.9, 1.2, 6, 7),
            DecodingSpec::greedy(6),
            DecodingSpec::beam(3, 6),
        ] {
            let prompt = Prompt::plain("bead");
            for t in m
                .generate(&prompt, 2.min(spec.beam_size.unwrap_or(2)), &spec)
                .unwrap()
            {
                let rescored = m.score(&prompt, &t.text).unwrap();
                assert!(
                    (t.total_logprob - rescored).abs() < 1e-9,
                    "{spec:?} drifted: {} vs {rescored}",
                    t.total_logprob
                );
                let sum: f64 = t.token_logprobs.iter().sum();
                assert!((t.total_logprob - sum).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn temper_identity_at_one() {
        let probs = vec![0.5, 0.3, 0.2];
        assert_eq!(temper(&probs, 1.0), probs);
        let hot = temper(&probs, 2.0);
        let sum: f64 = hot.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // Higher temperature flattens.
        assert!(hot[0] < probs[0] && hot[2] > probs[2]);
    }

    #[test]
    fn nucleus_truncation_keeps_smallest_covering_set() {
        let probs = vec![0.5, 0.3, 0.15, 0.05];
        let kept = truncate_sorted(&probs, |_, cum| cum < 0.75);
        assert_eq!(kept, vec![0, 1]);
        let all = truncate_sorted(&probs, |_, cum| cum < 1.0);
        assert_eq!(all, vec![0, 1, 2, 3]);
    }
}
