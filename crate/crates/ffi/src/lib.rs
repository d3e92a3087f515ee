//! C ABI for the pragrank engine.
//!
//! The surface covers the pieces other languages want to embed: the score
//! combiners, candidate selection over a pool handle, the native metrics,
//! and the deterministic toy language model. Handles are opaque; every
//! fallible function returns a [`PrStatus`] and writes results through out
//! pointers. Strings are NUL-terminated UTF-8; strings returned by the
//! library must be released with [`pr_string_free`].
//!
//! The generated header lives at `include/pragrank.h`.

use pragrank::backend::{Backend, DecodingSpec, Prompt, ToyLm};
use pragrank::metrics::{self, TokenSeq};
use pragrank::model::{Candidate, CandidatePool, LogProb, SelectorConfig};
use pragrank::scoring;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrStatus {
    PrOk = 0,
    /// A required pointer was NULL or an argument was structurally invalid.
    PrErrInvalidArgument = 1,
    /// A string argument was not valid UTF-8.
    PrErrUtf8 = 2,
    /// lambda or alpha outside [0, 1].
    PrErrOutOfRange = 3,
    /// A candidate was missing a log-score required by the rule.
    PrErrMissingScore = 4,
    /// The pool had no candidates.
    PrErrEmptyPool = 5,
    /// The backend rejected the request (bad corpus, empty continuation,
    /// unsupported decoding).
    PrErrBackend = 6,
    /// An internal panic was caught at the boundary.
    PrErrInternal = 7,
}

/// ROUGE variant selector for [`pr_rouge_f1`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrRougeVariant {
    PrRouge1 = 1,
    PrRouge2 = 2,
    PrRougeL = 3,
}

/// Opaque toy language model handle.
pub struct PrToyLm {
    inner: ToyLm,
}

/// Opaque candidate pool handle.
pub struct PrPool {
    inner: CandidatePool,
}

fn status_of(err: &pragrank::Error) -> PrStatus {
    use pragrank::Error;
    match err {
        Error::LambdaOutOfRange(_) | Error::AlphaOutOfRange(_) => PrStatus::PrErrOutOfRange,
        Error::MissingScore { .. } => PrStatus::PrErrMissingScore,
        Error::EmptyPool => PrStatus::PrErrEmptyPool,
        Error::EmptyContinuation | Error::UnsupportedDecoding(_) | Error::BackendUnavailable(_) => {
            PrStatus::PrErrBackend
        }
        _ => PrStatus::PrErrInvalidArgument,
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, PrStatus> {
    if ptr.is_null() {
        return Err(PrStatus::PrErrInvalidArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| PrStatus::PrErrUtf8)
}

fn guarded(body: impl FnOnce() -> PrStatus) -> PrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => PrStatus::PrErrInternal,
    }
}

fn write_out<T>(out: *mut T, value: T) -> PrStatus {
    if out.is_null() {
        return PrStatus::PrErrInvalidArgument;
    }
    unsafe { *out = value };
    PrStatus::PrOk
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn pr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Release a string allocated by this library. NULL is a no-op.
///
/// # Safety
/// `s` must have been returned by a pragrank function and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Combiners
// ---------------------------------------------------------------------------

/// (1 − λ)·logp_s0 + λ·logp_answer, with 0·(−∞) = 0 at the endpoints.
#[no_mangle]
pub extern "C" fn pr_combine_answer_rec(
    logp_s0: f64,
    logp_answer: f64,
    lambda: f64,
    out: *mut f64,
) -> PrStatus {
    guarded(
        || match scoring::combine_answer_rec(logp_s0, logp_answer, lambda) {
            Ok(v) => write_out(out, v),
            Err(e) => status_of(&e),
        },
    )
}

/// (1 − λ)·logp_s0 + λ·logp_source.
#[no_mangle]
pub extern "C" fn pr_combine_source_rec(
    logp_s0: f64,
    logp_source: f64,
    lambda: f64,
    out: *mut f64,
) -> PrStatus {
    guarded(
        || match scoring::combine_source_rec(logp_s0, logp_source, lambda) {
            Ok(v) => write_out(out, v),
            Err(e) => status_of(&e),
        },
    )
}

/// (1 − λ)·logp_s0 + λ·((1 − α)·logp_answer + α·logp_source).
#[no_mangle]
pub extern "C" fn pr_combine_ans_src(
    logp_s0: f64,
    logp_answer: f64,
    logp_source: f64,
    lambda: f64,
    alpha: f64,
    out: *mut f64,
) -> PrStatus {
    guarded(
        || match scoring::combine_ans_src(logp_s0, logp_answer, logp_source, lambda, alpha) {
            Ok(v) => write_out(out, v),
            Err(e) => status_of(&e),
        },
    )
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// F1 of the requested ROUGE variant between two texts.
///
/// # Safety
/// `candidate` and `reference` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn pr_rouge_f1(
    candidate: *const c_char,
    reference: *const c_char,
    variant: PrRougeVariant,
    out: *mut f64,
) -> PrStatus {
    guarded(|| {
        let (cand, refr) = match unsafe { (read_str(candidate), read_str(reference)) } {
            (Ok(c), Ok(r)) => (c, r),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let c = TokenSeq::from_text(cand);
        let r = TokenSeq::from_text(refr);
        let f1 = match variant {
            PrRougeVariant::PrRouge1 => metrics::rouge_n(&c, &r, 1).f1,
            PrRougeVariant::PrRouge2 => metrics::rouge_n(&c, &r, 2).f1,
            PrRougeVariant::PrRougeL => metrics::rouge_l(&c, &r).f1,
        };
        write_out(out, f1)
    })
}

/// METEOR-lite score between two texts.
///
/// # Safety
/// `candidate` and `reference` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn pr_meteor_lite(
    candidate: *const c_char,
    reference: *const c_char,
    out: *mut f64,
) -> PrStatus {
    guarded(|| {
        let (cand, refr) = match unsafe { (read_str(candidate), read_str(reference)) } {
            (Ok(c), Ok(r)) => (c, r),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let c = TokenSeq::from_text(cand);
        let r = TokenSeq::from_text(refr);
        write_out(out, metrics::meteor_lite(&c, &r))
    })
}

// ---------------------------------------------------------------------------
// Candidate pools and selection
// ---------------------------------------------------------------------------

/// Allocate an empty pool. Free with [`pr_pool_free`].
#[no_mangle]
pub extern "C" fn pr_pool_new(out: *mut *mut PrPool) -> PrStatus {
    guarded(|| {
        let pool = Box::new(PrPool {
            inner: CandidatePool::new("ffi", Vec::new()),
        });
        write_out(out, Box::into_raw(pool))
    })
}

/// # Safety
/// `pool` must come from [`pr_pool_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pr_pool_free(pool: *mut PrPool) {
    if !pool.is_null() {
        drop(Box::from_raw(pool));
    }
}

/// Append a candidate. Optional log-scores are passed as nullable
/// pointers; use `-INFINITY` for impossible continuations.
///
/// # Safety
/// `pool` must be a live handle; score pointers, when non-NULL, must
/// point to readable doubles.
#[no_mangle]
pub unsafe extern "C" fn pr_pool_push(
    pool: *mut PrPool,
    text: *const c_char,
    logp_s0: *const f64,
    logp_answer_rec: *const f64,
    logp_source_rec: *const f64,
    logp_latent_rec: *const f64,
) -> PrStatus {
    guarded(|| {
        let pool = match unsafe { pool.as_mut() } {
            Some(p) => p,
            None => return PrStatus::PrErrInvalidArgument,
        };
        let text = match unsafe { read_str(text) } {
            Ok(t) if !t.is_empty() => t,
            Ok(_) => return PrStatus::PrErrInvalidArgument,
            Err(s) => return s,
        };
        let read_score = |ptr: *const f64| -> Result<Option<LogProb>, PrStatus> {
            if ptr.is_null() {
                return Ok(None);
            }
            let raw = unsafe { *ptr };
            LogProb::new(raw)
                .map(Some)
                .map_err(|_| PrStatus::PrErrInvalidArgument)
        };
        let mut candidate = Candidate::new(text);
        candidate.logp_s0 = match read_score(logp_s0) {
            Ok(v) => v,
            Err(s) => return s,
        };
        candidate.logp_answer_rec = match read_score(logp_answer_rec) {
            Ok(v) => v,
            Err(s) => return s,
        };
        candidate.logp_source_rec = match read_score(logp_source_rec) {
            Ok(v) => v,
            Err(s) => return s,
        };
        candidate.logp_latent_rec = match read_score(logp_latent_rec) {
            Ok(v) => v,
            Err(s) => return s,
        };
        pool.inner.candidates.push(candidate);
        PrStatus::PrOk
    })
}

/// Number of candidates currently in the pool.
///
/// # Safety
/// `pool` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pr_pool_len(pool: *const PrPool, out: *mut usize) -> PrStatus {
    guarded(|| match unsafe { pool.as_ref() } {
        Some(p) => write_out(out, p.inner.candidates.len()),
        None => PrStatus::PrErrInvalidArgument,
    })
}

unsafe fn select_with(
    pool: *const PrPool,
    config: SelectorConfig,
    out_index: *mut usize,
) -> PrStatus {
    let pool = match pool.as_ref() {
        Some(p) => p,
        None => return PrStatus::PrErrInvalidArgument,
    };
    match scoring::combined_scores(&pool.inner, &config) {
        Ok(scores) => write_out(out_index, scoring::argmax_lowest(&scores)),
        Err(e) => status_of(&e),
    }
}

/// Index of the answer-reconstruction winner at the given lambda.
///
/// # Safety
/// `pool` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pr_select_answer_rec(
    pool: *const PrPool,
    lambda: f64,
    out_index: *mut usize,
) -> PrStatus {
    guarded(|| unsafe { select_with(pool, SelectorConfig::answer_rec(lambda), out_index) })
}

/// Index of the source-reconstruction winner at the given lambda.
///
/// # Safety
/// `pool` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pr_select_source_rec(
    pool: *const PrPool,
    lambda: f64,
    out_index: *mut usize,
) -> PrStatus {
    guarded(|| unsafe { select_with(pool, SelectorConfig::source_rec(lambda), out_index) })
}

/// Index of the hybrid answer/source winner at (lambda, alpha).
///
/// # Safety
/// `pool` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pr_select_ans_src(
    pool: *const PrPool,
    lambda: f64,
    alpha: f64,
    out_index: *mut usize,
) -> PrStatus {
    guarded(|| unsafe { select_with(pool, SelectorConfig::ans_src_rec(lambda, alpha), out_index) })
}

/// Index of the latent-reconstruction winner at the given lambda.
///
/// # Safety
/// `pool` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pr_select_latent_rec(
    pool: *const PrPool,
    lambda: f64,
    out_index: *mut usize,
) -> PrStatus {
    guarded(|| unsafe { select_with(pool, SelectorConfig::latent_rec(lambda), out_index) })
}

/// Uniform random selection keyed by (seed, instance id); stable across
/// processes and platforms.
///
/// # Safety
/// `pool` must be a live handle; `instance_id` must be a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn pr_select_random(
    pool: *const PrPool,
    seed: u64,
    instance_id: *const c_char,
    out_index: *mut usize,
) -> PrStatus {
    guarded(|| {
        let pool = match unsafe { pool.as_ref() } {
            Some(p) => p,
            None => return PrStatus::PrErrInvalidArgument,
        };
        let id = match unsafe { read_str(instance_id) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        if pool.inner.candidates.is_empty() {
            return PrStatus::PrErrEmptyPool;
        }
        let idx = scoring::random_index(seed, id, pool.inner.candidates.len());
        write_out(out_index, idx)
    })
}

// ---------------------------------------------------------------------------
// Toy language model
// ---------------------------------------------------------------------------

/// Build a toy bigram model from an ASCII corpus. Pass NULL to use the
/// embedded default corpus. Free with [`pr_toy_lm_free`].
///
/// # Safety
/// `corpus`, when non-NULL, must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pr_toy_lm_new(corpus: *const c_char, out: *mut *mut PrToyLm) -> PrStatus {
    guarded(|| {
        let model = if corpus.is_null() {
            Ok(ToyLm::default_model())
        } else {
            match unsafe { read_str(corpus) } {
                Ok(text) => ToyLm::from_corpus(text),
                Err(status) => return status,
            }
        };
        match model {
            Ok(m) => write_out(out, Box::into_raw(Box::new(PrToyLm { inner: m }))),
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `lm` must come from [`pr_toy_lm_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pr_toy_lm_free(lm: *mut PrToyLm) {
    if !lm.is_null() {
        drop(Box::from_raw(lm));
    }
}

/// Natural-log P(continuation | prompt). Impossible continuations yield
/// -INFINITY with PrOk.
///
/// # Safety
/// `lm` must be a live handle; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pr_toy_lm_score(
    lm: *const PrToyLm,
    prompt: *const c_char,
    continuation: *const c_char,
    out_logprob: *mut f64,
) -> PrStatus {
    guarded(|| {
        let lm = match unsafe { lm.as_ref() } {
            Some(m) => m,
            None => return PrStatus::PrErrInvalidArgument,
        };
        let (prompt, continuation) = match unsafe { (read_str(prompt), read_str(continuation)) } {
            (Ok(p), Ok(c)) => (p, c),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match lm.inner.score(&Prompt::plain(prompt), continuation) {
            Ok(v) => write_out(out_logprob, v),
            Err(e) => status_of(&e),
        }
    })
}

/// Greedy continuation of `prompt`, `max_new_tokens` characters long.
/// The text is written to `out_text` (free with [`pr_string_free`]) and
/// its raw log-likelihood to `out_logprob`.
///
/// # Safety
/// `lm` must be a live handle; `prompt` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pr_toy_lm_greedy(
    lm: *const PrToyLm,
    prompt: *const c_char,
    max_new_tokens: usize,
    out_text: *mut *mut c_char,
    out_logprob: *mut f64,
) -> PrStatus {
    guarded(|| {
        let lm = match unsafe { lm.as_ref() } {
            Some(m) => m,
            None => return PrStatus::PrErrInvalidArgument,
        };
        let prompt = match unsafe { read_str(prompt) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        if max_new_tokens == 0 || out_text.is_null() || out_logprob.is_null() {
            return PrStatus::PrErrInvalidArgument;
        }
        let spec = DecodingSpec::greedy(max_new_tokens);
        match lm.inner.generate(&Prompt::plain(prompt), 1, &spec) {
            Ok(mut texts) => {
                let t = texts.pop().expect("n = 1");
                let c = CString::new(t.text).expect("alphabet has no NUL");
                unsafe {
                    *out_text = c.into_raw();
                    *out_logprob = t.total_logprob;
                }
                PrStatus::PrOk
            }
            Err(e) => status_of(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn combine_matches_engine_and_flags_bad_lambda() {
        let mut out = 0.0;
        let status = pr_combine_answer_rec(-10.0, -2.0, 0.5, &mut out);
        assert_eq!(status, PrStatus::PrOk);
        assert_eq!(out, -6.0);
        assert_eq!(
            pr_combine_answer_rec(-1.0, -1.0, 1.5, &mut out),
            PrStatus::PrErrOutOfRange
        );
        assert_eq!(
            pr_combine_answer_rec(-1.0, -1.0, 0.5, ptr::null_mut()),
            PrStatus::PrErrInvalidArgument
        );
    }

    #[test]
    fn rouge_over_the_boundary() {
        unsafe {
            let cand = cstr("the cat sat");
            let refr = cstr("the cat sat");
            let mut out = 0.0;
            let status = pr_rouge_f1(
                cand.as_ptr(),
                refr.as_ptr(),
                PrRougeVariant::PrRouge1,
                &mut out,
            );
            assert_eq!(status, PrStatus::PrOk);
            assert_eq!(out, 1.0);
            assert_eq!(
                pr_rouge_f1(
                    ptr::null(),
                    refr.as_ptr(),
                    PrRougeVariant::PrRouge1,
                    &mut out
                ),
                PrStatus::PrErrInvalidArgument
            );
            let meteor_status = pr_meteor_lite(cand.as_ptr(), refr.as_ptr(), &mut out);
            assert_eq!(meteor_status, PrStatus::PrOk);
            // Identical 3-token texts: 1 - 0.5 * (1/3)^3.
            assert!((out - (1.0 - 0.5 / 27.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_selection_endpoints() {
        unsafe {
            let mut pool: *mut PrPool = ptr::null_mut();
            assert_eq!(pr_pool_new(&mut pool), PrStatus::PrOk);

            let push = |pool: *mut PrPool, text: &str, s0: f64, ans: f64| {
                let t = cstr(text);
                let status = pr_pool_push(pool, t.as_ptr(), &s0, &ans, ptr::null(), ptr::null());
                assert_eq!(status, PrStatus::PrOk);
            };
            push(pool, "one", -5.0, -1.0);
            push(pool, "two", -1.0, -9.0);

            let mut len = 0usize;
            assert_eq!(pr_pool_len(pool, &mut len), PrStatus::PrOk);
            assert_eq!(len, 2);

            let mut idx = usize::MAX;
            assert_eq!(pr_select_answer_rec(pool, 0.0, &mut idx), PrStatus::PrOk);
            assert_eq!(idx, 1, "lambda 0 follows logp_s0");
            assert_eq!(pr_select_answer_rec(pool, 1.0, &mut idx), PrStatus::PrOk);
            assert_eq!(idx, 0, "lambda 1 follows the reader");

            // Missing source scores surface as PrErrMissingScore.
            assert_eq!(
                pr_select_source_rec(pool, 0.5, &mut idx),
                PrStatus::PrErrMissingScore
            );

            pr_pool_free(pool);
        }
    }

    #[test]
    fn random_selection_is_stable() {
        unsafe {
            let mut pool: *mut PrPool = ptr::null_mut();
            pr_pool_new(&mut pool);
            for text in ["a", "b", "c", "d"] {
                let t = cstr(text);
                pr_pool_push(
                    pool,
                    t.as_ptr(),
                    ptr::null(),
                    ptr::null(),
                    ptr::null(),
                    ptr::null(),
                );
            }
            let id = cstr("fx-0001");
            let mut a = 0usize;
            let mut b = 0usize;
            assert_eq!(
                pr_select_random(pool, 9, id.as_ptr(), &mut a),
                PrStatus::PrOk
            );
            assert_eq!(
                pr_select_random(pool, 9, id.as_ptr(), &mut b),
                PrStatus::PrOk
            );
            assert_eq!(a, b);
            assert_eq!(a, pragrank::scoring::random_index(9, "fx-0001", 4));
            pr_pool_free(pool);
        }
    }

    #[test]
    fn toy_lm_round_trip() {
        unsafe {
            let corpus = cstr("abab");
            let mut lm: *mut PrToyLm = ptr::null_mut();
            assert_eq!(pr_toy_lm_new(corpus.as_ptr(), &mut lm), PrStatus::PrOk);

            let prompt = cstr("a");
            let cont = cstr("b");
            let mut lp = 0.0;
            assert_eq!(
                pr_toy_lm_score(lm, prompt.as_ptr(), cont.as_ptr(), &mut lp),
                PrStatus::PrOk
            );
            assert_eq!(lp, 0.75f64.ln());

            let empty = cstr("");
            assert_eq!(
                pr_toy_lm_score(lm, prompt.as_ptr(), empty.as_ptr(), &mut lp),
                PrStatus::PrErrBackend
            );

            let mut text: *mut c_char = ptr::null_mut();
            let mut total = 0.0;
            assert_eq!(
                pr_toy_lm_greedy(lm, prompt.as_ptr(), 4, &mut text, &mut total),
                PrStatus::PrOk
            );
            let s = CStr::from_ptr(text).to_str().unwrap().to_string();
            assert_eq!(s.len(), 4);
            assert!(total < 0.0);
            pr_string_free(text);
            pr_toy_lm_free(lm);

            // Default corpus path.
            let mut dlm: *mut PrToyLm = ptr::null_mut();
            assert_eq!(pr_toy_lm_new(ptr::null(), &mut dlm), PrStatus::PrOk);
            pr_toy_lm_free(dlm);
        }
    }

    #[test]
    fn free_functions_tolerate_null() {
        unsafe {
            pr_string_free(ptr::null_mut());
            pr_pool_free(ptr::null_mut());
            pr_toy_lm_free(ptr::null_mut());
        }
    }

    #[test]
    fn version_is_a_static_c_string() {
        let v = unsafe { CStr::from_ptr(pr_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
