//! Independent brute-force implementations used to verify the native
//! metrics. Deliberately slow and structurally different from the
//! production code paths.

// Each test binary compiles its own copy; not every binary uses every
// oracle.
#![allow(dead_code)]

/// Clipped n-gram overlap counted by direct scanning (no hash maps).
pub fn brute_rouge_n(cand: &[String], refr: &[String], n: usize) -> (f64, f64, f64) {
    let cand_grams: Vec<&[String]> = if cand.len() >= n {
        cand.windows(n).collect()
    } else {
        Vec::new()
    };
    let ref_grams: Vec<&[String]> = if refr.len() >= n {
        refr.windows(n).collect()
    } else {
        Vec::new()
    };
    if cand_grams.is_empty() || ref_grams.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mut overlap = 0usize;
    let mut counted: Vec<&[String]> = Vec::new();
    for gram in &cand_grams {
        if counted.contains(gram) {
            continue;
        }
        counted.push(gram);
        let in_cand = cand_grams.iter().filter(|g| g == &gram).count();
        let in_ref = ref_grams.iter().filter(|g| g == &gram).count();
        overlap += in_cand.min(in_ref);
    }
    finish_pr(overlap, cand_grams.len(), ref_grams.len())
}

fn finish_pr(overlap: usize, cand_total: usize, ref_total: usize) -> (f64, f64, f64) {
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    let f1 = if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    };
    (p, r, f1)
}

/// Top-down memoized LCS (the production code is bottom-up two-row).
pub fn brute_lcs(a: &[String], b: &[String]) -> usize {
    fn go(
        a: &[String],
        b: &[String],
        i: usize,
        j: usize,
        memo: &mut std::collections::HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(v) = memo.get(&(i, j)) {
            return *v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut std::collections::HashMap::new())
}

/// Exhaustive LCS over all 2^|a| subsequences; only for short inputs.
pub fn exhaustive_lcs(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 16, "exhaustive LCS is exponential");
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&String> = a
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t)
            .collect();
        if sub.len() > best && is_subsequence(&sub, b) {
            best = sub.len();
        }
    }
    best
}

fn is_subsequence(sub: &[&String], b: &[String]) -> bool {
    let mut it = b.iter();
    sub.iter().all(|s| it.any(|t| t == *s))
}

pub fn brute_rouge_l(cand: &[String], refr: &[String]) -> (f64, f64, f64) {
    if cand.is_empty() || refr.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    finish_pr(brute_lcs(cand, refr), cand.len(), refr.len())
}

/// Enumerate every maximum exact-match alignment and keep the minimum
/// chunk count, by plain depth-first search without pruning heuristics.
pub fn brute_meteor_alignment(cand: &[String], refr: &[String]) -> (usize, usize) {
    fn go(
        cand: &[String],
        refr: &[String],
        pos: usize,
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        out: &mut Vec<(usize, usize)>,
    ) {
        if pos == cand.len() {
            let matches = pairs.len();
            let mut chunks = 0;
            for (k, (i, j)) in pairs.iter().enumerate() {
                let adjacent = k > 0 && {
                    let (pi, pj) = pairs[k - 1];
                    pi + 1 == *i && pj + 1 == *j
                };
                if !adjacent {
                    chunks += 1;
                }
            }
            out.push((matches, chunks));
            return;
        }
        for j in 0..refr.len() {
            if !used[j] && refr[j] == cand[pos] {
                used[j] = true;
                pairs.push((pos, j));
                go(cand, refr, pos + 1, used, pairs, out);
                pairs.pop();
                used[j] = false;
            }
        }
        go(cand, refr, pos + 1, used, pairs, out);
    }

    let mut all = Vec::new();
    go(
        cand,
        refr,
        0,
        &mut vec![false; refr.len()],
        &mut Vec::new(),
        &mut all,
    );
    let max_matches = all.iter().map(|(m, _)| *m).max().unwrap_or(0);
    if max_matches == 0 {
        return (0, 0);
    }
    let min_chunks = all
        .iter()
        .filter(|(m, _)| *m == max_matches)
        .map(|(_, c)| *c)
        .min()
        .unwrap();
    (max_matches, min_chunks)
}

/// Full METEOR-lite from the brute-force alignment.
pub fn brute_meteor_lite(cand: &[String], refr: &[String]) -> f64 {
    let (m, chunks) = brute_meteor_alignment(cand, refr);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / cand.len() as f64;
    let r = m as f64 / refr.len() as f64;
    let f_mean = p * r / (0.9 * p + 0.1 * r);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    f_mean * (1.0 - penalty)
}

/// Random token sequences over a small alphabet, for oracle comparisons.
pub fn random_tokens(
    rng: &mut pragrank::rng::SplitMix64,
    max_len: usize,
    alphabet: usize,
) -> Vec<String> {
    let len = rng.next_below(max_len as u64 + 1) as usize;
    (0..len)
        .map(|_| format!("t{}", rng.next_below(alphabet as u64)))
        .collect()
}
