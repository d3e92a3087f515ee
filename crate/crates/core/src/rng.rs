//! Deterministic randomness used across the crate.
//!
//! Everything stochastic flows through SplitMix64 with explicit 64-bit
//! seeds: candidate sampling, the random selector, and fixture synthesis.
//! Subsystems derive independent streams with [`mix`] keyed by stable
//! identifiers (instance id, candidate index), so results never depend on
//! thread scheduling or record order. Run metadata records the algorithm
//! as [`PRNG_ID`].

/// Identifier recorded in run metadata.
pub const PRNG_ID: &str = "splitmix64";

/// SplitMix64 generator (Vigna's mixing constants).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, n) without modulo bias (rejection sampling).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }
}

/// Derive an independent stream seed from a parent seed and a salt.
pub fn mix(seed: u64, salt: u64) -> u64 {
    SplitMix64::new(seed ^ SplitMix64::new(salt).next_u64()).next_u64()
}

/// FNV-1a 64-bit hash, for keying streams by string identifiers.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
