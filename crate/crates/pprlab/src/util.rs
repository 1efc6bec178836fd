//! Small shared utilities: deterministic seed derivation and basic statistics.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives an independent child seed from a master seed and a trial index.
///
/// One splitmix64 step (Steele–Lea–Flood constants). Consecutive indices map
/// to well-separated states, so per-trial generators built from the results
/// are independent for all practical purposes while the mapping stays pure:
/// the same `(master, index)` always yields the same child seed, which is what
/// makes parallel trial execution order-independent.
#[must_use]
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A ChaCha generator for trial `index` of a run with the given master seed.
///
/// ChaCha (8 rounds) is pinned rather than `StdRng` because the latter's
/// stream is not guaranteed stable across library upgrades, and reproducible
/// outputs are part of this crate's contract.
#[must_use]
pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(master, index))
}

/// Mean of a slice. Empty input yields 0.
#[must_use]
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation / √n).
///
/// Returns 0 for fewer than two observations.
#[must_use]
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Binomial coefficient C(n, k) in f64 (exact for the small ranges used here).
#[must_use]
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
