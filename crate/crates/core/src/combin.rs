//! Binomial coefficients and lexicographic enumeration of k-subsets.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

/// `C(n, k)` as an integer, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        match acc.checked_mul(u128::from(n - i)) {
            Some(v) => acc = v / u128::from(i + 1),
            None => return u128::MAX,
        }
    }
    acc
}

/// `log2 C(n, k)`; `-inf` when `k > n`.
///
/// Small `min(k, n - k)` is summed term by term, which is exact to a few ulp;
/// larger arguments go through log-gamma.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k < 64 {
        let mut acc = 0.0;
        for i in 1..=k {
            acc += libm::log2((n - k + i) as f64 / i as f64);
        }
        return acc;
    }
    let (n, k) = (n as f64, k as f64);
    (libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)) / LN_2
}

/// `P(Bin(n, p) = j)` for the small `n` used in the information formulas.
pub fn binomial_pmf(n: usize, j: usize, p: f64) -> f64 {
    if j > n {
        return 0.0;
    }
    let c = binomial(n as u64, j as u64) as f64;
    c * libm::pow(p, j as f64) * libm::pow(1.0 - p, (n - j) as f64)
}

/// Advances `idx` (a strictly increasing k-subset of `0..n`) to its
/// lexicographic successor. Returns `false` once the last subset is passed.
pub fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
///
/// Panics if `rank >= C(n, k)`.
pub fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    assert!(rank < binomial(n as u64, k as u64), "rank out of range");
    let mut out = Vec::with_capacity(k);
    let mut next = 0usize;
    for slot in 0..k {
        let remaining = k - slot - 1;
        loop {
            let block = binomial((n - next - 1) as u64, remaining as u64);
            if rank < block {
                break;
            }
            rank -= block;
            next += 1;
        }
        out.push(next);
        next += 1;
    }
    out
}
