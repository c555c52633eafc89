//! Exhaustive maximum-likelihood decoding.
//!
//! Every size-`k` candidate set is scored by `sum_t log P(y_t | k_t)` where
//! `k_t` is the number of candidate members in pool `t`. Scores depend on the
//! transcript only through the counts `n[j][y]` of tests with `k_t = j` and
//! outcome `y`, so the decoder bit-slices the per-test counts over 64 tests at
//! a time and evaluates the score from those counts.
//!
//! Ties: candidates whose score is within [`TIE_TOLERANCE`] of the best score
//! are tied. The reported estimate is the lexicographically first tied
//! candidate and `n_ties` counts all of them.

use alloc::vec;
use alloc::vec::Vec;

use crate::combin::{binomial, next_combination};
use crate::design::{DefectiveSet, TestMatrix};
use crate::noise::ChannelLaw;

/// Largest number of candidate sets the decoder will enumerate.
pub const MAX_CANDIDATES: u128 = 10_000_000;

/// Absolute tolerance (nats) under which two scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Candidate scores are cached instead of recomputed up to this many sets.
const SCORE_CACHE_LIMIT: u128 = 1 << 22;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("C({n}, {k}) = {candidates} candidate sets exceeds the decoder limit of {limit}")]
    Capacity {
        n: usize,
        k: usize,
        candidates: u128,
        limit: u128,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
}

/// The observed test outcomes `y_1 .. y_T`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct OutcomeVector {
    bits: Vec<bool>,
}

impl OutcomeVector {
    pub fn new(bits: Vec<bool>) -> Self {
        OutcomeVector { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }
}

impl FromIterator<bool> for OutcomeVector {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        OutcomeVector::new(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub estimate: DefectiveSet,
    /// Natural-log likelihood of the estimate; `-inf` if every candidate is
    /// impossible.
    pub log_likelihood: f64,
    /// Number of candidates tied with the estimate (at least 1).
    pub n_ties: u64,
}

fn check_dims(pools: &TestMatrix, y: &OutcomeVector) -> Result<(), DecodeError> {
    if pools.n_tests() != y.len() {
        return Err(DecodeError::Dimension(
            "outcome length differs from number of pools",
        ));
    }
    Ok(())
}

/// `log P(y | candidate)` summed test by test; `-inf` when any test is
/// impossible under the candidate.
pub fn log_likelihood<L: ChannelLaw + ?Sized>(
    law: &L,
    pools: &TestMatrix,
    candidate: &DefectiveSet,
    y: &OutcomeVector,
) -> Result<f64, DecodeError> {
    check_dims(pools, y)?;
    if candidate.iter().any(|i| i >= pools.n_items()) {
        return Err(DecodeError::Dimension(
            "candidate item outside the pool range",
        ));
    }
    let mut total = 0.0;
    for (pool, &outcome) in pools.pools().zip(y.as_slice()) {
        let k = candidate.iter().filter(|&i| pool[i]).count();
        let prob = if outcome {
            law.positive_prob(k)
        } else {
            law.negative_prob(k)
        };
        if prob <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += libm::log(prob);
    }
    Ok(total)
}

/// Per-item test-membership masks and the outcome mask, 64 tests per word.
struct Packed {
    words: usize,
    items: Vec<u64>,
    positive: Vec<u64>,
    valid: Vec<u64>,
}

impl Packed {
    fn new(pools: &TestMatrix, y: &OutcomeVector) -> Self {
        let n = pools.n_items();
        let t = pools.n_tests();
        let words = t.div_ceil(64);
        let mut items = vec![0u64; n * words];
        let mut positive = vec![0u64; words];
        let mut valid = vec![0u64; words];
        for (test, pool) in pools.pools().enumerate() {
            let (w, bit) = (test / 64, 1u64 << (test % 64));
            valid[w] |= bit;
            if y.as_slice()[test] {
                positive[w] |= bit;
            }
            for (i, &inside) in pool.iter().enumerate() {
                if inside {
                    items[i * words + w] |= bit;
                }
            }
        }
        Packed {
            words,
            items,
            positive,
            valid,
        }
    }

    fn item(&self, i: usize) -> &[u64] {
        &self.items[i * self.words..(i + 1) * self.words]
    }
}

/// Scores candidates from bit-sliced per-test counts.
struct Scorer<'a> {
    packed: &'a Packed,
    /// `log P(y = 0 | j)` and `log P(y = 1 | j)` for `j = 0..=k`.
    log_neg: Vec<f64>,
    log_pos: Vec<f64>,
    counts: Vec<[u32; 2]>,
    bits: Vec<u64>,
}

impl<'a> Scorer<'a> {
    fn new<L: ChannelLaw + ?Sized>(law: &L, packed: &'a Packed, k: usize) -> Self {
        let ln = |p: f64| {
            if p > 0.0 {
                libm::log(p)
            } else {
                f64::NEG_INFINITY
            }
        };
        let planes = (usize::BITS - k.leading_zeros()) as usize;
        Scorer {
            packed,
            log_neg: (0..=k).map(|j| ln(law.negative_prob(j))).collect(),
            log_pos: (0..=k).map(|j| ln(law.positive_prob(j))).collect(),
            counts: vec![[0; 2]; k + 1],
            bits: vec![0; planes],
        }
    }

    fn score(&mut self, candidate: &[usize]) -> f64 {
        for c in self.counts.iter_mut() {
            *c = [0, 0];
        }
        for w in 0..self.packed.words {
            // binary counter of candidate members per test, one plane per bit
            self.bits.iter_mut().for_each(|b| *b = 0);
            for &i in candidate {
                let mut carry = self.packed.item(i)[w];
                for plane in self.bits.iter_mut() {
                    let sum = *plane ^ carry;
                    carry &= *plane;
                    *plane = sum;
                    if carry == 0 {
                        break;
                    }
                }
            }
            let valid = self.packed.valid[w];
            let pos = self.packed.positive[w];
            for (j, slot) in self.counts.iter_mut().enumerate() {
                let mut class = valid;
                for (b, plane) in self.bits.iter().enumerate() {
                    class &= if (j >> b) & 1 == 1 { *plane } else { !*plane };
                }
                slot[1] += (class & pos).count_ones();
                slot[0] += (class & !pos).count_ones();
            }
        }
        let mut total = 0.0;
        for (j, &[neg, posc]) in self.counts.iter().enumerate() {
            for (count, logp) in [(neg, self.log_neg[j]), (posc, self.log_pos[j])] {
                if count > 0 {
                    total += f64::from(count) * logp;
                }
            }
        }
        total
    }
}

fn is_tied(score: f64, best: f64) -> bool {
    if best == f64::NEG_INFINITY {
        score == f64::NEG_INFINITY
    } else {
        score >= best - TIE_TOLERANCE
    }
}

/// Exhaustive ML decode over all `k`-subsets of `0..n` in lexicographic order.
///
/// Refuses (rather than approximating) when `C(n, k)` exceeds
/// [`MAX_CANDIDATES`].
pub fn ml_decode<L: ChannelLaw + ?Sized>(
    law: &L,
    pools: &TestMatrix,
    y: &OutcomeVector,
    n: usize,
    k: usize,
) -> Result<DecodeResult, DecodeError> {
    check_dims(pools, y)?;
    if pools.n_items() != n {
        return Err(DecodeError::Dimension("pool width differs from n"));
    }
    if k > n {
        return Err(DecodeError::Dimension("k exceeds n"));
    }
    let total = binomial(n as u64, k as u64);
    if total > MAX_CANDIDATES {
        return Err(DecodeError::Capacity {
            n,
            k,
            candidates: total,
            limit: MAX_CANDIDATES,
        });
    }

    let packed = Packed::new(pools, y);
    let mut scorer = Scorer::new(law, &packed, k);
    let first: Vec<usize> = (0..k).collect();

    let mut best = f64::NEG_INFINITY;
    let mut cache = Vec::new();
    let caching = total <= SCORE_CACHE_LIMIT;
    if caching {
        cache.reserve(total as usize);
    }
    let mut idx = first.clone();
    loop {
        let s = scorer.score(&idx);
        if s > best {
            best = s;
        }
        if caching {
            cache.push(s);
        }
        if !next_combination(&mut idx, n) {
            break;
        }
    }

    let mut estimate: Option<(Vec<usize>, f64)> = None;
    let mut n_ties = 0u64;
    let mut idx = first;
    let mut rank = 0usize;
    loop {
        let s = if caching {
            cache[rank]
        } else {
            scorer.score(&idx)
        };
        if is_tied(s, best) {
            n_ties += 1;
            if estimate.is_none() {
                estimate = Some((idx.clone(), s));
            }
        }
        rank += 1;
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    let (members, log_likelihood) = estimate.expect("the maximum is always attained");
    Ok(DecodeResult {
        estimate: DefectiveSet::from_sorted(members),
        log_likelihood,
        n_ties,
    })
}
