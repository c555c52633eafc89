//! Test pools and the strategies that produce them.
//!
//! A strategy is driven one pool at a time through [`StrategyState::next_pool`],
//! which receives the full `(pool, outcome)` history so far. Pools are
//! committed in stages of `S`: with `S = 1` every pool may react to every
//! earlier outcome, with `S = budget` the whole design is fixed up front.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::bounds::{self, BoundsError, PGrid};
use crate::noise::NoiseModel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DesignError {
    #[error("inclusion probability must lie strictly inside (0, 1), got {0}")]
    BadInclusion(f64),
    #[error("stage size must be at least 1")]
    BadStageSize,
    #[error("need at least one item")]
    NoItems,
    #[error("pool has {got} entries, expected {expected}")]
    PoolLength { expected: usize, got: usize },
    #[error("defective set is invalid for {n} items: {reason}")]
    BadDefectiveSet { n: usize, reason: &'static str },
    #[error("history has {got} entries but {expected} pools were issued")]
    HistoryLength { expected: usize, got: usize },
    #[error("history entry {index} does not match the pool this strategy issued")]
    HistoryMismatch { index: usize },
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("malformed strategy parameter `{0}`")]
    Malformed(String),
    #[error("strategy `{kind}` needs parameter `{key}`")]
    MissingParam {
        kind: &'static str,
        key: &'static str,
    },
    #[error("could not resolve p=opt: {0}")]
    Resolve(#[from] BoundsError),
}

/// One test pool: `members[i]` is true iff item `i` is in the pool.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pool {
    members: Vec<bool>,
}

impl Pool {
    pub fn new(members: Vec<bool>) -> Self {
        Pool { members }
    }

    pub fn empty(n_items: usize) -> Self {
        Pool {
            members: vec![false; n_items],
        }
    }

    pub fn from_items(n_items: usize, items: impl IntoIterator<Item = usize>) -> Self {
        let mut pool = Self::empty(n_items);
        for i in items {
            pool.members[i] = true;
        }
        pool
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.members.get(item).copied().unwrap_or(false)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.members
    }

    pub fn items(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Number of members of `set` in this pool (the `k_t` of the channel).
    pub fn defectives_in(&self, set: &DefectiveSet) -> usize {
        set.iter().filter(|&i| self.contains(i)).count()
    }
}

/// An `N x T` inclusion matrix, stored pool-major (`bits[t * N + i]`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestMatrix {
    n_items: usize,
    n_tests: usize,
    bits: Vec<bool>,
}

impl TestMatrix {
    /// A matrix with no tests yet.
    pub fn new(n_items: usize) -> Self {
        TestMatrix {
            n_items,
            n_tests: 0,
            bits: Vec::new(),
        }
    }

    pub fn from_pools<'a>(
        n_items: usize,
        pools: impl IntoIterator<Item = &'a Pool>,
    ) -> Result<Self, DesignError> {
        let mut m = Self::new(n_items);
        for pool in pools {
            m.push_pool(pool)?;
        }
        Ok(m)
    }

    pub fn push_pool(&mut self, pool: &Pool) -> Result<(), DesignError> {
        if pool.len() != self.n_items {
            return Err(DesignError::PoolLength {
                expected: self.n_items,
                got: pool.len(),
            });
        }
        self.bits.extend_from_slice(pool.as_slice());
        self.n_tests += 1;
        Ok(())
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_tests(&self) -> usize {
        self.n_tests
    }

    /// `x_it`.
    pub fn get(&self, item: usize, test: usize) -> bool {
        assert!(item < self.n_items && test < self.n_tests);
        self.bits[test * self.n_items + item]
    }

    pub fn pool(&self, test: usize) -> &[bool] {
        &self.bits[test * self.n_items..(test + 1) * self.n_items]
    }

    pub fn pools(&self) -> impl Iterator<Item = &[bool]> + '_ {
        // chunks_exact panics on a zero chunk size
        self.bits.chunks(self.n_items.max(1)).take(self.n_tests)
    }
}

/// Sorted, distinct item indices below `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct DefectiveSet {
    members: Vec<usize>,
}

impl DefectiveSet {
    /// Validates and sorts `members`.
    pub fn new(n_items: usize, mut members: Vec<usize>) -> Result<Self, DesignError> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(DesignError::BadDefectiveSet {
                n: n_items,
                reason: "duplicate item",
            });
        }
        if members.last().is_some_and(|&m| m >= n_items) {
            return Err(DesignError::BadDefectiveSet {
                n: n_items,
                reason: "item index out of range",
            });
        }
        Ok(DefectiveSet { members })
    }

    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        DefectiveSet { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.members.binary_search(&item).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.members
    }
}

impl fmt::Display for DefectiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("}")
    }
}

fn check_inclusion(p: f64) -> Result<f64, DesignError> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(DesignError::BadInclusion(p))
    }
}

fn bernoulli_pool<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Pool {
    Pool::new((0..n).map(|_| rng.random::<f64>() < p).collect())
}

/// IID Bernoulli(`p`) design with `t` pools over `n` items.
///
/// Entries are drawn pool by pool, item by item, one `f64` each.
pub fn gen_bernoulli_matrix<R: Rng + ?Sized>(
    n: usize,
    t: usize,
    p: f64,
    rng: &mut R,
) -> Result<TestMatrix, DesignError> {
    check_inclusion(p)?;
    if n == 0 {
        return Err(DesignError::NoItems);
    }
    let mut m = TestMatrix::new(n);
    for _ in 0..t {
        m.push_pool(&bernoulli_pool(n, p, rng))?;
    }
    Ok(m)
}

/// A concrete pooling strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    /// Fully nonadaptive Bernoulli(`p`) design.
    Bernoulli { p: f64 },
    /// Halving search; exact under the noise-free model.
    BinarySplit,
    /// Bernoulli(`p`) pools committed `stage` at a time. Items seen in a
    /// negative pool are left out of later stages.
    StagedBernoulli { p: f64, stage: usize },
}

impl Strategy {
    pub fn validate(&self) -> Result<(), DesignError> {
        match *self {
            Strategy::Bernoulli { p } => check_inclusion(p).map(drop),
            Strategy::BinarySplit => Ok(()),
            Strategy::StagedBernoulli { p, stage } => {
                check_inclusion(p)?;
                if stage == 0 {
                    return Err(DesignError::BadStageSize);
                }
                Ok(())
            }
        }
    }

    /// Whether the estimate comes from maximum-likelihood decoding of the
    /// transcript (as opposed to the strategy's own search state).
    pub fn uses_ml_decoding(&self) -> bool {
        !matches!(self, Strategy::BinarySplit)
    }

    pub fn inclusion(&self) -> Option<f64> {
        match *self {
            Strategy::Bernoulli { p } | Strategy::StagedBernoulli { p, .. } => Some(p),
            Strategy::BinarySplit => None,
        }
    }

    pub fn with_inclusion(&self, p: f64) -> Option<Self> {
        match *self {
            Strategy::Bernoulli { .. } => Some(Strategy::Bernoulli { p }),
            Strategy::StagedBernoulli { stage, .. } => Some(Strategy::StagedBernoulli { p, stage }),
            Strategy::BinarySplit => None,
        }
    }

    /// Starts a fresh run over `n_items` with `k_defects` defectives and at
    /// most `budget` tests. `rng` supplies all design randomness.
    pub fn start<R: Rng>(
        &self,
        n_items: usize,
        k_defects: usize,
        budget: usize,
        rng: R,
    ) -> Result<StrategyState<R>, DesignError> {
        self.validate()?;
        if n_items == 0 {
            return Err(DesignError::NoItems);
        }
        Ok(match *self {
            Strategy::Bernoulli { p } => {
                StrategyState::Staged(StagedBernoulli::new(n_items, p, budget.max(1), budget, rng))
            }
            Strategy::StagedBernoulli { p, stage } => {
                StrategyState::Staged(StagedBernoulli::new(n_items, p, stage, budget, rng))
            }
            Strategy::BinarySplit => {
                StrategyState::BinarySplit(BinarySplit::new(n_items, k_defects, budget))
            }
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Strategy::Bernoulli { p } => write!(f, "bernoulli:p={p}"),
            Strategy::BinarySplit => f.write_str("binary-split"),
            Strategy::StagedBernoulli { p, stage } => write!(f, "staged:p={p},s={stage}"),
        }
    }
}

/// Inclusion probability as written on the command line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PChoice {
    Value(f64),
    /// The grid point minimizing the lower bound `T_lower`.
    Optimal,
}

impl fmt::Display for PChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PChoice::Value(p) => write!(f, "{p}"),
            PChoice::Optimal => f.write_str("opt"),
        }
    }
}

/// A strategy whose inclusion probability may still be `opt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StrategySpec {
    Bernoulli { p: PChoice },
    BinarySplit,
    StagedBernoulli { p: PChoice, stage: usize },
}

impl StrategySpec {
    pub fn with_p(&self, p: PChoice) -> Option<Self> {
        match *self {
            StrategySpec::Bernoulli { .. } => Some(StrategySpec::Bernoulli { p }),
            StrategySpec::StagedBernoulli { stage, .. } => {
                Some(StrategySpec::StagedBernoulli { p, stage })
            }
            StrategySpec::BinarySplit => None,
        }
    }

    /// Replaces `p=opt` by the `T_lower` minimizer for this model and size.
    pub fn resolve(
        &self,
        model: &NoiseModel,
        n_items: usize,
        k_defects: usize,
        grid: PGrid,
    ) -> Result<Strategy, DesignError> {
        let pick = |choice: PChoice| -> Result<f64, DesignError> {
            match choice {
                PChoice::Value(p) => check_inclusion(p),
                PChoice::Optimal => Ok(bounds::t_lower(model, n_items, k_defects, grid)?.p_star),
            }
        };
        let strategy = match *self {
            StrategySpec::Bernoulli { p } => Strategy::Bernoulli { p: pick(p)? },
            StrategySpec::BinarySplit => Strategy::BinarySplit,
            StrategySpec::StagedBernoulli { p, stage } => {
                Strategy::StagedBernoulli { p: pick(p)?, stage }
            }
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

impl From<Strategy> for StrategySpec {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Bernoulli { p } => StrategySpec::Bernoulli {
                p: PChoice::Value(p),
            },
            Strategy::BinarySplit => StrategySpec::BinarySplit,
            Strategy::StagedBernoulli { p, stage } => StrategySpec::StagedBernoulli {
                p: PChoice::Value(p),
                stage,
            },
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Bernoulli { p } => write!(f, "bernoulli:p={p}"),
            StrategySpec::BinarySplit => f.write_str("binary-split"),
            StrategySpec::StagedBernoulli { p, stage } => write!(f, "staged:p={p},s={stage}"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = DesignError;

    /// Parses `bernoulli:p=<f|opt>`, `binary-split` or
    /// `staged:p=<f|opt>,s=<int>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let kind: &'static str = match name.trim() {
            "bernoulli" => "bernoulli",
            "binary-split" => "binary-split",
            "staged" => "staged",
            other => return Err(DesignError::UnknownStrategy(other.into())),
        };
        let mut p = None;
        let mut stage = None;
        for part in params.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let bad = || DesignError::Malformed(part.into());
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            let value = value.trim();
            match (kind, key.trim()) {
                ("bernoulli" | "staged", "p") if p.is_none() => {
                    p = Some(if value == "opt" {
                        PChoice::Optimal
                    } else {
                        PChoice::Value(value.parse().map_err(|_| bad())?)
                    });
                }
                ("staged", "s") if stage.is_none() => {
                    stage = Some(value.parse::<usize>().map_err(|_| bad())?);
                }
                _ => return Err(bad()),
            }
        }
        let p = || p.ok_or(DesignError::MissingParam { kind, key: "p" });
        match kind {
            "bernoulli" => Ok(StrategySpec::Bernoulli { p: p()? }),
            "binary-split" => Ok(StrategySpec::BinarySplit),
            _ => {
                let stage = stage.ok_or(DesignError::MissingParam { kind, key: "s" })?;
                if stage == 0 {
                    return Err(DesignError::BadStageSize);
                }
                Ok(StrategySpec::StagedBernoulli { p: p()?, stage })
            }
        }
    }
}

/// Result of asking a strategy for its next pool.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Pool(Pool),
    Done,
}

/// Bookkeeping shared by the strategies: the pools issued so far and how
/// many history entries have already been checked against them.
#[derive(Clone, Debug)]
struct Issued {
    pools: Vec<Pool>,
    checked: usize,
}

impl Issued {
    fn new() -> Self {
        Issued {
            pools: Vec::new(),
            checked: 0,
        }
    }

    /// Checks new history entries and returns them.
    fn absorb<'h>(
        &mut self,
        history: &'h [(Pool, bool)],
    ) -> Result<&'h [(Pool, bool)], DesignError> {
        if history.len() != self.pools.len() {
            return Err(DesignError::HistoryLength {
                expected: self.pools.len(),
                got: history.len(),
            });
        }
        for (index, (pool, _)) in history.iter().enumerate().skip(self.checked) {
            if *pool != self.pools[index] {
                return Err(DesignError::HistoryMismatch { index });
            }
        }
        let fresh = &history[self.checked..];
        self.checked = history.len();
        Ok(fresh)
    }

    fn issue(&mut self, pool: Pool) -> Step {
        self.pools.push(pool.clone());
        Step::Pool(pool)
    }
}

/// Bernoulli pools drawn `stage` at a time.
///
/// Every item costs one uniform draw per pool whether or not it has been
/// cleared, so the design stream advances identically for every outcome
/// sequence; a single stage therefore reproduces [`gen_bernoulli_matrix`].
#[derive(Clone, Debug)]
pub struct StagedBernoulli<R> {
    n_items: usize,
    p: f64,
    stage: usize,
    budget: usize,
    rng: R,
    cleared: Vec<bool>,
    queued: VecDeque<Pool>,
    issued: Issued,
}

impl<R: Rng> StagedBernoulli<R> {
    pub fn new(n_items: usize, p: f64, stage: usize, budget: usize, rng: R) -> Self {
        StagedBernoulli {
            n_items,
            p,
            stage: stage.max(1),
            budget,
            rng,
            cleared: vec![false; n_items],
            queued: VecDeque::new(),
            issued: Issued::new(),
        }
    }

    pub fn next_pool(&mut self, history: &[(Pool, bool)]) -> Result<Step, DesignError> {
        for (pool, outcome) in self.issued.absorb(history)? {
            if !outcome {
                for i in pool.items() {
                    self.cleared[i] = true;
                }
            }
        }
        let used = self.issued.pools.len();
        if used >= self.budget {
            return Ok(Step::Done);
        }
        if self.queued.is_empty() {
            let size = self.stage.min(self.budget - used);
            for _ in 0..size {
                let members = (0..self.n_items)
                    .map(|i| {
                        let draw = self.rng.random::<f64>() < self.p;
                        draw && !self.cleared[i]
                    })
                    .collect();
                self.queued.push_back(Pool::new(members));
            }
        }
        let pool = self.queued.pop_front().expect("stage is non-empty");
        Ok(self.issued.issue(pool))
    }
}

/// Active halving search: positions `lo .. lo + width` of `candidates`
/// (clipped to its length) are known to hold a defective.
#[derive(Clone, Debug)]
struct Search {
    candidates: Vec<usize>,
    lo: usize,
    width: usize,
}

impl Search {
    fn lower_half(&self) -> core::ops::Range<usize> {
        self.lo..(self.lo + self.width / 2).min(self.candidates.len())
    }
}

/// Generalized binary splitting.
///
/// Repeatedly isolates one defective among the items not yet cleared or
/// found: the candidate list is padded to a power of two and halved, testing
/// the lower half each time, so isolating one defective among `m` candidates
/// always takes exactly `ceil(log2 m)` tests. Negative pools clear their
/// members. Correct under the noise-free model; under noise it still runs but
/// its estimate carries no guarantee.
#[derive(Clone, Debug)]
pub struct BinarySplit {
    n_items: usize,
    k_defects: usize,
    budget: usize,
    cleared: Vec<bool>,
    found: Vec<usize>,
    search: Option<Search>,
    issued: Issued,
}

impl BinarySplit {
    pub fn new(n_items: usize, k_defects: usize, budget: usize) -> Self {
        BinarySplit {
            n_items,
            k_defects,
            budget,
            cleared: vec![false; n_items],
            found: Vec::new(),
            search: None,
            issued: Issued::new(),
        }
    }

    fn apply(&mut self, outcome: bool) {
        let search = self
            .search
            .as_mut()
            .expect("outcome without a pending test");
        let half = search.width / 2;
        if outcome {
            search.width = half;
        } else {
            for pos in search.lower_half() {
                self.cleared[search.candidates[pos]] = true;
            }
            search.lo += half;
            search.width = half;
            if search.lo >= search.candidates.len() {
                // only reachable when noise flips a forced positive
                search.lo -= half;
            }
        }
    }

    pub fn next_pool(&mut self, history: &[(Pool, bool)]) -> Result<Step, DesignError> {
        let fresh = self.issued.absorb(history)?;
        for &(_, outcome) in fresh {
            self.apply(outcome);
        }
        loop {
            if let Some(search) = &self.search {
                if search.width <= 1 {
                    self.found.push(search.candidates[search.lo]);
                    self.search = None;
                }
            }
            if self.found.len() >= self.k_defects {
                return Ok(Step::Done);
            }
            if self.search.is_none() {
                let candidates: Vec<usize> = (0..self.n_items)
                    .filter(|&i| !self.cleared[i] && !self.found.contains(&i))
                    .collect();
                if candidates.is_empty() {
                    return Ok(Step::Done);
                }
                let width = candidates.len().next_power_of_two();
                self.search = Some(Search {
                    candidates,
                    lo: 0,
                    width,
                });
                continue;
            }
            if self.issued.pools.len() >= self.budget {
                return Ok(Step::Done);
            }
            let search = self.search.as_ref().expect("checked above");
            let pool = Pool::from_items(
                self.n_items,
                search.lower_half().map(|pos| search.candidates[pos]),
            );
            return Ok(self.issued.issue(pool));
        }
    }

    /// Found defectives, padded to `k` with the most plausible remaining
    /// items (current search range first, then uncleared, then cleared).
    pub fn estimate(&self) -> DefectiveSet {
        let mut out = self.found.clone();
        let push = |i: usize, out: &mut Vec<usize>| {
            if out.len() < self.k_defects && !out.contains(&i) {
                out.push(i);
            }
        };
        if let Some(s) = &self.search {
            for pos in s.lo..(s.lo + s.width).min(s.candidates.len()) {
                push(s.candidates[pos], &mut out);
            }
        }
        for i in (0..self.n_items).filter(|&i| !self.cleared[i]) {
            push(i, &mut out);
        }
        for i in 0..self.n_items {
            push(i, &mut out);
        }
        out.sort_unstable();
        DefectiveSet::from_sorted(out)
    }

    pub fn tests_used(&self) -> usize {
        self.issued.pools.len()
    }
}

/// A running strategy.
#[derive(Clone, Debug)]
pub enum StrategyState<R> {
    Staged(StagedBernoulli<R>),
    BinarySplit(BinarySplit),
}

impl<R: Rng> StrategyState<R> {
    /// The next pool given every earlier `(pool, outcome)` pair in order, or
    /// [`Step::Done`] when the strategy stops or the budget is spent.
    pub fn next_pool(&mut self, history: &[(Pool, bool)]) -> Result<Step, DesignError> {
        match self {
            StrategyState::Staged(s) => s.next_pool(history),
            StrategyState::BinarySplit(s) => s.next_pool(history),
        }
    }

    /// The strategy's own estimate, for strategies that decode themselves.
    pub fn own_estimate(&self) -> Option<DefectiveSet> {
        match self {
            StrategyState::Staged(_) => None,
            StrategyState::BinarySplit(s) => Some(s.estimate()),
        }
    }
}

/// Runs `strategy` against a noise-free oracle for `truth` and returns the
/// transcript. Test helper for exercising strategies without the harness.
pub fn run_noise_free<R: Rng>(
    state: &mut StrategyState<R>,
    truth: &DefectiveSet,
) -> Result<Vec<(Pool, bool)>, DesignError> {
    let mut history = Vec::new();
    while let Step::Pool(pool) = state.next_pool(&history)? {
        let outcome = pool.defectives_in(truth) > 0;
        history.push((pool, outcome));
    }
    Ok(history)
}
