//! Information quantities and test-count bounds, in bits.
//!
//! For IID Bernoulli(`p`) pools and a model where only the defective count
//! matters, the per-test information that `Y` carries about the `K - ell`
//! unknown defectives once the other `ell` are revealed is
//!
//! ```text
//! I(X_unknown : X_known, Y) = H(Y | X_known) - H(Y | X_all)
//! ```
//!
//! and because `Y` depends on the pool only through the defective count,
//! both entropies reduce to sums over binomial counts (see
//! [`mutual_information`]). [`mutual_information_bruteforce`] evaluates the
//! same quantity from the full `2^K x 2` joint table and serves as the oracle.
//!
//! The bounds take `max` over the revealed-set size `ell` (items are
//! exchangeable, so only the size matters) and `min` over a grid of `p`:
//!
//! ```text
//! T_lower = min_p max_{0 <= ell < K}  log2 C(N - ell, K - ell)        / I(K, ell, p)
//! T_upper = min_p max_{1 <= ell < K}  log2 [C(N - K, ell) C(K, ell)]  / I(K, ell, p)
//! ```
//!
//! `T_upper` excludes `ell = K`, where the information term vanishes, and for
//! `K = 1` (where that leaves nothing) uses `log2 N / I(1, 0, p)`. The report
//! records this in `upper_convention`. [`MiOrientation::Swapped`] evaluates
//! the upper bound with the roles of the two item groups exchanged instead.

use alloc::vec;
use alloc::vec::Vec;

use crate::combin::{binomial_pmf, log2_binomial};
use crate::noise::{ChannelLaw, NoiseModel};

/// Default spacing of the `p` grid.
pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Largest `K` the joint-table oracle accepts.
pub const BRUTEFORCE_MAX_K: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("entropy argument {0} is not a probability")]
    Domain(f64),
    #[error("grid step {0} must be 1/m for an integer m >= 2")]
    BadGrid(f64),
    #[error("inclusion probability must lie strictly inside (0, 1), got {0}")]
    BadInclusion(f64),
    #[error("revealed set size {ell} must be below K = {k}")]
    BadEll { k: usize, ell: usize },
    #[error("need N > K >= 1, got N = {n}, K = {k}")]
    BadSize { n: usize, k: usize },
    #[error("joint enumeration supports K <= {max}, got {k}")]
    TooLarge { k: usize, max: usize },
}

/// `h(x)` without domain checks; callers guarantee `x` in `[0, 1]`.
pub(crate) fn entropy_bits(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * libm::log2(x) - (1.0 - x) * libm::log2(1.0 - x)
    }
}

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64, BoundsError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(BoundsError::Domain(x));
    }
    Ok(entropy_bits(x))
}

/// The grid `{1/m, 2/m, ..., (m-1)/m}` with step `1/m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PGrid {
    divisions: u32,
}

impl PGrid {
    pub fn new(step: f64) -> Result<Self, BoundsError> {
        if !(step > 0.0 && step <= 0.5) {
            return Err(BoundsError::BadGrid(step));
        }
        let m = libm::round(1.0 / step);
        if libm::fabs(m * step - 1.0) > 1e-9 || m > f64::from(u32::MAX) {
            return Err(BoundsError::BadGrid(step));
        }
        Ok(PGrid {
            divisions: m as u32,
        })
    }

    pub fn step(&self) -> f64 {
        1.0 / f64::from(self.divisions)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + Clone {
        let m = self.divisions;
        (1..m).map(move |i| f64::from(i) / f64::from(m))
    }
}

impl Default for PGrid {
    fn default() -> Self {
        PGrid { divisions: 100 }
    }
}

/// Arguments of the per-test information: `K` defectives, `ell` of them
/// revealed, Bernoulli(`p`) inclusion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiSpec {
    pub model: NoiseModel,
    pub k: usize,
    pub ell: usize,
    pub p: f64,
}

impl MiSpec {
    pub fn new(model: NoiseModel, k: usize, ell: usize, p: f64) -> Result<Self, BoundsError> {
        check_mi_args(k, ell, p)?;
        Ok(MiSpec { model, k, ell, p })
    }
}

fn check_mi_args(k: usize, ell: usize, p: f64) -> Result<(), BoundsError> {
    if ell >= k {
        return Err(BoundsError::BadEll { k, ell });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(BoundsError::BadInclusion(p));
    }
    Ok(())
}

/// Closed-form `I(X_unknown : X_known, Y)` in bits per test.
pub fn mutual_information(spec: &MiSpec) -> f64 {
    mi_closed_form(&spec.model, spec.k, spec.ell, spec.p)
}

/// [`mutual_information`] for an arbitrary channel law.
pub fn mutual_information_for<L: ChannelLaw + ?Sized>(
    law: &L,
    k: usize,
    ell: usize,
    p: f64,
) -> Result<f64, BoundsError> {
    check_mi_args(k, ell, p)?;
    Ok(mi_closed_form(law, k, ell, p))
}

fn mi_closed_form<L: ChannelLaw + ?Sized>(law: &L, k: usize, ell: usize, p: f64) -> f64 {
    let unknown = k - ell;
    // H(Y | X_known): condition on j revealed defectives in the pool, average
    // the positive rate over the i unknown ones
    let mut h_known = 0.0;
    for j in 0..=ell {
        let rate: f64 = (0..=unknown)
            .map(|i| binomial_pmf(unknown, i, p) * law.positive_prob(j + i))
            .sum();
        h_known += binomial_pmf(ell, j, p) * entropy_bits(rate.clamp(0.0, 1.0));
    }
    let h_all: f64 = (0..=k)
        .map(|j| binomial_pmf(k, j, p) * entropy_bits(law.positive_prob(j)))
        .sum();
    (h_known - h_all).max(0.0)
}

/// Oracle: the same information from the full joint distribution of
/// `(X_1 .. X_K, Y)`, with the first `ell` items revealed.
pub fn mutual_information_bruteforce(spec: &MiSpec) -> Result<f64, BoundsError> {
    mutual_information_bruteforce_for(&spec.model, spec.k, spec.ell, spec.p)
}

pub fn mutual_information_bruteforce_for<L: ChannelLaw + ?Sized>(
    law: &L,
    k: usize,
    ell: usize,
    p: f64,
) -> Result<f64, BoundsError> {
    check_mi_args(k, ell, p)?;
    if k > BRUTEFORCE_MAX_K {
        return Err(BoundsError::TooLarge {
            k,
            max: BRUTEFORCE_MAX_K,
        });
    }
    mutual_information_bruteforce_subset(law, k, (1u32 << ell) - 1, p)
}

/// Joint-table information with an explicit revealed subset: bit `i` of
/// `known_mask` set means item `i` of the defective set is revealed.
pub fn mutual_information_bruteforce_subset<L: ChannelLaw + ?Sized>(
    law: &L,
    k: usize,
    known_mask: u32,
    p: f64,
) -> Result<f64, BoundsError> {
    if k > BRUTEFORCE_MAX_K {
        return Err(BoundsError::TooLarge {
            k,
            max: BRUTEFORCE_MAX_K,
        });
    }
    let full = (1u32 << k) - 1;
    let known_mask = known_mask & full;
    let ell = known_mask.count_ones() as usize;
    check_mi_args(k, ell, p)?;

    let gather = |x: u32, mask: u32| -> usize {
        let mut out = 0usize;
        let mut slot = 0;
        for bit in 0..k {
            if mask >> bit & 1 == 1 {
                out |= ((x >> bit & 1) as usize) << slot;
                slot += 1;
            }
        }
        out
    };

    let mut p_unknown = vec![0.0; 1 << (k - ell)];
    let mut p_known_y = vec![0.0; 2 << ell];
    let mut h_joint = 0.0;
    for x in 0..=full {
        let ones = x.count_ones() as usize;
        let weight = libm::pow(p, ones as f64) * libm::pow(1.0 - p, (k - ones) as f64);
        let a = gather(x, full & !known_mask);
        let b = gather(x, known_mask);
        for (y, py) in [(0, law.negative_prob(ones)), (1, law.positive_prob(ones))] {
            let mass = weight * py;
            p_unknown[a] += mass;
            p_known_y[2 * b + y] += mass;
            if mass > 0.0 {
                h_joint -= mass * libm::log2(mass);
            }
        }
    }
    let entropy = |dist: &[f64]| -> f64 {
        dist.iter()
            .filter(|&&m| m > 0.0)
            .map(|&m| -m * libm::log2(m))
            .sum()
    };
    Ok(entropy(&p_unknown) + entropy(&p_known_y) - h_joint)
}

/// Which item group plays the unknown role in the upper bound's
/// information term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MiOrientation {
    /// `I(X_{K \ L} : X_L, Y)` with `|L| = ell`, `ell` in `1..K`.
    #[default]
    AsPrinted,
    /// `I(X_L : X_{K \ L}, Y)`, `ell` in `1..=K`.
    Swapped,
}

impl MiOrientation {
    pub fn as_str(&self) -> &'static str {
        match self {
            MiOrientation::AsPrinted => "as-printed",
            MiOrientation::Swapped => "swapped",
        }
    }

    fn convention(&self) -> &'static str {
        match self {
            MiOrientation::AsPrinted => {
                "upper: ell in 1..K-1 with I(K, ell); K=1 uses log2 N / I(1, 0)"
            }
            MiOrientation::Swapped => "upper: ell in 1..K with I(K, K-ell)",
        }
    }
}

impl core::str::FromStr for MiOrientation {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "as-printed" => Ok(MiOrientation::AsPrinted),
            "swapped" => Ok(MiOrientation::Swapped),
            _ => Err(()),
        }
    }
}

/// One `log2(count) / I` term of a bound: its `ell`, the numerator, and the
/// number of revealed items in the information term.
#[derive(Clone, Copy, Debug)]
struct Term {
    ell: usize,
    numerator: f64,
    known: usize,
}

fn check_size(n: usize, k: usize) -> Result<(), BoundsError> {
    if k == 0 || n <= k {
        return Err(BoundsError::BadSize { n, k });
    }
    Ok(())
}

fn lower_terms(n: usize, k: usize) -> Vec<Term> {
    (0..k)
        .map(|ell| Term {
            ell,
            numerator: log2_binomial((n - ell) as u64, (k - ell) as u64),
            known: ell,
        })
        .collect()
}

fn upper_terms(n: usize, k: usize, orientation: MiOrientation) -> Vec<Term> {
    let numerator = |ell: usize| {
        log2_binomial((n - k) as u64, ell as u64) + log2_binomial(k as u64, ell as u64)
    };
    match orientation {
        MiOrientation::AsPrinted if k == 1 => vec![Term {
            ell: 0,
            numerator: libm::log2(n as f64),
            known: 0,
        }],
        MiOrientation::AsPrinted => (1..k)
            .map(|ell| Term {
                ell,
                numerator: numerator(ell),
                known: ell,
            })
            .collect(),
        MiOrientation::Swapped => (1..=k)
            .map(|ell| Term {
                ell,
                numerator: numerator(ell),
                known: k - ell,
            })
            .collect(),
    }
}

/// `I(K, known, p)` for `known = 0..K`.
fn info_by_known<L: ChannelLaw + ?Sized>(law: &L, k: usize, p: f64) -> Vec<f64> {
    (0..k)
        .map(|known| mi_closed_form(law, k, known, p))
        .collect()
}

fn ratio(term: &Term, info: &[f64]) -> Option<f64> {
    if term.numerator == f64::NEG_INFINITY {
        // no way to choose ell items: the term does not exist
        return None;
    }
    Some(term.numerator / info[term.known])
}

/// Value of one bound and where it is attained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundFragment {
    pub value: f64,
    pub p_star: f64,
    pub ell_star: usize,
}

fn minimax<L: ChannelLaw + ?Sized>(
    law: &L,
    k: usize,
    terms: &[Term],
    grid: PGrid,
) -> BoundFragment {
    let mut best: Option<BoundFragment> = None;
    for p in grid.points() {
        let info = info_by_known(law, k, p);
        let mut inner: Option<(f64, usize)> = None;
        for term in terms {
            if let Some(r) = ratio(term, &info) {
                if inner.is_none_or(|(v, _)| r > v) {
                    inner = Some((r, term.ell));
                }
            }
        }
        let (value, ell_star) = inner.expect("every bound has at least one term");
        if best.is_none_or(|b| value < b.value) {
            best = Some(BoundFragment {
                value,
                p_star: p,
                ell_star,
            });
        }
    }
    best.expect("grid has at least one point")
}

/// Lower bound `T_lower` (the converse side).
pub fn t_lower<L: ChannelLaw + ?Sized>(
    law: &L,
    n: usize,
    k: usize,
    grid: PGrid,
) -> Result<BoundFragment, BoundsError> {
    check_size(n, k)?;
    Ok(minimax(law, k, &lower_terms(n, k), grid))
}

/// Upper bound `T_upper` in the default orientation.
pub fn t_upper<L: ChannelLaw + ?Sized>(
    law: &L,
    n: usize,
    k: usize,
    grid: PGrid,
) -> Result<BoundFragment, BoundsError> {
    t_upper_oriented(law, n, k, grid, MiOrientation::AsPrinted)
}

pub fn t_upper_oriented<L: ChannelLaw + ?Sized>(
    law: &L,
    n: usize,
    k: usize,
    grid: PGrid,
    orientation: MiOrientation,
) -> Result<BoundFragment, BoundsError> {
    check_size(n, k)?;
    Ok(minimax(law, k, &upper_terms(n, k, orientation), grid))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundsRow {
    pub p: f64,
    pub ell: usize,
    pub ratio_upper: Option<f64>,
    pub ratio_lower: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundsReport {
    pub t_upper: f64,
    pub t_lower: f64,
    pub p_star_upper: f64,
    pub p_star_lower: f64,
    pub ell_star_upper: usize,
    pub ell_star_lower: usize,
    pub log_base: &'static str,
    pub grid_step: f64,
    pub mi_orientation: MiOrientation,
    pub upper_convention: &'static str,
    pub table: Vec<BoundsRow>,
}

/// Both bounds plus the full `(p, ell)` ratio table.
pub fn bounds_report<L: ChannelLaw + ?Sized>(
    law: &L,
    n: usize,
    k: usize,
    grid: PGrid,
    orientation: MiOrientation,
) -> Result<BoundsReport, BoundsError> {
    check_size(n, k)?;
    let upper_terms = upper_terms(n, k, orientation);
    let lower_terms = lower_terms(n, k);
    let upper = minimax(law, k, &upper_terms, grid);
    let lower = minimax(law, k, &lower_terms, grid);

    let max_ell = match orientation {
        MiOrientation::AsPrinted => k - 1,
        MiOrientation::Swapped => k,
    };
    let mut table = Vec::new();
    for p in grid.points() {
        let info = info_by_known(law, k, p);
        for ell in 0..=max_ell {
            let find = |terms: &[Term]| {
                terms
                    .iter()
                    .find(|t| t.ell == ell)
                    .and_then(|t| ratio(t, &info))
            };
            table.push(BoundsRow {
                p,
                ell,
                ratio_upper: find(&upper_terms),
                ratio_lower: find(&lower_terms),
            });
        }
    }

    Ok(BoundsReport {
        t_upper: upper.value,
        t_lower: lower.value,
        p_star_upper: upper.p_star,
        p_star_lower: lower.p_star,
        ell_star_upper: upper.ell_star,
        ell_star_lower: lower.ell_star,
        log_base: "bits",
        grid_step: grid.step(),
        mi_orientation: orientation,
        upper_convention: orientation.convention(),
        table,
    })
}

/// How the information term of the Fano floor is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PMode {
    /// The information of a Bernoulli(`p`) design.
    Fixed(f64),
    /// The largest information over the grid, for a floor that does not
    /// depend on the design.
    MaxOverGrid(PGrid),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FanoFloor {
    /// `raw` clamped to `[0, 1]`.
    pub floor: f64,
    /// Unclamped right-hand side; negative means the floor is not binding.
    pub raw: f64,
    pub ell_star: usize,
}

/// Smallest achievable error after `tests` tests, maximized over `ell`:
///
/// ```text
/// eps >= 1 - T I / log2 C(N - ell, K - ell) - 1 / log2 C(N - ell, K - ell)
/// ```
pub fn fano_floor<L: ChannelLaw + ?Sized>(
    law: &L,
    n: usize,
    k: usize,
    tests: usize,
    mode: PMode,
) -> Result<FanoFloor, BoundsError> {
    check_size(n, k)?;
    if let PMode::Fixed(p) = mode {
        if !(p > 0.0 && p < 1.0) {
            return Err(BoundsError::BadInclusion(p));
        }
    }
    let mut best: Option<(f64, usize)> = None;
    for ell in 0..k {
        let log_count = log2_binomial((n - ell) as u64, (k - ell) as u64);
        let info = match mode {
            PMode::Fixed(p) => mi_closed_form(law, k, ell, p),
            PMode::MaxOverGrid(grid) => grid
                .points()
                .map(|p| mi_closed_form(law, k, ell, p))
                .fold(0.0, f64::max),
        };
        let raw = 1.0 - tests as f64 * info / log_count - 1.0 / log_count;
        if best.is_none_or(|(v, _)| raw > v) {
            best = Some((raw, ell));
        }
    }
    let (raw, ell_star) = best.expect("k >= 1");
    Ok(FanoFloor {
        floor: raw.clamp(0.0, 1.0),
        raw,
        ell_star,
    })
}
