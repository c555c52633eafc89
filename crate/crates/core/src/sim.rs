//! Seeded Monte Carlo trials.
//!
//! A trial draws a defective set uniformly, runs the strategy against the
//! noisy channel and decodes. Each trial is a pure function of
//! `(config, trial index)`, so trials can run in any order or in parallel and
//! [`summarize`] over the records in index order always gives the same
//! [`RunSummary`].

use alloc::vec::Vec;

use rand::seq::index;

use crate::bounds::{self, BoundsError, PGrid, PMode};
use crate::combin::{binomial, unrank_combination};
use crate::decode::{self, DecodeError, OutcomeVector, MAX_CANDIDATES};
use crate::design::{DefectiveSet, DesignError, Pool, Step, Strategy, TestMatrix};
use crate::noise::{sample_outcome, ModelError, NoiseModel};
use crate::rng::{derive_seed, stream, StreamRole};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Stratified runs enumerate at most this many defective sets.
pub const STRATIFIED_MAX_SETS: u128 = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sweep axis `{axis}` does not apply: {reason}")]
    Axis {
        axis: &'static str,
        reason: &'static str,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Checks {
    pub fano: bool,
    pub bounds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n_items: usize,
    pub k_defects: usize,
    pub model: NoiseModel,
    pub strategy: Strategy,
    /// Test budget `T`. Nonadaptive designs always use all of it.
    pub n_tests: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub checks: Checks,
    /// Cycle through every defective set in lexicographic order instead of
    /// sampling; requires `n_trials` to be a multiple of `C(N, K)`.
    pub stratified: bool,
    pub keep_trials: bool,
}

impl ExperimentConfig {
    pub fn new(
        n_items: usize,
        k_defects: usize,
        model: NoiseModel,
        strategy: Strategy,
        n_tests: usize,
        n_trials: usize,
        seed: u64,
    ) -> Self {
        ExperimentConfig {
            n_items,
            k_defects,
            model,
            strategy,
            n_tests,
            n_trials,
            seed,
            checks: Checks::default(),
            stratified: false,
            keep_trials: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.k_defects == 0 || self.k_defects >= self.n_items {
            return Err(SimError::Config("need 1 <= k < n"));
        }
        if self.n_trials == 0 {
            return Err(SimError::Config("need at least one trial"));
        }
        self.strategy.validate()?;
        let sets = binomial(self.n_items as u64, self.k_defects as u64);
        if self.strategy.uses_ml_decoding() && sets > MAX_CANDIDATES {
            return Err(DecodeError::Capacity {
                n: self.n_items,
                k: self.k_defects,
                candidates: sets,
                limit: MAX_CANDIDATES,
            }
            .into());
        }
        if self.stratified {
            if sets > STRATIFIED_MAX_SETS {
                return Err(SimError::Config("stratified runs need C(n, k) <= 10000"));
            }
            if !(self.n_trials as u128).is_multiple_of(sets) {
                return Err(SimError::Config(
                    "stratified runs need trials to be a multiple of C(n, k)",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrialRecord {
    pub trial: usize,
    pub truth: DefectiveSet,
    pub estimate: DefectiveSet,
    pub error: bool,
    pub tests_used: usize,
    /// Tie count from ML decoding; `None` for self-decoding strategies.
    pub n_ties: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RunSummary {
    pub n_trials: usize,
    pub n_errors: usize,
    pub error_rate: f64,
    /// Binomial standard error of `error_rate`.
    pub std_error: f64,
    /// 95% normal-approximation half-width plus a `1/(2n)` continuity term.
    pub ci_halfwidth: f64,
    pub mean_tests_used: f64,
    /// Design-independent Fano floor at the budget, when requested.
    pub fano_floor: Option<f64>,
    /// `error_rate + 3 std_error < fano_floor`.
    pub floor_violated: bool,
    pub t_lower: Option<f64>,
    pub per_trial: Option<Vec<TrialRecord>>,
}

fn draw_truth(cfg: &ExperimentConfig, trial: usize) -> DefectiveSet {
    let (n, k) = (cfg.n_items, cfg.k_defects);
    if cfg.stratified {
        let sets = binomial(n as u64, k as u64);
        return DefectiveSet::from_sorted(unrank_combination(n, k, trial as u128 % sets));
    }
    let mut rng = stream(cfg.seed, trial as u64, StreamRole::DefectDraw);
    let mut members = index::sample(&mut rng, n, k).into_vec();
    members.sort_unstable();
    DefectiveSet::from_sorted(members)
}

/// Runs trial `trial` of `cfg`. Does not validate `cfg`.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialRecord, SimError> {
    let truth = draw_truth(cfg, trial);

    // stratified blocks share one design so each block averages exactly over
    // all defective sets
    let design_index = if cfg.stratified {
        let sets = binomial(cfg.n_items as u64, cfg.k_defects as u64);
        (trial as u128 / sets) as u64
    } else {
        trial as u64
    };
    let design_rng = stream(cfg.seed, design_index, StreamRole::Design);
    let mut channel = stream(cfg.seed, trial as u64, StreamRole::Channel);

    let mut state = cfg
        .strategy
        .start(cfg.n_items, cfg.k_defects, cfg.n_tests, design_rng)?;
    let mut history: Vec<(Pool, bool)> = Vec::new();
    // the strategy enforces the budget; the final call absorbs the last outcome
    loop {
        match state.next_pool(&history)? {
            Step::Done => break,
            Step::Pool(pool) => {
                debug_assert!(history.len() < cfg.n_tests);
                let k_t = pool.defectives_in(&truth);
                let y = sample_outcome(&cfg.model, k_t, &mut channel);
                history.push((pool, y));
            }
        }
    }

    let tests_used = history.len();
    let (estimate, n_ties) = match state.own_estimate() {
        Some(estimate) => (estimate, None),
        None => {
            let pools = TestMatrix::from_pools(cfg.n_items, history.iter().map(|(p, _)| p))?;
            let y: OutcomeVector = history.iter().map(|&(_, y)| y).collect();
            let r = decode::ml_decode(&cfg.model, &pools, &y, cfg.n_items, cfg.k_defects)?;
            (r.estimate, Some(r.n_ties))
        }
    };
    Ok(TrialRecord {
        trial,
        error: estimate != truth,
        truth,
        estimate,
        tests_used,
        n_ties,
    })
}

/// Aggregates trial records, which must be in trial order.
pub fn summarize(
    cfg: &ExperimentConfig,
    records: Vec<TrialRecord>,
) -> Result<RunSummary, SimError> {
    let n = records.len();
    if n == 0 {
        return Err(SimError::Config("no trial records"));
    }
    let n_errors = records.iter().filter(|r| r.error).count();
    let nf = n as f64;
    let error_rate = n_errors as f64 / nf;
    let std_error = libm::sqrt(error_rate * (1.0 - error_rate) / nf);
    let ci_halfwidth = Z95 * std_error + 0.5 / nf;
    let mean_tests_used = records.iter().map(|r| r.tests_used as f64).sum::<f64>() / nf;

    let fano_floor = if cfg.checks.fano {
        let floor = bounds::fano_floor(
            &cfg.model,
            cfg.n_items,
            cfg.k_defects,
            cfg.n_tests,
            PMode::MaxOverGrid(PGrid::default()),
        )?;
        Some(floor.floor)
    } else {
        None
    };
    let floor_violated = fano_floor.is_some_and(|floor| error_rate + 3.0 * std_error < floor);
    let t_lower = if cfg.checks.bounds {
        Some(bounds::t_lower(&cfg.model, cfg.n_items, cfg.k_defects, PGrid::default())?.value)
    } else {
        None
    };

    Ok(RunSummary {
        n_trials: n,
        n_errors,
        error_rate,
        std_error,
        ci_halfwidth,
        mean_tests_used,
        fano_floor,
        floor_violated,
        t_lower,
        per_trial: cfg.keep_trials.then_some(records),
    })
}

/// Runs every trial sequentially and summarizes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, SimError> {
    cfg.validate()?;
    let records = (0..cfg.n_trials)
        .map(|t| run_trial(cfg, t))
        .collect::<Result<Vec<_>, _>>()?;
    summarize(cfg, records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Tests,
    Inclusion,
    Q,
    U,
    Items,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Tests => "t",
            SweepAxis::Inclusion => "p",
            SweepAxis::Q => "q",
            SweepAxis::U => "u",
            SweepAxis::Items => "n",
        }
    }
}

impl core::str::FromStr for SweepAxis {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(SweepAxis::Tests),
            "p" => Ok(SweepAxis::Inclusion),
            "q" => Ok(SweepAxis::Q),
            "u" => Ok(SweepAxis::U),
            "n" => Ok(SweepAxis::Items),
            _ => Err(()),
        }
    }
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize, SimError> {
    if v >= 0.0 && libm::trunc(v) == v && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(SimError::Axis {
            axis: axis.name(),
            reason: "value must be a nonnegative integer",
        })
    }
}

/// One config per sweep value, with seed `derive_seed(template.seed, i)`.
pub fn sweep_configs(
    template: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<ExperimentConfig>, SimError> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut cfg = template.clone();
            cfg.seed = derive_seed(template.seed, i as u64);
            match axis {
                SweepAxis::Tests => cfg.n_tests = as_count(axis, v)?,
                SweepAxis::Items => cfg.n_items = as_count(axis, v)?,
                SweepAxis::Q => cfg.model = cfg.model.with_q(v)?,
                SweepAxis::U => cfg.model = cfg.model.with_u(v)?,
                SweepAxis::Inclusion => {
                    cfg.strategy = cfg.strategy.with_inclusion(v).ok_or(SimError::Axis {
                        axis: "p",
                        reason: "strategy has no inclusion probability",
                    })?;
                }
            }
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

/// Runs one experiment per sweep value, in input order.
pub fn sweep(
    template: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<RunSummary>, SimError> {
    sweep_configs(template, axis, values)?
        .iter()
        .map(run_experiment)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let nf = NoiseModel::noise_free();
        let base = ExperimentConfig::new(10, 2, nf, Strategy::Bernoulli { p: 0.5 }, 5, 10, 0);
        assert!(base.validate().is_ok());
        let mut c = base.clone();
        c.k_defects = 10;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.n_trials = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.stratified = true;
        c.n_trials = 44;
        assert!(c.validate().is_err());
        c.n_trials = 90;
        assert!(c.validate().is_ok());
        let big = ExperimentConfig::new(100, 6, nf, Strategy::Bernoulli { p: 0.5 }, 5, 1, 0);
        assert!(matches!(
            big.validate(),
            Err(SimError::Decode(DecodeError::Capacity { .. }))
        ));
        let big_split = ExperimentConfig {
            strategy: Strategy::BinarySplit,
            ..big
        };
        assert!(big_split.validate().is_ok());
    }

    #[test]
    fn truth_draws_are_valid_and_replayable() {
        let cfg = ExperimentConfig::new(
            30,
            3,
            NoiseModel::noise_free(),
            Strategy::BinarySplit,
            20,
            5,
            42,
        );
        for t in 0..5 {
            let a = draw_truth(&cfg, t);
            assert_eq!(a.len(), 3);
            assert!(a.iter().all(|i| i < 30));
            assert_eq!(a, draw_truth(&cfg, t));
        }
    }

    #[test]
    fn summary_statistics() {
        let cfg = ExperimentConfig::new(
            5,
            1,
            NoiseModel::noise_free(),
            Strategy::BinarySplit,
            3,
            4,
            0,
        );
        let rec = |trial, error| TrialRecord {
            trial,
            truth: DefectiveSet::from_sorted(alloc::vec![0]),
            estimate: DefectiveSet::from_sorted(alloc::vec![0]),
            error,
            tests_used: 2,
            n_ties: None,
        };
        let s = summarize(
            &cfg,
            alloc::vec![rec(0, true), rec(1, false), rec(2, false), rec(3, false)],
        )
        .unwrap();
        assert_eq!(s.error_rate, 0.25);
        assert!((s.std_error - libm::sqrt(0.25 * 0.75 / 4.0)).abs() < 1e-15);
        assert!((s.ci_halfwidth - (Z95 * s.std_error + 0.125)).abs() < 1e-15);
        assert_eq!(s.mean_tests_used, 2.0);
        assert_eq!(s.fano_floor, None);
        assert!(!s.floor_violated);
        assert!(s.per_trial.is_none());
    }

    #[test]
    fn sweep_rejects_inapplicable_axis() {
        let cfg = ExperimentConfig::new(
            8,
            1,
            NoiseModel::noise_free(),
            Strategy::BinarySplit,
            3,
            4,
            0,
        );
        assert!(matches!(
            sweep_configs(&cfg, SweepAxis::Inclusion, &[0.3]),
            Err(SimError::Axis { .. })
        ));
        assert!(sweep_configs(&cfg, SweepAxis::Tests, &[2.5]).is_err());
        let cfgs = sweep_configs(&cfg, SweepAxis::Q, &[0.0, 0.1]).unwrap();
        assert_eq!(cfgs[1].model, NoiseModel::addition(0.1).unwrap());
        assert_ne!(cfgs[0].seed, cfgs[1].seed);
    }
}
