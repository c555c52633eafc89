//! Built-in self-check: closed-form information against joint enumeration,
//! and simulated error against the Fano floor.

use gtlab_core::bounds::{mutual_information_bruteforce_for, mutual_information_for, t_lower};
use gtlab_core::{ChannelLaw, ExperimentConfig, NoiseModel, PGrid, Strategy};
use rayon::ThreadPool;

use crate::format::fmt_sig;
use crate::runner;

pub const MI_TOLERANCE: f64 = 1e-10;

pub const VERIFY_SEED: u64 = 2024;

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    pub quick: bool,
    /// Corrupts one model's positive rate on the closed-form side.
    pub inject_fault: bool,
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {} ({})", self.name, self.detail)
    }
}

struct Flipped<'a>(&'a NoiseModel);

impl ChannelLaw for Flipped<'_> {
    fn positive_prob(&self, k: usize) -> f64 {
        let f = self.0.positive_prob(k);
        if k == 1 {
            1.0 - f
        } else {
            f
        }
    }
}

pub fn mi_models() -> Vec<NoiseModel> {
    vec![
        NoiseModel::noise_free(),
        NoiseModel::addition(0.05).expect("valid"),
        NoiseModel::addition(0.2).expect("valid"),
        NoiseModel::dilution(0.1).expect("valid"),
        NoiseModel::dilution(0.5).expect("valid"),
        NoiseModel::add_dilute(0.1, 0.3).expect("valid"),
    ]
}

/// Largest `|closed form - enumeration|` over K <= `max_k`, every ell and
/// p in {0.1, ..., 0.9}, plus the number of cases.
pub fn mi_max_difference<L: ChannelLaw + ?Sized>(
    closed: &L,
    exact: &NoiseModel,
    max_k: usize,
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for k in 1..=max_k {
        for ell in 0..k {
            for i in 1..=9 {
                let p = i as f64 / 10.0;
                let a = mutual_information_for(closed, k, ell, p).expect("valid arguments");
                let b =
                    mutual_information_bruteforce_for(exact, k, ell, p).expect("valid arguments");
                worst = worst.max((a - b).abs());
                cases += 1;
            }
        }
    }
    (worst, cases)
}

pub fn mi_checks(opts: VerifyOptions) -> Vec<Check> {
    let max_k = if opts.quick { 3 } else { 6 };
    mi_models()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (worst, cases) = if opts.inject_fault && i == 1 {
                mi_max_difference(&Flipped(m), m, max_k)
            } else {
                mi_max_difference(m, m, max_k)
            };
            Check {
                name: format!("mi-identity {m} K<={max_k}"),
                passed: worst <= MI_TOLERANCE,
                detail: format!("{cases} cases, max diff {}", fmt_sig(worst)),
            }
        })
        .collect()
}

/// The preset grid: three models by three strategies by four budgets at
/// N = 50, K = 2.
pub fn fano_presets(trials: usize, seed: u64) -> Vec<ExperimentConfig> {
    let (n, k) = (50, 2);
    let models = [
        NoiseModel::noise_free(),
        NoiseModel::addition(0.1).expect("valid"),
        NoiseModel::dilution(0.5).expect("valid"),
    ];
    let mut out = Vec::new();
    for model in models {
        let p = t_lower(&model, n, k, PGrid::default())
            .expect("valid size")
            .p_star;
        for strategy in [
            Strategy::Bernoulli { p },
            Strategy::BinarySplit,
            Strategy::StagedBernoulli { p, stage: 5 },
        ] {
            for t in [5, 10, 15, 20] {
                let mut cfg = ExperimentConfig::new(n, k, model, strategy, t, trials, seed);
                cfg.checks.fano = true;
                out.push(cfg);
            }
        }
    }
    out
}

pub fn fano_checks(pool: &ThreadPool, opts: VerifyOptions) -> anyhow::Result<Vec<Check>> {
    let trials = if opts.quick { 200 } else { 2000 };
    fano_presets(trials, VERIFY_SEED)
        .iter()
        .map(|cfg| {
            let s = runner::run_experiment(pool, cfg)?;
            let floor = s.fano_floor.unwrap_or(0.0);
            Ok(Check {
                name: format!("fano {} {} T={}", cfg.model, cfg.strategy, cfg.n_tests),
                passed: !s.floor_violated,
                detail: format!(
                    "error {} +/- {} vs floor {}",
                    fmt_sig(s.error_rate),
                    fmt_sig(3.0 * s.std_error),
                    fmt_sig(floor)
                ),
            })
        })
        .collect()
}

pub fn run(pool: &ThreadPool, opts: VerifyOptions) -> anyhow::Result<Vec<Check>> {
    let mut checks = mi_checks(opts);
    checks.extend(fano_checks(pool, opts)?);
    Ok(checks)
}
