//! Multi-threaded trial execution with trial-ordered reduction.

use gtlab_core::sim::{run_trial, summarize, sweep_configs, SimError};
use gtlab_core::{ExperimentConfig, RunSummary, SweepAxis};
use rayon::prelude::*;
use rayon::ThreadPool;

pub fn thread_pool(jobs: Option<usize>) -> anyhow::Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    Ok(b.build()?)
}

/// Same result as [`gtlab_core::sim::run_experiment`] for any worker count.
pub fn run_experiment(pool: &ThreadPool, cfg: &ExperimentConfig) -> Result<RunSummary, SimError> {
    cfg.validate()?;
    let records = pool.install(|| {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect::<Result<Vec<_>, _>>()
    })?;
    summarize(cfg, records)
}

/// One summary per value, in input order.
pub fn sweep(
    pool: &ThreadPool,
    template: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<(ExperimentConfig, RunSummary)>, SimError> {
    let cfgs = sweep_configs(template, axis, values)?;
    pool.install(|| {
        cfgs.into_par_iter()
            .map(|cfg| run_experiment(pool, &cfg).map(|s| (cfg, s)))
            .collect()
    })
}
