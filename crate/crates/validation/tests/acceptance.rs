//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gtlab::format::fmt_sig;
use gtlab::{runner, verify};
use gtlab_core::bounds::{binary_entropy, bounds_report, t_lower, t_upper};
use gtlab_core::combin::log2_binomial;
use gtlab_core::decode::ml_decode;
use gtlab_core::design::gen_bernoulli_matrix;
use gtlab_core::noise::sample_outcome;
use gtlab_core::rng::{stream, ChaCha8Rng, StreamRole};
use gtlab_core::{
    DefectiveSet, ExperimentConfig, MiOrientation, NoiseModel, OutcomeVector, PGrid, Strategy,
};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rayon::ThreadPool;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn within_time(limit: Duration, elapsed: Duration) -> (bool, String) {
    (
        elapsed <= limit,
        format!("{:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn mi_identity() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for m in verify::mi_models() {
        let (w, c) = verify::mi_max_difference(&m, &m, 6);
        worst = worst.max(w);
        cases += c;
    }
    let (fast, time) = within_time(Duration::from_secs(10), start.elapsed());
    verdict(
        worst <= 1e-10 && fast,
        format!(
            "{cases} cases, max |closed - enumerated| = {}, {time}",
            fmt_sig(worst)
        ),
    )
}

fn single_defective(pool: &ThreadPool) -> Verdict {
    let grid = PGrid::default();
    let report = bounds_report(
        &NoiseModel::noise_free(),
        1024,
        1,
        grid,
        MiOrientation::AsPrinted,
    )
    .expect("valid size");
    let slack = 10.0 * (1.0 / binary_entropy(0.5 - grid.step()).unwrap() - 1.0);
    let bound_ok =
        (report.t_lower - 10.0).abs() <= slack && (report.p_star_lower - 0.5).abs() <= 1e-12;

    let mut cfg = ExperimentConfig::new(
        1024,
        1,
        NoiseModel::noise_free(),
        Strategy::BinarySplit,
        10,
        1024,
        1,
    );
    cfg.stratified = true;
    cfg.keep_trials = true;
    let s = runner::run_experiment(pool, &cfg).expect("valid config");
    let trials = s.per_trial.as_deref().unwrap_or(&[]);
    let exact = trials.len() == 1024 && trials.iter().all(|r| r.tests_used == 10 && !r.error);
    verdict(
        bound_ok && exact,
        format!(
            "t_lower = {} at p* = {}; {} of 1024 positions found in exactly 10 tests",
            fmt_sig(report.t_lower),
            fmt_sig(report.p_star_lower),
            trials
                .iter()
                .filter(|r| r.tests_used == 10 && !r.error)
                .count()
        ),
    )
}

fn fano_presets(pool: &ThreadPool) -> Verdict {
    let start = Instant::now();
    let presets = verify::fano_presets(2000, 3);
    let mut bad = Vec::new();
    let mut slack = f64::INFINITY;
    for cfg in &presets {
        let s = runner::run_experiment(pool, cfg).expect("valid preset");
        let floor = s.fano_floor.expect("fano check enabled");
        let margin = s.error_rate - (floor - 3.0 * s.std_error);
        slack = slack.min(margin);
        if margin < 0.0 {
            bad.push(format!("{} {} T={}", cfg.model, cfg.strategy, cfg.n_tests));
        }
    }
    let (fast, time) = within_time(Duration::from_secs(120), start.elapsed());
    verdict(
        bad.is_empty() && fast,
        format!(
            "{} cells, smallest margin {}, violations {:?}, {time}",
            presets.len(),
            fmt_sig(slack),
            bad
        ),
    )
}

fn zero_test_calibration(pool: &ThreadPool) -> Verdict {
    let cfg = ExperimentConfig::new(
        10,
        2,
        NoiseModel::noise_free(),
        Strategy::Bernoulli { p: 0.5 },
        0,
        5000,
        4,
    );
    let s = runner::run_experiment(pool, &cfg).expect("valid config");
    let want = 1.0 - 1.0 / 45.0;
    verdict(
        (s.error_rate - want).abs() <= 3.0 * s.std_error,
        format!(
            "error {} vs {} +/- {}",
            fmt_sig(s.error_rate),
            fmt_sig(want),
            fmt_sig(3.0 * s.std_error)
        ),
    )
}

fn bound_ordering() -> Verdict {
    let models = [
        NoiseModel::noise_free(),
        NoiseModel::addition(0.1).unwrap(),
        NoiseModel::dilution(0.5).unwrap(),
        NoiseModel::add_dilute(0.1, 0.3).unwrap(),
    ];
    let grid = PGrid::default();
    let mut bad = Vec::new();
    let mut cells = 0;
    for m in models {
        for n in [20, 50, 100] {
            for k in 1..=3 {
                cells += 1;
                let upper = t_upper(&m, n, k, grid).unwrap().value;
                let lower = t_lower(&m, n, k, grid).unwrap().value;
                let count = log2_binomial(n as u64, k as u64);
                if !(upper >= lower && lower >= count) {
                    bad.push(format!(
                        "{m} N={n} K={k}: upper {} lower {} count {}",
                        fmt_sig(upper),
                        fmt_sig(lower),
                        fmt_sig(count)
                    ));
                }
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "{} of {cells} cells ordered; failing: {bad:?}",
            cells - bad.len()
        ),
    )
}

fn noise_monotonicity(pool: &ThreadPool) -> Verdict {
    let qs = [0.0, 0.05, 0.2];
    let mut rates = Vec::new();
    let mut lowers = Vec::new();
    for (i, &q) in qs.iter().enumerate() {
        let m = NoiseModel::addition(q).unwrap();
        let cfg = ExperimentConfig::new(
            100,
            2,
            m,
            Strategy::Bernoulli { p: 0.5 },
            25,
            2000,
            60 + i as u64,
        );
        let s = runner::run_experiment(pool, &cfg).expect("valid config");
        rates.push((s.error_rate, s.ci_halfwidth));
        lowers.push(t_lower(&m, 100, 2, PGrid::default()).unwrap().value);
    }
    let nondecreasing = rates
        .windows(2)
        .all(|w| w[1].0 >= w[0].0 - (w[0].1 + w[1].1));
    let (first, last) = (rates[0], rates[2]);
    let strict = first.0 + first.1 < last.0 - last.1;
    let bounds_up = lowers.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = rates
        .iter()
        .map(|(e, c)| format!("{}+/-{}", fmt_sig(*e), fmt_sig(*c)))
        .collect();
    let lows: Vec<String> = lowers.iter().map(|v| fmt_sig(*v)).collect();
    verdict(
        nondecreasing && strict && bounds_up,
        format!("error {shown:?}; t_lower {lows:?}"),
    )
}

fn positive(q: f64, u: f64, k: usize) -> f64 {
    1.0 - u.powi(k as i32) * (1.0 - q)
}

/// Scores every k-subset directly and returns the tie set in lexicographic
/// order.
fn oracle_ties(
    m: &NoiseModel,
    pools: &[Vec<bool>],
    y: &[bool],
    n: usize,
    k: usize,
) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..k {
        all = all
            .into_iter()
            .flat_map(|s| {
                let from = s.last().map_or(0, |&x| x + 1);
                (from..n).map(move |i| {
                    let mut t = s.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    let scores: Vec<f64> = all
        .iter()
        .map(|s| {
            pools
                .iter()
                .zip(y)
                .map(|(pool, &yt)| {
                    let f = positive(m.q(), m.u(), s.iter().filter(|&&i| pool[i]).count());
                    (if yt { f } else { 1.0 - f }).ln()
                })
                .sum()
        })
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    all.into_iter()
        .zip(scores)
        .filter(|(_, v)| best == f64::NEG_INFINITY || *v >= best - 1e-9)
        .map(|(s, _)| s)
        .collect()
}

fn decoder_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    let mut tied = 0;
    for case in 0..200u64 {
        let n = rng.random_range(2..=10);
        let k = rng.random_range(1..=3usize.min(n - 1));
        let t = rng.random_range(0..=12);
        let (q, u) = (rng.random_range(0.0..0.4), rng.random_range(0.0..0.8));
        let m = match case % 4 {
            0 => NoiseModel::noise_free(),
            1 => NoiseModel::addition(q).unwrap(),
            2 => NoiseModel::dilution(u).unwrap(),
            _ => NoiseModel::add_dilute(q, u).unwrap(),
        };
        let p = rng.random_range(0.1..0.9);
        let matrix =
            gen_bernoulli_matrix(n, t, p, &mut stream(case, 0, StreamRole::Design)).unwrap();
        let mut members = index::sample(&mut rng, n, k).into_vec();
        members.sort_unstable();
        let truth = DefectiveSet::new(n, members).unwrap();
        let mut channel = stream(case, 0, StreamRole::Channel);
        let y: OutcomeVector = matrix
            .pools()
            .map(|pool| sample_outcome(&m, truth.iter().filter(|&i| pool[i]).count(), &mut channel))
            .collect();
        let pools: Vec<Vec<bool>> = matrix.pools().map(<[bool]>::to_vec).collect();
        let ties = oracle_ties(&m, &pools, y.as_slice(), n, k);
        let r = ml_decode(&m, &matrix, &y, n, k).unwrap();
        if r.n_ties > 1 {
            tied += 1;
        }
        if r.n_ties != ties.len() as u64 || r.estimate.as_slice() != ties[0].as_slice() {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("200 instances, {mismatches} mismatches, {tied} with tied maximizers"),
    )
}

fn sampling_fidelity() -> Verdict {
    let draws = 10_000;
    let dil = NoiseModel::dilution(0.5).unwrap();
    let mut rng = stream(8, 0, StreamRole::Channel);
    let negatives = (0..draws)
        .filter(|_| !sample_outcome(&dil, 2, &mut rng))
        .count() as f64
        / draws as f64;
    let add = NoiseModel::addition(0.2).unwrap();
    let mut rng = stream(8, 1, StreamRole::Channel);
    let positives = (0..draws)
        .filter(|_| sample_outcome(&add, 0, &mut rng))
        .count() as f64
        / draws as f64;
    verdict(
        (negatives - 0.25).abs() <= 0.03 && (positives - 0.2).abs() <= 0.02,
        format!(
            "dilution false negatives {}, addition false positives {}",
            fmt_sig(negatives),
            fmt_sig(positives)
        ),
    )
}

fn main() -> ExitCode {
    let pool = runner::thread_pool(None).expect("thread pool");
    let criteria: Vec<Criterion> = vec![
        ("information identity", Box::new(mi_identity)),
        (
            "single-defective correspondence",
            Box::new(|| single_defective(&pool)),
        ),
        ("fano floor presets", Box::new(|| fano_presets(&pool))),
        (
            "zero-test calibration",
            Box::new(|| zero_test_calibration(&pool)),
        ),
        (
            "bound ordering and counting bound",
            Box::new(bound_ordering),
        ),
        ("noise monotonicity", Box::new(|| noise_monotonicity(&pool))),
        ("decoder oracle", Box::new(decoder_oracle)),
        ("sampling fidelity", Box::new(sampling_fidelity)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.passed {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
