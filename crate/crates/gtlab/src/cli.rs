//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use gtlab_core::bounds::{bounds_report, BoundsReport};
use gtlab_core::design::PChoice;
use gtlab_core::sim::Checks;
use gtlab_core::{
    ExperimentConfig, MiOrientation, NoiseModel, PGrid, RunSummary, Strategy, StrategySpec,
    SweepAxis, TrialRecord,
};
use serde::Serialize;

use crate::format::{csv_string, fmt_sig, to_json, SummaryRow};
use crate::{config, runner, verify};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_FANO_VIOLATED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "gtlab",
    version,
    about = "Noisy group testing: bounds, simulation and self-checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the test-count bounds and their (p, ell) table
    Bounds(BoundsArgs),
    /// Run one Monte Carlo experiment
    Simulate(SimulateArgs),
    /// Run one experiment per value of a swept parameter
    Sweep(SweepArgs),
    /// Run the built-in information identity and Fano floor checks
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct ProblemArgs {
    /// Number of items N
    #[arg(long)]
    pub n: usize,
    /// Number of defectives K
    #[arg(long)]
    pub k: usize,
    /// noise-free | addition:q=<f> | dilution:u=<f> | add-dilute:q=<f>,u=<f>
    #[arg(long)]
    pub model: NoiseModel,
    /// Spacing of the inclusion-probability grid
    #[arg(long, default_value_t = 0.01)]
    pub grid_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Decoder {
    Ml,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// as-printed | swapped
    #[arg(long, default_value = "as-printed", value_parser = parse_orientation)]
    pub mi_orientation: MiOrientation,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Flat key = value file; command-line flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// bernoulli:p=<f|opt> | binary-split | staged:p=<f|opt>,s=<int>
    #[arg(long)]
    pub strategy: StrategySpec,
    /// Overrides the strategy's inclusion probability (<f> or opt)
    #[arg(long, value_parser = parse_p)]
    pub p: Option<PChoice>,
    /// Test budget T; binary-split defaults to K ceil(log2 N)
    #[arg(long)]
    pub tests: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, env = "GTLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Decoder::Ml)]
    pub decoder: Decoder,
    /// Exit with status 3 if the error rate falls below the Fano floor
    #[arg(long)]
    pub check_fano: bool,
    /// Cycle through every defective set instead of sampling
    #[arg(long)]
    pub stratified: bool,
    /// Include per-trial records (JSON output only)
    #[arg(long)]
    pub per_trial: bool,
    /// Worker threads (default: available parallelism)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: SimulateArgs,
    /// t | p | q | u | n
    #[arg(long, value_parser = parse_axis)]
    pub axis: SweepAxis,
    /// Comma-separated values, e.g. 5,10,20
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub values: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Reduced suite (K <= 3, fewer trials)
    #[arg(long)]
    pub quick: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_p(s: &str) -> Result<PChoice, String> {
    if s.trim() == "opt" {
        return Ok(PChoice::Optimal);
    }
    s.trim()
        .parse()
        .map(PChoice::Value)
        .map_err(|_| format!("expected a probability or `opt`, got `{s}`"))
}

fn parse_orientation(s: &str) -> Result<MiOrientation, String> {
    s.parse()
        .map_err(|_| format!("unknown orientation `{s}` (expected as-printed or swapped)"))
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse()
        .map_err(|_| format!("unknown axis `{s}` (expected t, p, q, u or n)"))
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

/// Appends `--key value` for every config-file entry not already given on
/// the command line.
fn merge_config(mut args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let text: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let Some(sub_pos) = text
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|i| i + 1)
    else {
        return Ok(args);
    };
    let mut path = None;
    for (i, a) in text.iter().enumerate().skip(sub_pos) {
        if a == "--config" {
            path = Some(
                text.get(i + 1)
                    .ok_or_else(|| anyhow!("--config needs a path"))?
                    .clone(),
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&text[sub_pos]) else {
        return Ok(args);
    };
    for (key, value) in config::load(Path::new(&path))? {
        if key == "config" {
            bail!("config files cannot include other config files");
        }
        let flag = format!("--{key}");
        let given = text[sub_pos..]
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| anyhow!("unknown key `{key}` in config file {path}"))?;
        if arg.get_action().takes_values() {
            args.push(format!("{flag}={value}").into());
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => args.push(flag.into()),
                "false" | "0" | "no" => {}
                _ => bail!("key `{key}` in config file {path} expects true or false"),
            }
        }
    }
    Ok(args)
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<u8> {
    match command {
        Command::Bounds(a) => cmd_bounds(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, None, out, err),
        Command::Sweep(a) => cmd_simulate(&a.run, Some((a.axis, a.values.as_slice())), out, err),
        Command::Verify(a) => cmd_verify(&a, out),
    }
}

fn emit(out: &mut dyn Write, path: Option<&Path>, body: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => Ok(out.write_all(body.as_bytes())?),
    }
}

pub fn compute_bounds(a: &BoundsArgs) -> anyhow::Result<BoundsReport> {
    let grid = PGrid::new(a.problem.grid_step)?;
    Ok(bounds_report(
        &a.problem.model,
        a.problem.n,
        a.problem.k,
        grid,
        a.mi_orientation,
    )?)
}

fn cmd_bounds(a: &BoundsArgs, out: &mut dyn Write) -> anyhow::Result<u8> {
    let report = compute_bounds(a)?;
    let body = match a.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["p", "ell", "ratio_upper", "ratio_lower"])?;
            for row in &report.table {
                w.write_record([
                    fmt_sig(row.p),
                    row.ell.to_string(),
                    row.ratio_upper.map(fmt_sig).unwrap_or_default(),
                    row.ratio_lower.map(fmt_sig).unwrap_or_default(),
                ])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    };
    emit(out, a.output.as_deref(), &body)?;
    Ok(EXIT_OK)
}

fn ceil_log2(n: usize) -> usize {
    n.next_power_of_two().trailing_zeros() as usize
}

/// Builds the experiment template; `tests_optional` relaxes the budget
/// requirement when the sweep sets it.
pub fn build_config(a: &SimulateArgs, tests_optional: bool) -> anyhow::Result<ExperimentConfig> {
    let ProblemArgs {
        n,
        k,
        model,
        grid_step,
    } = a.problem;
    let mut spec = a.strategy;
    if let Some(p) = a.p {
        spec = spec
            .with_p(p)
            .ok_or_else(|| anyhow!("--p does not apply to strategy {}", a.strategy))?;
    }
    let strategy = spec.resolve(&model, n, k, PGrid::new(grid_step)?)?;
    let n_tests = match (a.tests, strategy) {
        (Some(t), _) => t,
        (None, Strategy::BinarySplit) => k * ceil_log2(n),
        (None, _) if tests_optional => 0,
        (None, _) => bail!("--tests is required for strategy {strategy}"),
    };
    let mut cfg = ExperimentConfig::new(n, k, model, strategy, n_tests, a.trials, a.seed);
    cfg.checks = Checks {
        fano: true,
        bounds: false,
    };
    cfg.stratified = a.stratified;
    cfg.keep_trials = a.per_trial;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct ConfigEcho {
    n_items: usize,
    k_defects: usize,
    model: NoiseModel,
    strategy: String,
    n_tests: usize,
    n_trials: usize,
    seed: u64,
    checks: Checks,
    stratified: bool,
    decoder: &'static str,
}

impl From<&ExperimentConfig> for ConfigEcho {
    fn from(c: &ExperimentConfig) -> Self {
        ConfigEcho {
            n_items: c.n_items,
            k_defects: c.k_defects,
            model: c.model,
            strategy: c.strategy.to_string(),
            n_tests: c.n_tests,
            n_trials: c.n_trials,
            seed: c.seed,
            checks: c.checks,
            stratified: c.stratified,
            decoder: "ml",
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    requested_strategy: String,
    grid_step: f64,
    axis: Option<&'static str>,
    values: Option<&'a [f64]>,
    runs: Vec<ConfigEcho>,
}

#[derive(Serialize)]
struct JsonRun<'a> {
    #[serde(flatten)]
    row: SummaryRow,
    n_errors: usize,
    std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_trial: Option<&'a [TrialRecord]>,
}

/// Sidecar path: the output path with `.config.json` appended.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

fn cmd_simulate(
    a: &SimulateArgs,
    sweep: Option<(SweepAxis, &[f64])>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> anyhow::Result<u8> {
    let sweeping_tests = matches!(sweep, Some((SweepAxis::Tests, _)));
    let template = build_config(a, sweeping_tests)?;
    let pool = runner::thread_pool(a.jobs.map(|j| j as usize))?;
    let runs: Vec<(ExperimentConfig, RunSummary)> = match sweep {
        None => vec![(template.clone(), runner::run_experiment(&pool, &template)?)],
        Some((axis, values)) => runner::sweep(&pool, &template, axis, values)?,
    };

    let rows: Vec<SummaryRow> = runs.iter().map(|(c, s)| SummaryRow::new(c, s)).collect();
    let body = match a.format {
        Format::Csv => csv_string(&rows)?,
        Format::Json => {
            let items: Vec<JsonRun> = runs
                .iter()
                .zip(&rows)
                .map(|((_, s), row)| JsonRun {
                    row: row.clone(),
                    n_errors: s.n_errors,
                    std_error: s.std_error,
                    per_trial: s.per_trial.as_deref(),
                })
                .collect();
            if sweep.is_some() {
                to_json(&items)?
            } else {
                to_json(&items[0])?
            }
        }
    };
    emit(out, a.output.as_deref(), &body)?;
    if let Some(path) = &a.output {
        let sidecar = Sidecar {
            tool: "gtlab",
            version: env!("CARGO_PKG_VERSION"),
            command: if sweep.is_some() { "sweep" } else { "simulate" },
            requested_strategy: a.strategy.to_string(),
            grid_step: a.problem.grid_step,
            axis: sweep.map(|(axis, _)| axis.name()),
            values: sweep.map(|(_, v)| v),
            runs: runs.iter().map(|(c, _)| c.into()).collect(),
        };
        emit(out, Some(&sidecar_path(path)), &to_json(&sidecar)?)?;
    }

    let violated: Vec<&SummaryRow> = rows.iter().filter(|r| r.floor_violated).collect();
    for r in &violated {
        writeln!(
            err,
            "warning: error rate {} is below the Fano floor {} ({} {} T={})",
            fmt_sig(r.error_rate),
            fmt_sig(r.fano_floor.unwrap_or(0.0)),
            r.model,
            r.strategy,
            r.t
        )?;
    }
    Ok(if a.check_fano && !violated.is_empty() {
        EXIT_FANO_VIOLATED
    } else {
        EXIT_OK
    })
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> anyhow::Result<u8> {
    let pool = runner::thread_pool(a.jobs.map(|j| j as usize))?;
    let opts = verify::VerifyOptions {
        quick: a.quick,
        inject_fault: a.inject_fault,
    };
    let checks = verify::run(&pool, opts)?;
    for c in &checks {
        writeln!(out, "{}", c.line())?;
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    writeln!(out, "{passed}/{} checks passed", checks.len())?;
    Ok(if passed == checks.len() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}
