//! Number formatting and the CSV/JSON row schemas.

use std::io::Write;

use gtlab_core::{ExperimentConfig, RunSummary};
use serde::Serialize;
use serde_json::Value;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const CSV_HEADER: [&str; 12] = [
    "n",
    "k",
    "model",
    "strategy",
    "t",
    "trials",
    "seed",
    "error_rate",
    "ci",
    "mean_tests",
    "fano_floor",
    "floor_violated",
];

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// `%.12g`-style text: fixed notation for moderate exponents, scientific
/// otherwise, trailing zeros dropped.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rounds every float in `value` to 12 significant digits.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round_sig)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with 12-digit floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// One output row: the run's config next to its summary.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub k: usize,
    pub model: String,
    pub strategy: String,
    pub t: usize,
    pub trials: usize,
    pub seed: u64,
    pub error_rate: f64,
    pub ci: f64,
    pub mean_tests: f64,
    pub fano_floor: Option<f64>,
    pub floor_violated: bool,
}

impl SummaryRow {
    pub fn new(cfg: &ExperimentConfig, s: &RunSummary) -> Self {
        SummaryRow {
            n: cfg.n_items,
            k: cfg.k_defects,
            model: cfg.model.to_string(),
            strategy: cfg.strategy.to_string(),
            t: cfg.n_tests,
            trials: s.n_trials,
            seed: cfg.seed,
            error_rate: s.error_rate,
            ci: s.ci_halfwidth,
            mean_tests: s.mean_tests_used,
            fano_floor: s.fano_floor,
            floor_violated: s.floor_violated,
        }
    }

    fn record(&self) -> [String; 12] {
        [
            self.n.to_string(),
            self.k.to_string(),
            self.model.clone(),
            self.strategy.clone(),
            self.t.to_string(),
            self.trials.to_string(),
            self.seed.to_string(),
            fmt_sig(self.error_rate),
            fmt_sig(self.ci),
            fmt_sig(self.mean_tests),
            self.fano_floor.map(fmt_sig).unwrap_or_default(),
            self.floor_violated.to_string(),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[SummaryRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[SummaryRow]) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf)?)
}
