//! Flat `key = value` config files whose keys mirror the long flag names.

use std::path::Path;

use anyhow::{bail, Context};

/// Parses `key = value` lines; `#` starts a comment. Keys keep file order.
pub fn parse(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value", i + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        if out.iter().any(|(k, _)| *k == key) {
            bail!("line {}: duplicate key `{key}`", i + 1);
        }
        out.push((key, value));
    }
    Ok(out)
}

pub fn load(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    parse(&text).with_context(|| format!("in config file {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let kv =
            parse("# run\nn = 10\nmodel=addition:q=0.1  # noisy\n\ncheck_fano = true\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("n".into(), "10".into()),
                ("model".into(), "addition:q=0.1".into()),
                ("check-fano".into(), "true".into()),
            ]
        );
        assert!(parse("n 10").is_err());
        assert!(parse("n=1\nn=2").is_err());
    }
}
