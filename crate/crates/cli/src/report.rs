use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use serde::Serialize;

use crate::config::Resolved;

/// Everything needed to reproduce a run, plus its result.
#[derive(Debug, Serialize)]
pub struct RunManifest<R: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub config: Resolved,
    /// Command-specific settings after defaults were applied.
    pub options: serde_json::Value,
    pub result: R,
    /// Present only with `--timing`; the rest of the manifest is reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub duration_secs: f64,
    pub workers: usize,
}

impl Timing {
    pub fn new(elapsed: Duration) -> Self {
        Timing {
            duration_secs: elapsed.as_secs_f64(),
            workers: rayon::current_num_threads(),
        }
    }
}

/// Writes `value` as pretty JSON to `path`, or to stdout when `path` is `None`.
pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

/// Sidecar path for the manifest of a CSV-producing command.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Probability as printed in human-facing summaries.
pub fn fmt_prob(x: f64) -> String {
    format!("{x:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            manifest_path_for(Path::new("out/grid.csv")),
            PathBuf::from("out/grid.csv.manifest.json")
        );
    }

    #[test]
    fn probabilities_print_with_six_decimals() {
        assert_eq!(fmt_prob(0.1346035942), "0.134604");
        assert_eq!(fmt_prob(0.95), "0.950000");
    }
}
