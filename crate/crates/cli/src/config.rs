//! Run configuration: command-line flags override an optional TOML file,
//! which overrides the built-in defaults for the reference study.

use std::path::Path;

use anyhow::{bail, Context};
use pretest_coverage::{McStage, StudyDesign};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "PRETEST_COVERAGE_SEED";

/// Keys accepted in a `--config` file. All are optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub design: Option<[u32; 4]>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub grid_step: Option<f64>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub schedule: Option<String>,
    pub grid_steps: Option<usize>,
    pub delta_steps: Option<usize>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Settings shared by every command after precedence has been applied.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub design: StudyDesign,
    /// Factor applied to the base design.
    pub scale: u32,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub grid_step: f64,
    pub seed: u64,
}

pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("invalid {what} entry {s:?}: {e}"))
        })
        .collect()
}

pub fn parse_four<T: std::str::FromStr + Copy>(text: &str, what: &str) -> anyhow::Result<[T; 4]>
where
    T::Err: std::fmt::Display,
{
    let v = parse_list::<T>(text, what)?;
    match v.as_slice() {
        [a, b, c, d] => Ok([*a, *b, *c, *d]),
        _ => bail!("{what} needs exactly four comma-separated values, got {}", v.len()),
    }
}

/// Parses `reps:keep,reps:keep,...`.
pub fn parse_schedule(text: &str) -> anyhow::Result<Vec<McStage>> {
    text.split(',')
        .map(|stage| {
            let (reps, keep) = stage
                .split_once(':')
                .ok_or_else(|| anyhow::anyhow!("schedule stage {stage:?} is not reps:keep"))?;
            Ok(McStage {
                reps: reps.trim().parse().context("schedule reps")?,
                keep: keep.trim().parse().context("schedule keep")?,
            })
        })
        .collect()
}

pub fn seed_from_env() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?}"))?)),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_and_lists() {
        let s = parse_schedule("2000:10, 200000:1,1000000:1").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0], McStage { reps: 2000, keep: 10 });
        assert!(parse_schedule("2000").is_err());
        assert_eq!(parse_four::<u32>("1,2,3,4", "design").unwrap(), [1, 2, 3, 4]);
        assert!(parse_four::<u32>("1,2,3", "design").is_err());
        assert!(parse_four::<f64>("0.1,x,0.2,0.3", "p").is_err());
    }

    #[test]
    fn file_keys() {
        let c: FileConfig =
            toml::from_str("design = [10, 20, 30, 40]\nalpha = 0.1\nschedule = \"100:2,1000:1\"").unwrap();
        assert_eq!(c.design, Some([10, 20, 30, 40]));
        assert_eq!(c.alpha, Some(0.1));
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}
