mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pretest_coverage::asymptotic;
use pretest_coverage::boundary_scan::{self, ScanSettings};
use pretest_coverage::finite_sample::{self, McEstimate};
use pretest_coverage::grid::{GridValue, ProbGrid, SearchResult};
use pretest_coverage::quadrature::QuadratureSpec;
use pretest_coverage::{AnalysisConfig, CellProbs, NormalQuantiles, Procedure, StudyDesign};
use serde::Serialize;
use serde_json::json;

use config::{parse_four, parse_list, parse_schedule, seed_from_env, FileConfig, Resolved};
use report::{fmt_prob, manifest_path_for, write_json, RunManifest, Timing};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_REPS: u64 = 1_000_000;
const DEFAULT_GRID_STEPS: usize = 32;
const DEFAULT_DELTA_STEPS: usize = 80;

#[derive(Debug, Parser)]
#[command(
    name = "pretest-coverage",
    version,
    about = "Coverage of odds-ratio intervals after a homogeneity pretest"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// TOML file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Record wall-clock duration and worker count in the manifest.
    #[arg(long, global = true)]
    timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// Sample sizes n1,n1',n2,n2' (cases and controls of stratum 1, then stratum 2).
    #[arg(long)]
    design: Option<String>,
    /// Multiply every sample size by this factor.
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "grid-step")]
    grid_step: Option<f64>,
    /// Falls back to the PRETEST_COVERAGE_SEED environment variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CoverageMethod {
    Mc,
    Enumerate,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SearchMethod {
    Mc,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    #[value(name = "two_stage", alias = "two-stage")]
    TwoStage,
    #[value(name = "no_pretest", alias = "no-pretest")]
    NoPretest,
}

impl From<Mode> for Procedure {
    fn from(m: Mode) -> Self {
        match m {
            Mode::TwoStage => Procedure::TwoStage,
            Mode::NoPretest => Procedure::NoPretest,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simultaneous coverage at one parameter point.
    Coverage {
        #[command(flatten)]
        common: Common,
        /// Exposure probabilities p1,p1',p2,p2'.
        #[arg(long)]
        p: String,
        #[arg(long, value_enum, default_value = "asymptotic")]
        method: CoverageMethod,
        #[arg(long, value_enum, default_value = "two_stage")]
        mode: Mode,
        /// Monte Carlo replications.
        #[arg(long)]
        reps: Option<u64>,
        /// Outcome budget for exact enumeration.
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
    },
    /// Minimum coverage over the grid (eps, eps+h, ..., 1-eps)^4.
    SearchMin {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "asymptotic")]
        method: SearchMethod,
        #[arg(long, value_enum, default_value = "two_stage")]
        mode: Mode,
        /// Stage-1 replications of the Monte Carlo schedule.
        #[arg(long)]
        reps: Option<u64>,
        /// Full Monte Carlo schedule as reps:keep,... (default 10000:10,200000:1,1000000:1).
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Partially minimized coverage over the interior rectangle, as CSV.
    Contour {
        #[command(flatten)]
        common: Common,
        /// Grid intervals per axis; the grid has (steps+1)^2 cells.
        #[arg(long = "grid-steps")]
        grid_steps: Option<usize>,
        #[arg(long = "delta-steps")]
        delta_steps: Option<usize>,
        /// Manifest path (default: <out>.manifest.json when --out is given).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Partially minimized coverage at fixed (p1, p1') for scaled designs.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        p1: f64,
        #[arg(long, default_value_t = 0.5)]
        p1p: f64,
        /// Scale factors N applied to the design.
        #[arg(long = "n-values", default_value = "1,2,4,8,16")]
        n_values: String,
        #[arg(long = "delta-steps")]
        delta_steps: Option<usize>,
    },
    /// Delta, r and Delta' of the interior scan.
    Geometry {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common, file: &FileConfig) -> anyhow::Result<Resolved> {
    let defaults = AnalysisConfig::default();
    let base = match (&common.design, file.design) {
        (Some(text), _) => parse_four::<u32>(text, "--design")?,
        (None, Some(d)) => d,
        (None, None) => StudyDesign::REFERENCE.margins(),
    };
    let base = StudyDesign::new(base[0], base[1], base[2], base[3])?;
    let scale = common.scale.unwrap_or(1);
    if scale == 0 {
        bail!("--scale must be positive");
    }
    let seed = match (common.seed, file.seed) {
        (Some(s), _) => s,
        (None, Some(s)) => s,
        (None, None) => seed_from_env()?.unwrap_or(DEFAULT_SEED),
    };
    Ok(Resolved {
        design: base.scaled(scale)?,
        scale,
        alpha: common.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        beta: common.beta.or(file.beta).unwrap_or(defaults.beta),
        epsilon: common.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
        grid_step: common.grid_step.or(file.grid_step).unwrap_or(defaults.h),
        seed,
    })
}

fn analysis_config(r: &Resolved, schedule: Vec<pretest_coverage::McStage>) -> anyhow::Result<AnalysisConfig> {
    let cfg = AnalysisConfig {
        alpha: r.alpha,
        beta: r.beta,
        epsilon: r.epsilon,
        h: r.grid_step,
        mc_schedule: schedule,
        seed: r.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct CoverageReport {
    coverage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_err: Option<f64>,
    method: &'static str,
    mode: Procedure,
    inputs: CoverageInputs,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct CoverageInputs {
    design: StudyDesign,
    p: CellProbs,
    theta1: f64,
    theta2: f64,
    alpha: f64,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reps: Option<u64>,
}

fn method_name(m: CoverageMethod) -> &'static str {
    match m {
        CoverageMethod::Mc => "mc",
        CoverageMethod::Enumerate => "enumerate",
        CoverageMethod::Asymptotic => "asymptotic",
    }
}

struct Output {
    summary: String,
}

fn run(cli: &Cli) -> anyhow::Result<Output> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(w) = cli.workers.or(file.workers) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("configuring worker threads")?;
    }
    let started = Instant::now();
    let timing = || cli.timing.then(|| Timing::new(started.elapsed()));
    let quad = QuadratureSpec::default();

    match &cli.command {
        Command::Coverage {
            common,
            p,
            method,
            mode,
            reps,
            budget,
        } => {
            let r = resolve(common, &file)?;
            let [a, b, c, d] = parse_four::<f64>(p, "--p")?;
            let p = CellProbs::new(a, b, c, d)?;
            let procedure = Procedure::from(*mode);
            let cfg = analysis_config(&r, AnalysisConfig::default().mc_schedule)?;
            let reps = reps.or(file.reps).unwrap_or(DEFAULT_REPS);
            let (coverage, std_err, seed, reps_used) = match method {
                CoverageMethod::Mc => {
                    let est: McEstimate = finite_sample::mc_coverage(&r.design, &p, &cfg, procedure, reps, r.seed)?;
                    (est.coverage, Some(est.std_err), Some(r.seed), Some(reps))
                }
                CoverageMethod::Enumerate => {
                    let opts = finite_sample::EnumerateOptions {
                        budget: *budget,
                        always_covered: false,
                    };
                    let c = finite_sample::enumerate_coverage_with(&r.design, &p, &cfg, procedure, &opts)?;
                    (c, None, None, None)
                }
                CoverageMethod::Asymptotic => {
                    let q = NormalQuantiles::new(r.alpha, r.beta)?;
                    let c = match procedure {
                        Procedure::TwoStage => asymptotic::asymptotic_coverage(&r.design, &p, &q, &quad)?,
                        Procedure::NoPretest => asymptotic::no_pretest_coverage(&q),
                    };
                    (c, None, None, None)
                }
            };
            let report = CoverageReport {
                coverage,
                std_err,
                method: method_name(*method),
                mode: procedure,
                inputs: CoverageInputs {
                    design: r.design,
                    p,
                    theta1: p.theta1(),
                    theta2: p.theta2(),
                    alpha: r.alpha,
                    beta: r.beta,
                    reps: reps_used,
                },
                seed,
            };
            let summary = match std_err {
                Some(se) => format!(
                    "coverage {} (se {}, {})",
                    fmt_prob(coverage),
                    fmt_prob(se),
                    report.method
                ),
                None => format!("coverage {} ({})", fmt_prob(coverage), report.method),
            };
            let manifest = RunManifest {
                command: "coverage",
                version: env!("CARGO_PKG_VERSION"),
                options: json!({ "method": report.method, "mode": procedure, "reps": reps_used, "budget": budget }),
                config: r,
                result: report,
                timing: timing(),
            };
            write_json(&manifest, common.out.as_deref())?;
            Ok(Output { summary })
        }

        Command::SearchMin {
            common,
            method,
            mode,
            reps,
            schedule,
        } => {
            let r = resolve(common, &file)?;
            let procedure = Procedure::from(*mode);
            let mut stages = match schedule.as_deref().or(file.schedule.as_deref()) {
                Some(text) => parse_schedule(text)?,
                None => AnalysisConfig::default().mc_schedule,
            };
            if let Some(m1) = reps.or(file.reps) {
                stages[0].reps = m1;
            }
            let cfg = analysis_config(&r, stages)?;
            let (result, method_name) = match method {
                SearchMethod::Mc => (finite_sample::min_coverage_search(&r.design, &cfg, procedure)?, "mc"),
                SearchMethod::Asymptotic => {
                    let q = NormalQuantiles::new(r.alpha, r.beta)?;
                    let res = match procedure {
                        Procedure::TwoStage => {
                            asymptotic::asymptotic_grid_min(&r.design, &q, r.epsilon, r.grid_step, &quad)?
                        }
                        Procedure::NoPretest => constant_grid_min(&r, asymptotic::no_pretest_coverage(&q))?,
                    };
                    (res, "asymptotic")
                }
            };
            let summary = format!(
                "min coverage {} at ({}) ({} tie point(s), {})",
                fmt_prob(result.min_coverage),
                result.argmin.to_array().map(|x| format!("{x:.3}")).join(", "),
                result.ties.len(),
                method_name
            );
            let options = match method {
                SearchMethod::Mc => json!({ "method": method_name, "mode": procedure, "schedule": cfg.mc_schedule }),
                SearchMethod::Asymptotic => json!({ "method": method_name, "mode": procedure, "quadrature": quad }),
            };
            let manifest = RunManifest {
                command: "search-min",
                version: env!("CARGO_PKG_VERSION"),
                config: r,
                options,
                result,
                timing: timing(),
            };
            write_json(&manifest, common.out.as_deref())?;
            Ok(Output { summary })
        }

        Command::Contour {
            common,
            grid_steps,
            delta_steps,
            manifest,
        } => {
            let r = resolve(common, &file)?;
            let grid_steps = grid_steps.or(file.grid_steps).unwrap_or(DEFAULT_GRID_STEPS);
            let delta_steps = delta_steps.or(file.delta_steps).unwrap_or(DEFAULT_DELTA_STEPS);
            let settings = ScanSettings::new(r.epsilon, r.alpha, r.beta, delta_steps, quad)?;
            let grid = boundary_scan::contour_grid(&r.design, grid_steps, &settings)?;
            write_contour_csv(&grid, common.out.as_deref())?;
            let values: Vec<f64> = grid.rows().map(|row| row.2).collect();
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let summary = format!(
                "{} cells, partially minimized coverage in [{}, {}]",
                values.len(),
                fmt_prob(min),
                fmt_prob(max)
            );
            let manifest_path = manifest
                .clone()
                .or_else(|| common.out.as_deref().map(manifest_path_for));
            if let Some(path) = manifest_path {
                let m = RunManifest {
                    command: "contour",
                    version: env!("CARGO_PKG_VERSION"),
                    options: json!({ "grid_steps": grid_steps, "delta_steps": delta_steps, "quadrature": quad }),
                    result: json!({
                        "geometry": boundary_scan::scan_geometry(&r.design, r.epsilon)?,
                        "cells": values.len(),
                        "min_coverage": min,
                        "max_coverage": max,
                        "csv": common.out,
                    }),
                    config: r,
                    timing: timing(),
                };
                write_json(&m, Some(&path))?;
            }
            Ok(Output { summary })
        }

        Command::Scaling {
            common,
            p1,
            p1p,
            n_values,
            delta_steps,
        } => {
            let r = resolve(common, &file)?;
            let scales = parse_list::<u32>(n_values, "--n-values")?;
            let delta_steps = delta_steps.or(file.delta_steps).unwrap_or(DEFAULT_DELTA_STEPS);
            let settings = ScanSettings::new(r.epsilon, r.alpha, r.beta, delta_steps, quad)?;
            let points = boundary_scan::scaling_study(&r.design, &scales, *p1, *p1p, &settings)?;
            let mut summary = String::new();
            for pt in &points {
                if !summary.is_empty() {
                    summary.push_str(", ");
                }
                match pt.partial_min {
                    Some(m) => summary.push_str(&format!("N={}: {}", pt.scale, fmt_prob(m.min_coverage))),
                    None => summary.push_str(&format!("N={}: skipped", pt.scale)),
                }
            }
            for pt in points.iter().filter_map(|p| p.notice.as_ref()) {
                eprintln!("notice: {pt}");
            }
            let manifest = RunManifest {
                command: "scaling",
                version: env!("CARGO_PKG_VERSION"),
                config: r,
                options: json!({ "p1": p1, "p1p": p1p, "n_values": scales, "delta_steps": delta_steps, "quadrature": quad }),
                result: points,
                timing: timing(),
            };
            write_json(&manifest, common.out.as_deref())?;
            Ok(Output { summary })
        }

        Command::Geometry { common } => {
            let r = resolve(common, &file)?;
            let g = boundary_scan::scan_geometry(&r.design, r.epsilon)?;
            let summary = format!(
                "Delta {}, r {}, Delta' {}",
                fmt_prob(g.delta_cap),
                fmt_prob(g.r),
                fmt_prob(g.delta_cap_prime)
            );
            let manifest = RunManifest {
                command: "geometry",
                version: env!("CARGO_PKG_VERSION"),
                config: r,
                options: json!({}),
                result: g,
                timing: timing(),
            };
            write_json(&manifest, common.out.as_deref())?;
            Ok(Output { summary })
        }
    }
}

/// Grid minimum of a coverage that does not depend on the parameter point.
fn constant_grid_min(r: &Resolved, value: f64) -> anyhow::Result<SearchResult> {
    let grid = ProbGrid::new(r.epsilon, r.grid_step)?;
    let ties: Vec<GridValue> = (0..grid.len())
        .map(|i| GridValue {
            grid_index: i,
            point: grid.point(i),
            coverage: value,
            std_err: None,
        })
        .collect();
    Ok(SearchResult {
        min_coverage: value,
        argmin: grid.point(0),
        std_err: None,
        stage_trace: Vec::new(),
        ties,
        tie_tolerance: asymptotic::TIE_TOLERANCE,
        failures: Vec::new(),
    })
}

fn write_contour_csv(grid: &boundary_scan::ContourGrid, out: Option<&Path>) -> anyhow::Result<()> {
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(sink);
    w.write_record(["p1", "p1p", "min_coverage", "argmin_delta"])?;
    for (p1, p1p, v, d) in grid.rows() {
        w.write_record([
            format!("{p1:.6}"),
            format!("{p1p:.6}"),
            format!("{v:.6}"),
            format!("{d:.6}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<pretest_coverage::Error>() {
            return if e.is_numerical() { 3 } else { 2 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            eprintln!("{}", out.summary);
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let domain: anyhow::Error = pretest_coverage::Error::InputDomain("x".into()).into();
        assert_eq!(exit_code(&domain), 2);
        let quad: anyhow::Error = pretest_coverage::Error::Quadrature {
            error_estimate: 1.0,
            subdivisions: 200,
        }
        .into();
        assert_eq!(exit_code(&quad.context("evaluating grid point")), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("bad flag")), 2);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
