use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use super::rng::chunk_rng;
use super::DesignTables;
use crate::error::{Error, Result};
use crate::model::{select_intervals, AnalysisConfig, CellProbs, Procedure, StudyDesign, WoolfSummary};
use crate::normal::NormalQuantiles;

/// Replications drawn from one generator stream.
pub const CHUNK_REPS: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub coverage: f64,
    pub reps: u64,
    pub hits: u64,
    /// `sqrt(coverage (1 - coverage) / reps)`.
    pub std_err: f64,
    pub seed: u64,
}

impl McEstimate {
    pub(crate) fn from_hits(hits: u64, reps: u64, seed: u64) -> Self {
        let coverage = hits as f64 / reps as f64;
        McEstimate {
            coverage,
            reps,
            hits,
            std_err: (coverage * (1.0 - coverage) / reps as f64).sqrt(),
            seed,
        }
    }
}

/// Counts replications in which both log odds ratios are covered. Chunks run
/// in parallel; the integer total does not depend on their order.
pub(crate) fn count_hits(
    tables: &DesignTables,
    p: &CellProbs<f64>,
    q: &NormalQuantiles,
    procedure: Procedure,
    reps: u64,
    stream: (u64, u64, u64),
) -> Result<u64> {
    let (seed, stage, point) = stream;
    let theta1 = p.theta1();
    let theta2 = p.theta2();
    let mut samplers = Vec::with_capacity(4);
    for (n, prob) in tables.design.margins().into_iter().zip(p.to_array()) {
        samplers.push(Binomial::new(n as u64, prob).map_err(|e| Error::domain(format!("binomial({n}, {prob}): {e}")))?);
    }
    let chunks = reps.div_ceil(CHUNK_REPS);
    let hits = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = chunk_rng(seed, stage, point, chunk);
            let len = CHUNK_REPS.min(reps - chunk * CHUNK_REPS);
            let mut hits = 0u64;
            for _ in 0..len {
                let mut stats = [tables.margins[0][0]; 4];
                for (k, sampler) in samplers.iter().enumerate() {
                    stats[k] = tables.margins[k][sampler.sample(&mut rng) as usize];
                }
                let s = WoolfSummary::from_margins(stats);
                if select_intervals(&s, q, procedure).covers(theta1, theta2) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(hits)
}

/// Monte Carlo estimate of the simultaneous coverage at `p`. Identical inputs
/// and seed give an identical estimate regardless of thread count.
pub fn mc_coverage(
    design: &StudyDesign,
    p: &CellProbs<f64>,
    config: &AnalysisConfig,
    procedure: Procedure,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    design.validate()?;
    if reps == 0 {
        return Err(Error::domain("Monte Carlo needs at least one replication"));
    }
    CellProbs::from_array(p.to_array())?;
    let q = config.quantiles()?;
    let tables = DesignTables::new(design);
    let hits = count_hits(&tables, p, &q, procedure, reps, (seed, 0, 0))?;
    Ok(McEstimate::from_hits(hits, reps, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reps_refused() {
        let p = CellProbs::new(0.3, 0.5, 0.4, 0.6).unwrap();
        let err = mc_coverage(
            &StudyDesign::new(8, 8, 8, 8).unwrap(),
            &p,
            &AnalysisConfig::default(),
            Procedure::TwoStage,
            0,
            1,
        );
        assert!(matches!(err, Err(Error::InputDomain(_))));
    }

    #[test]
    fn same_seed_same_estimate_across_thread_counts() {
        let d = StudyDesign::new(30, 20, 25, 40).unwrap();
        let p = CellProbs::new(0.3, 0.5, 0.4, 0.6).unwrap();
        let cfg = AnalysisConfig::default();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_coverage(&d, &p, &cfg, Procedure::TwoStage, 50_000, 42).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(3));
        assert_eq!(a, run(1));
        let b = mc_coverage(&d, &p, &cfg, Procedure::TwoStage, 50_000, 43).unwrap();
        assert_ne!(a.hits, b.hits);
        assert!((a.std_err - (a.coverage * (1.0 - a.coverage) / 50_000.0).sqrt()).abs() < 1e-15);
    }
}
