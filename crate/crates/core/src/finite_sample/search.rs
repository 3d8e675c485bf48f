use rayon::prelude::*;

use super::mc::{count_hits, McEstimate};
use super::DesignTables;
use crate::error::Result;
use crate::grid::{GridValue, ProbGrid, SearchResult, StageTrace};
use crate::model::{AnalysisConfig, Procedure, StudyDesign};

/// Staged Monte Carlo search for the minimum coverage over the grid
/// `(eps, eps + h, ..., 1 - eps)^4`.
///
/// Stage 1 estimates every grid point; each later stage re-estimates the
/// candidates kept by the previous one with a fresh stream, and the lowest
/// estimate of the last stage is reported. Equal estimates are ordered by
/// grid index.
pub fn min_coverage_search(
    design: &StudyDesign,
    config: &AnalysisConfig,
    procedure: Procedure,
) -> Result<SearchResult> {
    design.validate()?;
    config.validate()?;
    let q = config.quantiles()?;
    let grid = ProbGrid::new(config.epsilon, config.h)?;
    let tables = DesignTables::new(design);

    let mut candidates: Vec<usize> = (0..grid.len()).collect();
    let mut trace = Vec::with_capacity(config.mc_schedule.len());
    for (stage_no, stage) in config.mc_schedule.iter().enumerate() {
        let estimates: Vec<(usize, u64)> = candidates
            .par_iter()
            .map(|&idx| {
                let hits = count_hits(
                    &tables,
                    &grid.point(idx),
                    &q,
                    procedure,
                    stage.reps,
                    (config.seed, stage_no as u64 + 1, idx as u64),
                )?;
                Ok((idx, hits))
            })
            .collect::<Result<_>>()?;
        let mut ranked = estimates;
        // same reps within a stage, so hit counts order the estimates exactly
        ranked.sort_by_key(|&(idx, hits)| (hits, idx));
        let is_last = stage_no + 1 == config.mc_schedule.len();
        ranked.truncate(if is_last { 1 } else { stage.keep });
        trace.push(StageTrace {
            stage: stage_no + 1,
            reps: stage.reps,
            evaluated: candidates.len(),
            ranked: ranked
                .iter()
                .map(|&(idx, hits)| {
                    let est = McEstimate::from_hits(hits, stage.reps, config.seed);
                    GridValue {
                        grid_index: idx,
                        point: grid.point(idx),
                        coverage: est.coverage,
                        std_err: Some(est.std_err),
                    }
                })
                .collect(),
        });
        candidates = ranked.into_iter().map(|(idx, _)| idx).collect();
    }

    let best = trace.last().expect("schedule is nonempty").ranked[0];
    Ok(SearchResult {
        min_coverage: best.coverage,
        argmin: best.point,
        std_err: best.std_err,
        stage_trace: trace,
        ties: vec![best],
        tie_tolerance: 0.0,
        failures: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::McStage;

    #[test]
    fn keep_one_equal_reps_is_plain_argmin() {
        let d = StudyDesign::new(12, 10, 9, 14).unwrap();
        let reps = 500;
        let cfg = AnalysisConfig {
            h: 0.24,
            mc_schedule: vec![McStage { reps, keep: 1 }; 3],
            seed: 11,
            ..AnalysisConfig::default()
        };
        let res = min_coverage_search(&d, &cfg, Procedure::TwoStage).unwrap();

        let grid = ProbGrid::new(cfg.epsilon, cfg.h).unwrap();
        let tables = DesignTables::new(&d);
        let q = cfg.quantiles().unwrap();
        let plain = (0..grid.len())
            .map(|i| {
                (
                    count_hits(
                        &tables,
                        &grid.point(i),
                        &q,
                        Procedure::TwoStage,
                        reps,
                        (11, 1, i as u64),
                    )
                    .unwrap(),
                    i,
                )
            })
            .min()
            .unwrap();
        assert_eq!(res.stage_trace[0].ranked[0].grid_index, plain.1);
        assert_eq!(res.ties[0].grid_index, plain.1);
        assert_eq!(res.argmin, grid.point(plain.1));
        assert_eq!(res.stage_trace.len(), 3);
        assert_eq!(res.stage_trace[0].evaluated, grid.len());
        assert_eq!(res.min_coverage, res.stage_trace[2].ranked[0].coverage);
    }
}
