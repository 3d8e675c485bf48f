use rayon::prelude::*;

use super::DesignTables;
use crate::error::{Error, Result};
use crate::model::{select_intervals, AnalysisConfig, CellProbs, Procedure, StudyDesign, WoolfSummary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerateOptions {
    /// Largest number of outcomes `prod (n + 1)` that will be visited.
    pub budget: u64,
    /// Diagnostic: count every outcome as covered, so the result is the total mass.
    pub always_covered: bool,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            budget: 10_000_000,
            always_covered: false,
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Binomial point masses `P(Y = y)`, `y = 0..=n`, from log-pmfs.
fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let mut ln_fact = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    ln_fact.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        ln_fact.push(acc);
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (0..=n)
        .map(|y| {
            let k = y as usize;
            let ln_choose = ln_fact[n as usize] - ln_fact[k] - ln_fact[n as usize - k];
            (ln_choose + y as f64 * lp + (n - y) as f64 * lq).exp()
        })
        .collect()
}

/// Exact coverage under the binomial model, summing `P(Y = y)` over every
/// outcome whose intervals cover both log odds ratios.
pub fn enumerate_coverage(
    design: &StudyDesign,
    p: &CellProbs<f64>,
    config: &AnalysisConfig,
    procedure: Procedure,
) -> Result<f64> {
    enumerate_coverage_with(design, p, config, procedure, &EnumerateOptions::default())
}

pub fn enumerate_coverage_with(
    design: &StudyDesign,
    p: &CellProbs<f64>,
    config: &AnalysisConfig,
    procedure: Procedure,
    options: &EnumerateOptions,
) -> Result<f64> {
    design.validate()?;
    CellProbs::from_array(p.to_array())?;
    let outcomes: u128 = design.margins().iter().map(|&n| n as u128 + 1).product();
    if outcomes > options.budget as u128 {
        return Err(Error::OutcomeBudget {
            outcomes,
            budget: options.budget,
        });
    }
    let q = config.quantiles()?;
    let tables = DesignTables::new(design);
    let pmf: Vec<Vec<f64>> = design
        .margins()
        .into_iter()
        .zip(p.to_array())
        .map(|(n, prob)| binomial_pmf(n, prob))
        .collect();
    let (theta1, theta2) = (p.theta1(), p.theta2());

    // (stats of case margin, stats of control margin, joint mass) for stratum 2
    let stratum2: Vec<_> = (0..=design.n2 as usize)
        .flat_map(|y2| (0..=design.n2p as usize).map(move |y2p| (y2, y2p)))
        .map(|(y2, y2p)| (tables.margins[2][y2], tables.margins[3][y2p], pmf[2][y2] * pmf[3][y2p]))
        .collect();

    let partials: Vec<CompensatedSum> = (0..=design.n1 as usize)
        .into_par_iter()
        .map(|y1| {
            let mut total = CompensatedSum::default();
            for y1p in 0..=design.n1p as usize {
                let w1 = pmf[0][y1] * pmf[1][y1p];
                let (m1, m1p) = (tables.margins[0][y1], tables.margins[1][y1p]);
                for &(m2, m2p, w2) in &stratum2 {
                    let covered = options.always_covered || {
                        let s = WoolfSummary::from_margins([m1, m1p, m2, m2p]);
                        select_intervals(&s, &q, procedure).covers(theta1, theta2)
                    };
                    if covered {
                        total.add(w1 * w2);
                    }
                }
            }
            total
        })
        .collect();
    let mut total = CompensatedSum::default();
    for part in partials {
        total.add(part.sum);
        total.add(part.comp);
    }
    Ok(total.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_mass_is_one() {
        let d = StudyDesign::new(8, 5, 7, 9).unwrap();
        let p = CellProbs::new(0.3, 0.5, 0.4, 0.6).unwrap();
        let opts = EnumerateOptions {
            always_covered: true,
            ..Default::default()
        };
        let total = enumerate_coverage_with(&d, &p, &AnalysisConfig::default(), Procedure::TwoStage, &opts).unwrap();
        assert!((total - 1.0).abs() < 1e-14, "{total}");
    }

    #[test]
    fn pmf_matches_direct_formula() {
        let pmf = binomial_pmf(10, 0.3);
        let direct = |k: u32| {
            let c = (1..=k).fold(1.0, |acc, i| acc * (10 - k + i) as f64 / i as f64);
            c * 0.3f64.powi(k as i32) * 0.7f64.powi(10 - k as i32)
        };
        for k in 0..=10 {
            assert!((pmf[k as usize] - direct(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn budget_exceeded_is_refused() {
        let p = CellProbs::new(0.3, 0.5, 0.4, 0.6).unwrap();
        let err = enumerate_coverage(
            &StudyDesign::REFERENCE,
            &p,
            &AnalysisConfig::default(),
            Procedure::TwoStage,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutcomeBudget { .. }));
    }

    #[test]
    fn complement_and_exchange_symmetry() {
        let d = StudyDesign::new(6, 9, 8, 5).unwrap();
        let cfg = AnalysisConfig::default();
        let p = CellProbs::new(0.35, 0.55, 0.2, 0.7).unwrap();
        for proc in [Procedure::TwoStage, Procedure::NoPretest] {
            let base = enumerate_coverage(&d, &p, &cfg, proc).unwrap();
            let flipped = enumerate_coverage(&d, &p.complemented(), &cfg, proc).unwrap();
            let swapped = enumerate_coverage(&d.swapped(), &p.swapped(), &cfg, proc).unwrap();
            assert!((base - flipped).abs() < 1e-12, "{base} {flipped}");
            assert!((base - swapped).abs() < 1e-12, "{base} {swapped}");
        }
    }
}
