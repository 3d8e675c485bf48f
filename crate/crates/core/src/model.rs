//! Domain types and the sample-level Woolf statistics of the two-stage analysis.
//!
//! Each stratum contributes a pair of binomial margins: exposed cases out of
//! `n_i` cases and exposed controls out of `n_i'` controls. Proportions are
//! estimated with the half-count adjustment `(y + 1/2) / (n + 1)`, which keeps
//! every log odds ratio and variance estimate finite. All intervals live on the
//! log-odds scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::NormalQuantiles;
use crate::scalar::Real;

/// Sample sizes of a two-stratum case-control study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StudyDesign {
    /// Cases in stratum 1.
    pub n1: u32,
    /// Controls in stratum 1.
    pub n1p: u32,
    /// Cases in stratum 2.
    pub n2: u32,
    /// Controls in stratum 2.
    pub n2p: u32,
}

impl StudyDesign {
    /// The two-stratum design of the coffee and myocardial infarction study.
    pub const REFERENCE: StudyDesign = StudyDesign {
        n1: 1092,
        n1p: 467,
        n2: 449,
        n2p: 488,
    };

    pub fn new(n1: u32, n1p: u32, n2: u32, n2p: u32) -> Result<Self> {
        let d = StudyDesign { n1, n1p, n2, n2p };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.margins().contains(&0) {
            return Err(Error::domain(format!(
                "all sample sizes must be at least 1, got {:?}",
                self.margins()
            )));
        }
        Ok(())
    }

    /// `[n1, n1', n2, n2']`.
    pub fn margins(&self) -> [u32; 4] {
        [self.n1, self.n1p, self.n2, self.n2p]
    }

    /// Every sample size multiplied by `factor`.
    pub fn scaled(&self, factor: u32) -> Result<Self> {
        let m = |n: u32| {
            n.checked_mul(factor)
                .ok_or_else(|| Error::domain(format!("design scaled by {factor} overflows")))
        };
        StudyDesign::new(m(self.n1)?, m(self.n1p)?, m(self.n2)?, m(self.n2p)?)
    }

    /// The same study with the stratum labels exchanged.
    pub fn swapped(&self) -> Self {
        StudyDesign {
            n1: self.n2,
            n1p: self.n2p,
            n2: self.n1,
            n2p: self.n1p,
        }
    }
}

/// Exposure probabilities `(p1, p1', p2, p2')` among cases and controls of each stratum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProbs<T> {
    pub p1: T,
    pub p1p: T,
    pub p2: T,
    pub p2p: T,
}

fn log_odds<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

impl<T: Real> CellProbs<T> {
    /// Probabilities strictly inside `(0, 1)`.
    pub fn new(p1: T, p1p: T, p2: T, p2p: T) -> Result<Self> {
        let p = CellProbs { p1, p1p, p2, p2p };
        for (i, x) in p.to_array().into_iter().enumerate() {
            if !(x > T::zero() && x < T::one()) {
                return Err(Error::domain(format!(
                    "probability #{} must lie strictly inside (0, 1), got {:?}",
                    i + 1,
                    x
                )));
            }
        }
        Ok(p)
    }

    /// Probabilities constrained to `[epsilon, 1 - epsilon]`.
    pub fn constrained(p1: T, p1p: T, p2: T, p2p: T, epsilon: T) -> Result<Self> {
        let p = Self::new(p1, p1p, p2, p2p)?;
        if p.to_array().iter().any(|&x| x < epsilon || x > T::one() - epsilon) {
            return Err(Error::domain(format!(
                "probabilities {:?} leave [{:?}, 1 - {:?}]",
                p.to_array(),
                epsilon,
                epsilon
            )));
        }
        Ok(p)
    }

    pub fn from_array(a: [T; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.p1, self.p1p, self.p2, self.p2p]
    }

    /// Log odds ratio of stratum 1.
    pub fn theta1(&self) -> T {
        log_odds(self.p1) - log_odds(self.p1p)
    }

    /// Log odds ratio of stratum 2.
    pub fn theta2(&self) -> T {
        log_odds(self.p2) - log_odds(self.p2p)
    }

    pub fn psi1(&self) -> T {
        self.theta1().exp()
    }

    pub fn psi2(&self) -> T {
        self.theta2().exp()
    }

    /// Strata exchanged.
    pub fn swapped(&self) -> Self {
        CellProbs {
            p1: self.p2,
            p1p: self.p2p,
            p2: self.p1,
            p2p: self.p1p,
        }
    }

    /// Every probability replaced by its complement, which negates both log odds ratios.
    pub fn complemented(&self) -> Self {
        let one = T::one();
        CellProbs {
            p1: one - self.p1,
            p1p: one - self.p1p,
            p2: one - self.p2,
            p2p: one - self.p2p,
        }
    }
}

/// Exposed counts `(y1, y1', y2, y2')` observed under a [`StudyDesign`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservedTables {
    pub y1: u32,
    pub y1p: u32,
    pub y2: u32,
    pub y2p: u32,
}

impl ObservedTables {
    pub fn new(y1: u32, y1p: u32, y2: u32, y2p: u32) -> Self {
        ObservedTables { y1, y1p, y2, y2p }
    }

    pub fn counts(&self) -> [u32; 4] {
        [self.y1, self.y1p, self.y2, self.y2p]
    }

    pub fn validate_against(&self, design: &StudyDesign) -> Result<()> {
        design.validate()?;
        for (y, n) in self.counts().into_iter().zip(design.margins()) {
            if y > n {
                return Err(Error::domain(format!("count {y} exceeds its sample size {n}")));
            }
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        ObservedTables {
            y1: self.y2,
            y1p: self.y2p,
            y2: self.y1,
            y2p: self.y1p,
        }
    }
}

/// One stage of the Monte Carlo minimum search: `reps` simulations per
/// candidate, after which the `keep` lowest candidates move on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McStage {
    pub reps: u64,
    pub keep: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Nominal non-coverage of the simultaneous intervals.
    pub alpha: f64,
    /// Nominal level of the homogeneity pretest.
    pub beta: f64,
    /// Parameter-space margin: probabilities live in `[epsilon, 1 - epsilon]`.
    pub epsilon: f64,
    /// Grid step of the minimum searches.
    pub h: f64,
    pub mc_schedule: Vec<McStage>,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            alpha: 0.05,
            beta: 0.05,
            epsilon: 0.02,
            h: 0.096,
            mc_schedule: vec![
                McStage { reps: 10_000, keep: 10 },
                McStage { reps: 200_000, keep: 1 },
                McStage {
                    reps: 1_000_000,
                    keep: 1,
                },
            ],
            seed: 1,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::domain(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::domain(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::domain(format!("grid step must be positive, got {}", self.h)));
        }
        if self.mc_schedule.is_empty() {
            return Err(Error::domain("Monte Carlo schedule has no stages"));
        }
        for (i, s) in self.mc_schedule.iter().enumerate() {
            if s.reps == 0 || s.keep == 0 {
                return Err(Error::domain(format!(
                    "stage {} needs reps >= 1 and keep >= 1, got {:?}",
                    i + 1,
                    s
                )));
            }
        }
        Ok(())
    }

    pub fn quantiles(&self) -> Result<NormalQuantiles> {
        NormalQuantiles::new(self.alpha, self.beta)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn centered(center: T, half_width: T) -> Self {
        Interval {
            lo: center - half_width,
            hi: center + half_width,
        }
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    /// `None` marks an empty intersection.
    pub fn intersect(&self, other: &Interval<T>) -> Option<Interval<T>> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }

    /// Endpoints mapped from log odds ratios to odds ratios.
    pub fn to_odds_scale(&self) -> Interval<T> {
        Interval {
            lo: self.lo.exp(),
            hi: self.hi.exp(),
        }
    }
}

/// Log-odds estimate and its variance contribution from one binomial margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginStat<T> {
    pub log_odds: T,
    pub var: T,
}

/// Adjusted proportion `(y + 1/2) / (n + 1)`.
pub fn adjusted_prop<T: Real>(n: u32, y: u32) -> T {
    (T::lit(y as f64) + T::lit(0.5)) / (T::lit(n as f64) + T::one())
}

/// Log odds of the adjusted proportion and `(1/n)(1/p + 1/(1 - p))`.
pub fn margin_stat<T: Real>(n: u32, y: u32) -> MarginStat<T> {
    let p: T = adjusted_prop(n, y);
    let q = T::one() - p;
    MarginStat {
        log_odds: (p / q).ln(),
        var: (p.recip() + q.recip()) / T::lit(n as f64),
    }
}

pub fn adjusted_props<T: Real>(design: &StudyDesign, tables: &ObservedTables) -> Result<CellProbs<T>> {
    tables.validate_against(design)?;
    Ok(CellProbs {
        p1: adjusted_prop(design.n1, tables.y1),
        p1p: adjusted_prop(design.n1p, tables.y1p),
        p2: adjusted_prop(design.n2, tables.y2),
        p2p: adjusted_prop(design.n2p, tables.y2p),
    })
}

/// Woolf estimates for both strata, the homogeneity statistic and the pooled estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WoolfSummary<T> {
    pub theta_hat1: T,
    pub theta_hat2: T,
    pub sigma_hat_sq1: T,
    pub sigma_hat_sq2: T,
    pub t_hat: T,
    pub theta_hat_pooled: T,
}

impl<T: Real> WoolfSummary<T> {
    /// Assembles the summary from per-stratum estimates and variances.
    pub fn from_estimates(theta_hat1: T, sigma_hat_sq1: T, theta_hat2: T, sigma_hat_sq2: T) -> Self {
        let w1 = sigma_hat_sq1.recip();
        let w2 = sigma_hat_sq2.recip();
        WoolfSummary {
            theta_hat1,
            theta_hat2,
            sigma_hat_sq1,
            sigma_hat_sq2,
            t_hat: (theta_hat1 - theta_hat2) / (sigma_hat_sq1 + sigma_hat_sq2).sqrt(),
            theta_hat_pooled: (theta_hat1 * w1 + theta_hat2 * w2) / (w1 + w2),
        }
    }

    /// Combines the four margin statistics `[case1, control1, case2, control2]`.
    pub fn from_margins(m: [MarginStat<T>; 4]) -> Self {
        Self::from_estimates(
            m[0].log_odds - m[1].log_odds,
            m[0].var + m[1].var,
            m[2].log_odds - m[3].log_odds,
            m[2].var + m[3].var,
        )
    }

    /// Standard error of the pooled estimate, `(1/s1 + 1/s2)^(-1/2)`.
    pub fn pooled_std_err(&self) -> T {
        (self.sigma_hat_sq1.recip() + self.sigma_hat_sq2.recip()).sqrt().recip()
    }
}

pub fn woolf_summary<T: Real>(design: &StudyDesign, tables: &ObservedTables) -> Result<WoolfSummary<T>> {
    tables.validate_against(design)?;
    Ok(WoolfSummary::from_margins([
        margin_stat(design.n1, tables.y1),
        margin_stat(design.n1p, tables.y1p),
        margin_stat(design.n2, tables.y2),
        margin_stat(design.n2p, tables.y2p),
    ]))
}

/// How the pair of intervals is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    /// Pretest homogeneity, then pooled or separate intervals.
    TwoStage,
    /// Always the separate intervals.
    NoPretest,
}

/// Which pair of intervals the pretest selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Homogeneity rejected: separate intervals at level `sqrt(1 - alpha)` each.
    Separate,
    /// Homogeneity accepted: the pooled interval for both log odds ratios.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalPair<T> {
    pub first: Interval<T>,
    pub second: Interval<T>,
    pub branch: Branch,
}

impl<T: Real> IntervalPair<T> {
    /// Both log odds ratios covered, endpoints included.
    pub fn covers(&self, theta1: T, theta2: T) -> bool {
        self.first.contains(theta1) && self.second.contains(theta2)
    }
}

/// Applies the interval-selection rule to a Woolf summary. The pretest rejects
/// iff `|t_hat| > c_beta`; a tie accepts.
pub fn select_intervals<T: Real>(s: &WoolfSummary<T>, q: &NormalQuantiles, procedure: Procedure) -> IntervalPair<T> {
    let reject = match procedure {
        Procedure::NoPretest => true,
        Procedure::TwoStage => s.t_hat.abs() > T::lit(q.c_beta),
    };
    if reject {
        let c = T::lit(q.c_tilde_alpha);
        IntervalPair {
            first: Interval::centered(s.theta_hat1, c * s.sigma_hat_sq1.sqrt()),
            second: Interval::centered(s.theta_hat2, c * s.sigma_hat_sq2.sqrt()),
            branch: Branch::Separate,
        }
    } else {
        let j = Interval::centered(s.theta_hat_pooled, T::lit(q.c_alpha) * s.pooled_std_err());
        IntervalPair {
            first: j,
            second: j,
            branch: Branch::Pooled,
        }
    }
}

/// The two-stage analysis of observed tables.
pub fn two_stage_intervals<T: Real>(
    design: &StudyDesign,
    tables: &ObservedTables,
    config: &AnalysisConfig,
) -> Result<IntervalPair<T>> {
    let q = config.quantiles()?;
    let s = woolf_summary(design, tables)?;
    Ok(select_intervals(&s, &q, Procedure::TwoStage))
}
