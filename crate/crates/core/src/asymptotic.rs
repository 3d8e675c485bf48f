//! Simultaneous coverage of the two-stage intervals when the log odds ratio
//! estimators are exactly normal with known variances.
//!
//! The coverage splits by the pretest outcome. The accept part factorizes
//! because the pooled estimator is independent of the test statistic. The
//! reject part equals `(1 - alpha)` minus the probability that the separate
//! intervals cover while the pretest accepts; in standardized coordinates
//! `(z1, z2)` that probability is `∫ g(z2) φ(z2) dz2` over `|z2| <= c_tilde`,
//! where `g` is the normal mass of `[-c_tilde, c_tilde] ∩ L2(z2)` and
//! `L2(z2) = [r z2 - k - d, r z2 + k - d]` with `r = σ2/σ1`,
//! `k = c_beta sqrt(1 + r²)` and `d = (θ1 - θ2)/σ1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::grid::{FailedPoint, GridValue, ProbGrid, SearchResult};
use crate::model::{CellProbs, Interval, StudyDesign};
use crate::normal::{self, NormalQuantiles};
use crate::quadrature::{integrate_piecewise, QuadratureSpec};

/// Tolerance band for reporting grid points tied at the minimum.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Large-sample parameters at one point of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticParams {
    pub theta1: f64,
    pub theta2: f64,
    pub sigma_sq1: f64,
    pub sigma_sq2: f64,
    /// Mean of the pretest statistic, `(θ1 - θ2) / sqrt(σ1² + σ2²)`.
    pub lambda: f64,
    /// Mean of the pooled estimator.
    pub theta_av: f64,
    /// Variance of the pooled estimator, `1 / (1/σ1² + 1/σ2²)`.
    pub w: f64,
}

/// `(1/n)(1/p + 1/(1-p)) + (1/n')(1/p' + 1/(1-p'))`.
pub fn population_variance(n: u32, n_prime: u32, p: f64, p_prime: f64) -> f64 {
    (1.0 / p + 1.0 / (1.0 - p)) / n as f64 + (1.0 / p_prime + 1.0 / (1.0 - p_prime)) / n_prime as f64
}

impl AsymptoticParams {
    pub fn from_moments(theta1: f64, sigma_sq1: f64, theta2: f64, sigma_sq2: f64) -> Self {
        let w = 1.0 / (1.0 / sigma_sq1 + 1.0 / sigma_sq2);
        AsymptoticParams {
            theta1,
            theta2,
            sigma_sq1,
            sigma_sq2,
            lambda: (theta1 - theta2) / (sigma_sq1 + sigma_sq2).sqrt(),
            theta_av: w * (theta1 / sigma_sq1 + theta2 / sigma_sq2),
            w,
        }
    }
}

pub fn asymptotic_params(design: &StudyDesign, p: &CellProbs<f64>) -> AsymptoticParams {
    AsymptoticParams::from_moments(
        p.theta1(),
        population_variance(design.n1, design.n1p, p.p1, p.p1p),
        p.theta2(),
        population_variance(design.n2, design.n2p, p.p2, p.p2p),
    )
}

/// `P(θ1 ∈ J, θ2 ∈ J, |T| <= c_beta)`.
pub fn accept_branch_prob(params: &AsymptoticParams, q: &NormalQuantiles) -> f64 {
    let sd = params.w.sqrt();
    let half = q.c_alpha * sd;
    let k1 = Interval::centered(params.theta1, half);
    let k2 = Interval::centered(params.theta2, half);
    let pooled_in_both = match k1.intersect(&k2) {
        Some(k) => normal::interval_prob((k.lo - params.theta_av) / sd, (k.hi - params.theta_av) / sd),
        None => 0.0,
    };
    let accept = normal::interval_prob(-q.c_beta - params.lambda, q.c_beta - params.lambda);
    pooled_in_both * accept
}

/// Coefficients of the acceptance band `L2(z2)` in standardized coordinates.
#[derive(Debug, Clone, Copy)]
struct AcceptBand {
    slope: f64,
    half_width: f64,
    shift: f64,
    c_tilde: f64,
}

impl AcceptBand {
    fn new(params: &AsymptoticParams, q: &NormalQuantiles) -> Self {
        let sigma1 = params.sigma_sq1.sqrt();
        let slope = params.sigma_sq2.sqrt() / sigma1;
        AcceptBand {
            slope,
            half_width: q.c_beta * (1.0 + slope * slope).sqrt(),
            shift: (params.theta1 - params.theta2) / sigma1,
            c_tilde: q.c_tilde_alpha,
        }
    }

    /// Endpoints `(a~, b~)` of `L1 ∩ L2(z2)`; empty when `a~ >= b~`.
    fn endpoints(&self, z2: f64) -> (f64, f64) {
        let center = self.slope * z2 - self.shift;
        (
            (center - self.half_width).max(-self.c_tilde),
            (center + self.half_width).min(self.c_tilde),
        )
    }

    fn g(&self, z2: f64) -> f64 {
        let (a, b) = self.endpoints(z2);
        normal::interval_prob(a, b)
    }

    /// Values of `z2` in `(-c_tilde, c_tilde)` where an endpoint of `L2(z2)`
    /// meets an endpoint of `L1`, sorted and deduplicated.
    fn kinks(&self) -> Vec<f64> {
        let c = self.c_tilde;
        let mut z: Vec<f64> = [
            (-c + self.half_width + self.shift) / self.slope,
            (c + self.half_width + self.shift) / self.slope,
            (-c - self.half_width + self.shift) / self.slope,
            (c - self.half_width + self.shift) / self.slope,
        ]
        .into_iter()
        .filter(|z| z.is_finite() && *z > -c && *z < c)
        .collect();
        z.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        z.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        z
    }
}

/// Points where `g` loses smoothness for these parameters; at most four.
pub fn kink_points(params: &AsymptoticParams, q: &NormalQuantiles) -> Vec<f64> {
    AcceptBand::new(params, q).kinks()
}

/// `g(z2)`, the conditional probability that the first separate interval
/// covers and the pretest accepts, given `z2`.
pub fn reject_integrand(params: &AsymptoticParams, q: &NormalQuantiles, z2: f64) -> f64 {
    AcceptBand::new(params, q).g(z2)
}

/// `P(θ1 ∈ I1, θ2 ∈ I2, |T| > c_beta)`.
pub fn reject_branch_prob(params: &AsymptoticParams, q: &NormalQuantiles, quad: &QuadratureSpec) -> Result<f64> {
    let band = AcceptBand::new(params, q);
    let c = band.c_tilde;
    let mut points = Vec::with_capacity(6);
    points.push(-c);
    points.extend(band.kinks());
    points.push(c);
    let integral = integrate_piecewise(|z| band.g(z) * normal::pdf(z), &points, quad)?;
    Ok((1.0 - q.alpha - integral.value).max(0.0))
}

/// Large-sample simultaneous coverage of the two-stage intervals at `p`.
pub fn asymptotic_coverage(
    design: &StudyDesign,
    p: &CellProbs<f64>,
    q: &NormalQuantiles,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let params = asymptotic_params(design, p);
    coverage_from_params(&params, q, quad)
}

pub fn coverage_from_params(params: &AsymptoticParams, q: &NormalQuantiles, quad: &QuadratureSpec) -> Result<f64> {
    let total = accept_branch_prob(params, q) + reject_branch_prob(params, q, quad)?;
    Ok(total.clamp(0.0, 1.0))
}

/// Large-sample coverage of the separate intervals without a pretest: the
/// product of two independent `sqrt(1 - alpha)` coverages, whatever `p` is.
pub fn no_pretest_coverage(q: &NormalQuantiles) -> f64 {
    1.0 - q.alpha
}

/// Minimizes [`asymptotic_coverage`] over the grid `(eps, ..., 1 - eps)^4`.
/// Points where quadrature fails are listed and skipped.
pub fn asymptotic_grid_min(
    design: &StudyDesign,
    q: &NormalQuantiles,
    epsilon: f64,
    h: f64,
    quad: &QuadratureSpec,
) -> Result<SearchResult> {
    design.validate()?;
    quad.validate()?;
    let grid = ProbGrid::new(epsilon, h)?;
    let values: Vec<Result<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| asymptotic_coverage(design, &grid.point(i), q, quad))
        .collect();

    let mut failures = Vec::new();
    let mut ok = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        match v {
            Ok(c) => ok.push(GridValue {
                grid_index: i,
                point: grid.point(i),
                coverage: c,
                std_err: None,
            }),
            Err(e) => failures.push(FailedPoint {
                grid_index: i,
                point: grid.point(i),
                message: e.to_string(),
            }),
        }
    }
    let best = ok
        .iter()
        .copied()
        .reduce(|a, b| if b.coverage < a.coverage { b } else { a })
        .ok_or_else(|| crate::Error::InputDomain("no grid point could be evaluated".into()))?;
    let ties: Vec<GridValue> = ok
        .into_iter()
        .filter(|v| v.coverage - best.coverage <= TIE_TOLERANCE)
        .collect();
    // Values within the tolerance are numerically indistinguishable, so the
    // reported argmin is the lowest grid index among them.
    Ok(SearchResult {
        min_coverage: best.coverage,
        argmin: ties[0].point,
        std_err: None,
        stage_trace: Vec::new(),
        ties,
        tie_tolerance: TIE_TOLERANCE,
        failures,
    })
}
