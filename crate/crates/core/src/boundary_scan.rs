//! Coverage away from the boundary of the parameter space.
//!
//! For `(p1, p1')` fixed, the second stratum is perturbed along
//! `p2 = p1 + δ`, `p2' = p1' - r δ` with `|δ| <= Δ`, and the large-sample
//! coverage is minimized over `δ`. The direction `(1, -r)` moves `θ2` away
//! from `θ1` at a rate that sweeps `λ` through at least `[-2, 2]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotic::asymptotic_coverage;
use crate::error::{Error, Result};
use crate::model::{CellProbs, Interval, StudyDesign};
use crate::normal::NormalQuantiles;
use crate::quadrature::QuadratureSpec;

/// Slack when checking that `(p1, p1')` lies inside the scan rectangle.
const RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanGeometry {
    /// `Δ = sqrt(1/n1 + 1/n2)`.
    pub delta_cap: f64,
    /// `r = (1/n1' + 1/n2') / (1/n1 + 1/n2)`.
    pub r: f64,
    /// `Δ' = r Δ`.
    pub delta_cap_prime: f64,
    pub epsilon: f64,
    /// `[eps + Δ, 1 - eps - Δ]`.
    pub p1_range: Interval<f64>,
    /// `[eps + Δ', 1 - eps - Δ']`.
    pub p1p_range: Interval<f64>,
}

pub fn scan_geometry(design: &StudyDesign, epsilon: f64) -> Result<ScanGeometry> {
    design.validate()?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::domain(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    let inv = |n: u32| 1.0 / n as f64;
    let case_sum = inv(design.n1) + inv(design.n2);
    let delta_cap = case_sum.sqrt();
    let r = (inv(design.n1p) + inv(design.n2p)) / case_sum;
    let delta_cap_prime = r * delta_cap;
    if epsilon + delta_cap >= 0.5 {
        return Err(Error::domain(format!(
            "scan range for p1 is empty: epsilon + Delta = {} must be < 0.5",
            epsilon + delta_cap
        )));
    }
    if epsilon + delta_cap_prime >= 0.5 {
        return Err(Error::domain(format!(
            "scan range for p1' is empty: epsilon + Delta' = {} must be < 0.5",
            epsilon + delta_cap_prime
        )));
    }
    Ok(ScanGeometry {
        delta_cap,
        r,
        delta_cap_prime,
        epsilon,
        p1_range: Interval::new(epsilon + delta_cap, 1.0 - epsilon - delta_cap),
        p1p_range: Interval::new(epsilon + delta_cap_prime, 1.0 - epsilon - delta_cap_prime),
    })
}

impl ScanGeometry {
    pub fn contains(&self, p1: f64, p1p: f64) -> bool {
        p1 >= self.p1_range.lo - RANGE_SLACK
            && p1 <= self.p1_range.hi + RANGE_SLACK
            && p1p >= self.p1p_range.lo - RANGE_SLACK
            && p1p <= self.p1p_range.hi + RANGE_SLACK
    }

    /// The `k`-th of `steps + 1` equally spaced values on `[-Δ, Δ]`; zero when `steps = 0`.
    pub fn delta_at(&self, k: usize, steps: usize) -> f64 {
        if steps == 0 {
            return 0.0;
        }
        self.delta_cap * (2.0 * k as f64 / steps as f64 - 1.0)
    }

    /// `(p1, p1', p1 + δ, p1' - r δ)`.
    pub fn perturbed(&self, p1: f64, p1p: f64, delta: f64) -> Result<CellProbs<f64>> {
        CellProbs::new(p1, p1p, p1 + delta, p1p - self.r * delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialMin {
    pub min_coverage: f64,
    pub argmin_delta: f64,
}

/// Inputs shared by every evaluation of a scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanSettings {
    pub epsilon: f64,
    pub quantiles: NormalQuantiles,
    /// The δ grid has `delta_steps + 1` points; `0` means `δ = 0` only.
    pub delta_steps: usize,
    pub quad: QuadratureSpec,
}

impl ScanSettings {
    pub fn new(epsilon: f64, alpha: f64, beta: f64, delta_steps: usize, quad: QuadratureSpec) -> Result<Self> {
        Ok(ScanSettings {
            epsilon,
            quantiles: NormalQuantiles::new(alpha, beta)?,
            delta_steps,
            quad,
        })
    }
}

fn partial_min_in(
    design: &StudyDesign,
    geometry: &ScanGeometry,
    p1: f64,
    p1p: f64,
    settings: &ScanSettings,
) -> Result<PartialMin> {
    if !geometry.contains(p1, p1p) {
        return Err(Error::domain(format!(
            "({p1}, {p1p}) lies outside the scan rectangle {:?} x {:?}",
            geometry.p1_range, geometry.p1p_range
        )));
    }
    let mut best = PartialMin {
        min_coverage: f64::INFINITY,
        argmin_delta: 0.0,
    };
    for k in 0..=settings.delta_steps {
        let delta = geometry.delta_at(k, settings.delta_steps);
        let p = geometry.perturbed(p1, p1p, delta)?;
        let c = asymptotic_coverage(design, &p, &settings.quantiles, &settings.quad)?;
        if c < best.min_coverage {
            best = PartialMin {
                min_coverage: c,
                argmin_delta: delta,
            };
        }
    }
    Ok(best)
}

/// Large-sample coverage minimized over the δ grid at fixed `(p1, p1')`.
pub fn partial_min_coverage(design: &StudyDesign, p1: f64, p1p: f64, settings: &ScanSettings) -> Result<PartialMin> {
    let geometry = scan_geometry(design, settings.epsilon)?;
    partial_min_in(design, &geometry, p1, p1p, settings)
}

/// Partially minimized coverage on a uniform grid over the scan rectangle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourGrid {
    pub p1_values: Vec<f64>,
    pub p1p_values: Vec<f64>,
    /// `values[i][j]` belongs to `(p1_values[i], p1p_values[j])`.
    pub values: Vec<Vec<f64>>,
    pub argmin_delta: Vec<Vec<f64>>,
}

impl ContourGrid {
    /// Rows `(p1, p1', min coverage, argmin δ)` with `p1` varying slowest.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.p1_values.iter().enumerate().flat_map(move |(i, &p1)| {
            self.p1p_values
                .iter()
                .enumerate()
                .map(move |(j, &p1p)| (p1, p1p, self.values[i][j], self.argmin_delta[i][j]))
        })
    }
}

fn uniform(range: &Interval<f64>, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![0.5 * (range.lo + range.hi)];
    }
    (0..=steps)
        .map(|k| {
            if k == steps {
                range.hi
            } else {
                range.lo + range.width() * k as f64 / steps as f64
            }
        })
        .collect()
}

/// Evaluates [`partial_min_coverage`] on `(grid_steps + 1)²` points.
pub fn contour_grid(design: &StudyDesign, grid_steps: usize, settings: &ScanSettings) -> Result<ContourGrid> {
    let geometry = scan_geometry(design, settings.epsilon)?;
    let p1_values = uniform(&geometry.p1_range, grid_steps);
    let p1p_values = uniform(&geometry.p1p_range, grid_steps);
    let cells: Vec<PartialMin> = p1_values
        .iter()
        .flat_map(|&a| p1p_values.iter().map(move |&b| (a, b)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(a, b)| partial_min_in(design, &geometry, a, b, settings))
        .collect::<Result<_>>()?;
    let m = p1p_values.len();
    let values = cells
        .chunks(m)
        .map(|row| row.iter().map(|c| c.min_coverage).collect())
        .collect();
    let argmin_delta = cells
        .chunks(m)
        .map(|row| row.iter().map(|c| c.argmin_delta).collect())
        .collect();
    Ok(ContourGrid {
        p1_values,
        p1p_values,
        values,
        argmin_delta,
    })
}

/// First-order approximation to `λ` along the scan direction
/// `p2 = p1 + δ`, `p2' = p1' - r δ`, with both variances evaluated at `(p1, p1')`:
/// `λ ≈ -(δ / Δ) sqrt(1/(p1(1-p1)) + r/(p1'(1-p1')))`.
pub fn lambda_taylor(design: &StudyDesign, p1: f64, p1p: f64, delta: f64) -> Result<f64> {
    if !(p1 > 0.0 && p1 < 1.0 && p1p > 0.0 && p1p < 1.0) {
        return Err(Error::domain(format!("({p1}, {p1p}) must lie inside (0, 1)^2")));
    }
    design.validate()?;
    let inv = |n: u32| 1.0 / n as f64;
    let case_sum = inv(design.n1) + inv(design.n2);
    let control_sum = inv(design.n1p) + inv(design.n2p);
    let r = control_sum / case_sum;
    let (v, vp) = (p1 * (1.0 - p1), p1p * (1.0 - p1p));
    // numerator: δ'/v' - δ/v with δ' = -r δ
    let numerator = -(r / vp + 1.0 / v) * delta;
    let denominator = (case_sum / v + control_sum / vp).sqrt();
    Ok(numerator / denominator)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub scale: u32,
    pub delta_cap: f64,
    /// `None` when `(p1, p1')` falls outside the scaled rectangle.
    pub partial_min: Option<PartialMin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

/// Partially minimized coverage at fixed `(p1, p1')` for the designs `N · design`.
pub fn scaling_study(
    design: &StudyDesign,
    scales: &[u32],
    p1: f64,
    p1p: f64,
    settings: &ScanSettings,
) -> Result<Vec<ScalingPoint>> {
    scales
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::domain("scale factors must be positive"));
            }
            let scaled = design.scaled(n)?;
            let geometry = scan_geometry(&scaled, settings.epsilon)?;
            if !geometry.contains(p1, p1p) {
                return Ok(ScalingPoint {
                    scale: n,
                    delta_cap: geometry.delta_cap,
                    partial_min: None,
                    notice: Some(format!(
                        "({p1}, {p1p}) outside the scan rectangle at scale {n}; skipped"
                    )),
                });
            }
            Ok(ScalingPoint {
                scale: n,
                delta_cap: geometry.delta_cap,
                partial_min: Some(partial_min_in(&scaled, &geometry, p1, p1p, settings)?),
                notice: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn settings(delta_steps: usize) -> ScanSettings {
        ScanSettings::new(0.02, 0.05, 0.05, delta_steps, QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn symmetric_design_has_unit_ratio() {
        let g = scan_geometry(&StudyDesign::new(200, 200, 200, 200).unwrap(), 0.02).unwrap();
        assert_eq!(g.r, 1.0);
        assert_eq!(g.delta_cap_prime, g.delta_cap);
    }

    #[test]
    fn geometry_scales_with_design() {
        let base = scan_geometry(&StudyDesign::REFERENCE, 0.02).unwrap();
        let g = scan_geometry(&StudyDesign::REFERENCE.scaled(9).unwrap(), 0.02).unwrap();
        assert!((g.delta_cap - base.delta_cap / 3.0).abs() < 1e-15);
        assert!((g.r - base.r).abs() < 1e-12);
        assert_eq!(base.delta_cap_prime, base.r * base.delta_cap);
    }

    #[test]
    fn tiny_designs_refused() {
        let err = scan_geometry(&StudyDesign::new(2, 2, 2, 2).unwrap(), 0.02).unwrap_err();
        assert!(err.to_string().contains("Delta"));
    }

    #[test]
    fn single_delta_is_the_homogeneous_point() {
        let s = settings(0);
        let pm = partial_min_coverage(&StudyDesign::REFERENCE, 0.4, 0.6, &s).unwrap();
        let direct = asymptotic_coverage(
            &StudyDesign::REFERENCE,
            &CellProbs::new(0.4, 0.6, 0.4, 0.6).unwrap(),
            &s.quantiles,
            &s.quad,
        )
        .unwrap();
        assert_eq!(pm.min_coverage, direct);
        assert_eq!(pm.argmin_delta, 0.0);
    }

    #[test]
    fn refinement_is_monotone_and_stable() {
        let coarse = partial_min_coverage(&StudyDesign::REFERENCE, 0.5, 0.5, &settings(80)).unwrap();
        let fine = partial_min_coverage(&StudyDesign::REFERENCE, 0.5, 0.5, &settings(160)).unwrap();
        assert!(fine.min_coverage <= coarse.min_coverage);
        assert!(coarse.min_coverage - fine.min_coverage < 0.002);
        assert!(fine.min_coverage < 0.95);
    }

    #[test]
    fn out_of_rectangle_refused() {
        let err = partial_min_coverage(&StudyDesign::REFERENCE, 0.05, 0.5, &settings(4)).unwrap_err();
        assert!(matches!(err, Error::InputDomain(_)));
    }

    #[test]
    fn two_by_two_grid_matches_direct_calls() {
        let s = settings(8);
        let grid = contour_grid(&StudyDesign::REFERENCE, 1, &s).unwrap();
        assert_eq!(grid.rows().count(), 4);
        for (p1, p1p, v, d) in grid.rows() {
            let direct = partial_min_coverage(&StudyDesign::REFERENCE, p1, p1p, &s).unwrap();
            assert_eq!(v, direct.min_coverage);
            assert_eq!(d, direct.argmin_delta);
        }
    }

    #[test]
    fn taylor_lambda_at_zero() {
        assert_eq!(lambda_taylor(&StudyDesign::REFERENCE, 0.3, 0.6, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn taylor_lambda_tracks_exact_lambda_for_small_delta() {
        let d = StudyDesign::REFERENCE;
        let g = scan_geometry(&d, 0.02).unwrap();
        let delta = 1e-4;
        let p = g.perturbed(0.4, 0.55, delta).unwrap();
        let exact = crate::asymptotic::asymptotic_params(&d, &p).lambda;
        let approx = lambda_taylor(&d, 0.4, 0.55, delta).unwrap();
        assert!((exact - approx).abs() < 1e-3 * approx.abs(), "{exact} {approx}");
    }

    #[test]
    fn scaling_skips_out_of_range_scale() {
        let d = StudyDesign::new(60, 60, 60, 60).unwrap();
        // Δ = 0.18 at N = 1, so p1 = 0.15 is only inside once the design grows
        let pts = scaling_study(&d, &[1, 4], 0.15, 0.5, &settings(4)).unwrap();
        assert!(pts[0].partial_min.is_none() && pts[0].notice.is_some());
        assert!(pts[1].partial_min.is_some());
    }

    proptest! {
        #[test]
        fn perturbed_points_stay_in_parameter_space(u in 0.0f64..=1.0, v in 0.0f64..=1.0, k in 0usize..=80) {
            let g = scan_geometry(&StudyDesign::REFERENCE, 0.02).unwrap();
            let p1 = g.p1_range.lo + u * g.p1_range.width();
            let p1p = g.p1p_range.lo + v * g.p1p_range.width();
            let p = g.perturbed(p1, p1p, g.delta_at(k, 80)).unwrap();
            for x in p.to_array() {
                prop_assert!((0.02 - 1e-12..=0.98 + 1e-12).contains(&x));
            }
        }

        #[test]
        fn taylor_bound(u in 0.0f64..=1.0, v in 0.0f64..=1.0, t in -1.0f64..=1.0) {
            let d = StudyDesign::REFERENCE;
            let g = scan_geometry(&d, 0.02).unwrap();
            let p1 = g.p1_range.lo + u * g.p1_range.width();
            let p1p = g.p1p_range.lo + v * g.p1p_range.width();
            let delta = t * g.delta_cap;
            let lam = lambda_taylor(&d, p1, p1p, delta).unwrap();
            prop_assert!(lam.abs() >= 2.0 * delta.abs() / g.delta_cap * (1.0 - 1e-12));
        }
    }
}
