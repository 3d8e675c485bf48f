//! The probability grid `(eps, eps + h, ..., 1 - eps)^4` shared by the minimum
//! searches, and the record they report.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::CellProbs;

/// One axis of the search grid: `eps + k h` for `k = 0, 1, ...` while the value
/// stays at or below `1 - eps` (with slack for the rounding of `k h`).
pub fn grid_axis(epsilon: f64, h: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::domain(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("grid step must be positive, got {h}")));
    }
    let steps = ((1.0 - 2.0 * epsilon) / h + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| epsilon + k as f64 * h).collect())
}

/// Lexicographic product of one axis with itself four times; `p1` varies slowest.
#[derive(Debug, Clone)]
pub struct ProbGrid {
    axis: Vec<f64>,
}

impl ProbGrid {
    pub fn new(epsilon: f64, h: f64) -> Result<Self> {
        Ok(ProbGrid {
            axis: grid_axis(epsilon, h)?,
        })
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn len(&self) -> usize {
        self.axis.len().pow(4)
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn point(&self, index: usize) -> CellProbs<f64> {
        let m = self.axis.len();
        let (i4, rest) = (index % m, index / m);
        let (i3, rest) = (rest % m, rest / m);
        let (i2, i1) = (rest % m, rest / m);
        CellProbs {
            p1: self.axis[i1],
            p1p: self.axis[i2],
            p2: self.axis[i3],
            p2p: self.axis[i4],
        }
    }
}

/// A grid point with its coverage value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridValue {
    pub grid_index: usize,
    pub point: CellProbs<f64>,
    pub coverage: f64,
    /// Monte Carlo standard error; absent for quadrature values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTrace {
    pub stage: usize,
    pub reps: u64,
    /// Candidates estimated at this stage.
    pub evaluated: usize,
    /// The lowest estimates of the stage in ascending order, as many as move on.
    pub ranked: Vec<GridValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedPoint {
    pub grid_index: usize,
    pub point: CellProbs<f64>,
    pub message: String,
}

/// Result of a minimum-coverage search over the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub min_coverage: f64,
    pub argmin: CellProbs<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
    /// Monte Carlo stages; empty for the quadrature search.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub stage_trace: Vec<StageTrace>,
    /// Every grid point whose value lies within `tie_tolerance` of the minimum.
    pub ties: Vec<GridValue>,
    pub tie_tolerance: f64,
    pub failures: Vec<FailedPoint>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_axis() {
        let a = grid_axis(0.02, 0.096).unwrap();
        assert_eq!(a.len(), 11);
        assert!((a[10] - 0.98).abs() < 1e-12);
        assert!((a[7] - 0.692).abs() < 1e-12);
        assert_eq!(grid_axis(0.02, 0.48).unwrap().len(), 3);
        assert_eq!(grid_axis(0.02, 2.0).unwrap(), vec![0.02]);
        assert!(grid_axis(0.6, 0.1).is_err());
    }

    #[test]
    fn lexicographic_indexing() {
        let g = ProbGrid::new(0.02, 0.48).unwrap();
        assert_eq!(g.len(), 81);
        let p = g.point(1);
        assert_eq!((p.p1, p.p2p), (0.02, 0.5));
        let p = g.point(27);
        assert_eq!((p.p1, p.p1p), (0.5, 0.02));
        let p = g.point(80);
        assert_eq!(p.to_array(), [0.98; 4]);
    }
}
