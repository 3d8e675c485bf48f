//! Simultaneous coverage of Woolf confidence intervals for two stratum-specific
//! log odds ratios when a homogeneity pretest chooses between separate and
//! pooled intervals.
//!
//! Three routes to the coverage probability are provided:
//!
//! * [`finite_sample::mc_coverage`] and [`finite_sample::enumerate_coverage`]
//!   under the binomial model, plus the staged grid search
//!   [`finite_sample::min_coverage_search`];
//! * [`asymptotic::asymptotic_coverage`], the large-sample value computed by
//!   quadrature, and its grid minimum [`asymptotic::asymptotic_grid_min`];
//! * [`boundary_scan`], which minimizes the large-sample coverage along a
//!   one-parameter perturbation away from the boundary.
//!
//! The model statistics and the quadrature are generic over [`Real`]; the
//! aliases below fix the scalar to `f64`, which every coverage routine uses.

pub mod asymptotic;
pub mod boundary_scan;
mod error;
pub mod finite_sample;
pub mod grid;
pub mod model;
pub mod normal;
pub mod quadrature;
mod scalar;

pub use error::{Error, Result};
pub use model::{AnalysisConfig, Branch, McStage, ObservedTables, Procedure, StudyDesign};
pub use normal::NormalQuantiles;
pub use scalar::Real;

pub type CellProbs = model::CellProbs<f64>;
pub type Interval = model::Interval<f64>;
pub type IntervalPair = model::IntervalPair<f64>;
pub type WoolfSummary = model::WoolfSummary<f64>;

pub type CellProbsF32 = model::CellProbs<f32>;
pub type IntervalF32 = model::Interval<f32>;
pub type WoolfSummaryF32 = model::WoolfSummary<f32>;
