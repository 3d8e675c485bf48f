//! Finite-sample simultaneous coverage under the binomial model: Monte Carlo,
//! exact enumeration of every table outcome, and the staged grid search for
//! the minimum.

mod enumerate;
mod mc;
mod rng;
mod search;

pub use enumerate::{enumerate_coverage, enumerate_coverage_with, EnumerateOptions};
pub use mc::{mc_coverage, McEstimate, CHUNK_REPS};
pub use rng::chunk_rng;
pub use search::min_coverage_search;

use crate::model::{margin_stat, MarginStat, StudyDesign};

/// Margin statistics for every possible count of each of the four margins.
#[derive(Debug, Clone)]
pub(crate) struct DesignTables {
    pub design: StudyDesign,
    pub margins: [Vec<MarginStat<f64>>; 4],
}

impl DesignTables {
    pub fn new(design: &StudyDesign) -> Self {
        let table = |n: u32| (0..=n).map(|y| margin_stat::<f64>(n, y)).collect::<Vec<_>>();
        DesignTables {
            design: *design,
            margins: design.margins().map(table),
        }
    }
}
