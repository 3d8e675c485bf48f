use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

/// Real scalar the model statistics and the quadrature are generic over.
pub trait Real: Float + FromPrimitive + Debug + Send + Sync + 'static {
    /// Converts an `f64` constant. Panics only for types that cannot hold finite `f64`s.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
