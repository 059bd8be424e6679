use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type used for metric values, system scores and retrieval scores.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Convert a literal. Every finite `f64` is representable (possibly rounded) in `f32`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in a float")
    }

    /// Descending comparison that treats incomparable values as equal.
    fn cmp_desc(a: &Self, b: &Self) -> std::cmp::Ordering {
        b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
