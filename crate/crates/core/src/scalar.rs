use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by the learning and scoring code: `f32` or `f64`.
///
/// `Display`/`FromStr` are required because weights and scores are written
/// to plain-text artifacts and must read back to the same value.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Display + FromStr + Debug + Default + Sum + Send + Sync + 'static
{
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable as float")
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable as float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
