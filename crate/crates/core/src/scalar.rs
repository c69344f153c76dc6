//! Scalar abstraction for item values, utilities and entropies.
//!
//! Weights are whole resource units and stay integral wherever the exact
//! solver or the ledger needs them; everything measured in utility units is
//! generic over [`Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance used when comparing objective values.
    fn value_tolerance() -> Self {
        Self::from_f64(1e-9).unwrap()
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
