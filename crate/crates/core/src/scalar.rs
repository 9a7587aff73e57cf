//! Numeric abstractions shared by the latency, cost and counting code.
//!
//! Latencies, costs and summary statistics are generic over [`Scalar`]
//! (implemented for `f32` and `f64`). Search-space sizes are generic over
//! [`Count`], which covers the fixed-width unsigned integers as well as
//! `num_bigint::BigUint` for exact arbitrary-precision counts.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_integer::Integer;
use num_traits::{CheckedAdd, CheckedMul, Float, FromPrimitive, One, ToPrimitive, Zero};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type used for latencies, costs and derived statistics.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`, saturating to infinity on overflow.
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap_or_else(Self::infinity)
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Converts a count (e.g. a batch length) into the scalar domain.
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).unwrap_or_else(Self::infinity)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Integer type used for exact search-space counting.
///
/// Arithmetic goes through the checked operations so fixed-width types
/// report overflow instead of wrapping.
pub trait Count:
    Clone + Ord + Zero + One + CheckedAdd + CheckedMul + Integer + FromPrimitive + Display + Debug
{
}

impl<T> Count for T where
    T: Clone + Ord + Zero + One + CheckedAdd + CheckedMul + Integer + FromPrimitive + Display + Debug
{
}
