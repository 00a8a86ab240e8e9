//! Scalar abstraction shared by the analytic parts of the crate.

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point type the exponent formulas, fits and quadratures are written against.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for literals.
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(x: usize) -> Self {
        <Self as FromPrimitive>::from_usize(x).expect("usize representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
