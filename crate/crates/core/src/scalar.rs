//! Scalar abstractions shared by the numeric modules.
//!
//! Two layers: [`LpScalar`] is anything the simplex solver can pivot on
//! (`f32`, `f64`, and exact [`Rational`]); [`Real`] adds the floating-point
//! surface needed by sampling, moments and geometry.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational used for exact LP solves.
pub type Rational = BigRational;

/// Ordered field the simplex solver operates over.
pub trait LpScalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    /// True when arithmetic is exact and all tolerances collapse to zero.
    const EXACT: bool;

    /// Conversion from `f64`; exact for rational scalars.
    fn of_f64(x: f64) -> Self;

    fn as_f64(&self) -> f64;

    /// Exact rational value of `self`. Finite floats are dyadic rationals, so
    /// this never rounds.
    fn to_rational(&self) -> Rational;

    /// Default feasibility/optimality tolerance for this scalar.
    fn default_tolerance() -> f64;

    /// Entries with magnitude at or below this are never used as pivots.
    fn default_pivot_tolerance() -> f64;

    /// Round-off cleanup after a pivot: values this small become zero.
    fn clean(self) -> Self {
        self
    }
}

fn float_to_rational(x: f64) -> Rational {
    BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
}

impl LpScalar for f64 {
    const EXACT: bool = false;

    fn of_f64(x: f64) -> Self {
        x
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Rational {
        float_to_rational(*self)
    }

    fn default_tolerance() -> f64 {
        1e-9
    }

    fn default_pivot_tolerance() -> f64 {
        1e-9
    }

    fn clean(self) -> Self {
        if self.abs() < 1e-15 {
            0.0
        } else {
            self
        }
    }
}

impl LpScalar for f32 {
    const EXACT: bool = false;

    fn of_f64(x: f64) -> Self {
        x as f32
    }

    fn as_f64(&self) -> f64 {
        f64::from(*self)
    }

    fn to_rational(&self) -> Rational {
        float_to_rational(f64::from(*self))
    }

    fn default_tolerance() -> f64 {
        1e-5
    }

    fn default_pivot_tolerance() -> f64 {
        1e-6
    }

    fn clean(self) -> Self {
        if self.abs() < 1e-7 {
            0.0
        } else {
            self
        }
    }
}

impl LpScalar for Rational {
    const EXACT: bool = true;

    fn of_f64(x: f64) -> Self {
        float_to_rational(x)
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn default_tolerance() -> f64 {
        0.0
    }

    fn default_pivot_tolerance() -> f64 {
        0.0
    }
}

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    LpScalar + Float + FromPrimitive + Display + FromStr + Sum + Copy + Default
{
    fn lit(x: f64) -> Self {
        <Self as LpScalar>::of_f64(x)
    }
}

impl Real for f32 {}
impl Real for f64 {}
