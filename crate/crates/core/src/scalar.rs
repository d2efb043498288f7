//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use nalgebra::RealField;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// All algorithms are written against this trait. Tolerances are stated in
/// `f64` and converted through [`Real::tol`], which never returns a value
/// below a small multiple of the type's machine epsilon, so the same code
/// stays meaningful in single precision.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// The same type seen through `nalgebra`'s scalar traits. Kept separate so
    /// that `Float` and `RealField` methods never collide in generic code.
    type Na: RealField + Copy;

    fn into_na(self) -> Self::Na;

    fn from_na(x: Self::Na) -> Self;

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// A tolerance of nominal size `x`, floored at `256 * epsilon`.
    #[inline]
    fn tol(x: f64) -> Self {
        Self::lit(x).max(Self::epsilon() * Self::lit(256.0))
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            type Na = $t;

            #[inline]
            fn into_na(self) -> $t {
                self
            }

            #[inline]
            fn from_na(x: $t) -> $t {
                x
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
