//! Scalar abstraction. Every numerical routine in this crate is generic over
//! a floating-point type implementing [`Real`]; `f64` and `f32` both qualify.
//! Default tolerances quoted in module docs assume `f64`.

use num_traits::{Float, FloatConst, FromPrimitive};

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Conversion of an `f64` constant into the scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant must convert")
    }

    /// Conversion of a grid size or mode index.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize must convert to scalar")
    }

    #[inline]
    fn half(self) -> Self {
        self / (Self::one() + Self::one())
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + std::fmt::LowerExp
        + std::iter::Sum
        + Send
        + Sync
        + 'static
{
}
