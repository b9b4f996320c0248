//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Real scalar usable by the lattice, model and information-geometry code.
///
/// Implemented for `f32` and `f64`. Constants are built through [`Scalar::of`],
/// which is exact for every literal used in this crate.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Draw one standard normal variate.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw one uniform variate on `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Parse from decimal text.
    fn parse_decimal(text: &str) -> Option<Self>;

    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("every f64 literal converts to a float type")
    }

    #[inline]
    fn from_count(value: usize) -> Self {
        Self::from_usize(value).expect("counts convert to a float type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float types convert to f64")
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.sample::<$t, _>(StandardNormal)
            }

            #[inline]
            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }

            fn parse_decimal(text: &str) -> Option<Self> {
                text.trim().parse::<$t>().ok()
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Sum of all entries, accumulated left to right.
pub fn entry_sum<F: Scalar>(values: &[F]) -> F {
    values.iter().copied().fold(F::zero(), |acc, v| acc + v)
}
