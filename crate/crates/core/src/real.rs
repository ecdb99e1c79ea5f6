//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Floating-point scalar the model, sampler and post-processing are generic over.
///
/// Sampling hooks live on the trait so generic code does not need to carry
/// `StandardNormal: Distribution<T>` style bounds around.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + FromStr
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn c(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma(shape, scale) variate. Both arguments must be positive.
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut R) -> Self;

    /// Uniform variate on the open interval (0, 1).
    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Standard Gumbel (EV1) variate.
    fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R) -> Self {
        -(-Self::sample_open01(rng).ln()).ln()
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn c(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            #[inline]
            fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn sample_gamma<R: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut R) -> Self {
                Gamma::new(shape, scale)
                    .expect("gamma parameters must be positive")
                    .sample(rng)
            }

            #[inline]
            fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.sample(rand_distr::Open01)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
