//! Scalar abstraction shared by the form and measure code.
//!
//! Everything that only needs field arithmetic (assembly, Schur complements,
//! harmonic extension, energy measures) is written against [`Scalar`], so the
//! same code runs in `f64` for deep graphs and in exact rationals when a value
//! has to be certified.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Clone + Debug + PartialEq + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `true` when arithmetic is exact, i.e. no rounding tolerances apply.
    const EXACT: bool;

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("i64 is representable")
    }

    fn from_count(n: u128) -> Self {
        Self::from_u128(n).expect("u128 is representable")
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
}

impl Scalar for f32 {
    const EXACT: bool = false;
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_count(n: u128) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_ratio_is_reduced() {
        let r = BigRational::ratio(6, 10);
        assert_eq!(r, BigRational::ratio(3, 5));
        assert!((r.as_f64() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn counts_convert() {
        assert_eq!(f64::from_count(27), 27.0);
        assert_eq!(BigRational::from_count(1 << 70).as_f64(), (1u128 << 70) as f64);
    }
}
