//! Scalar abstractions.
//!
//! Geometry and interval dynamics are exact and generic over the integer type
//! backing [`Ratio`]; `BigInt` never overflows, while `i64`/`i128` are faster
//! for shallow depths. Logarithmic quantities (estimates, pressure) are generic
//! over the floating type.

use std::fmt::{Debug, Display};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Signed, ToPrimitive, Zero};

/// Signed integer type usable as the numerator/denominator of exact rationals.
pub trait ExactInt:
    Integer + Signed + Clone + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl<T> ExactInt for T where
    T: Integer
        + Signed
        + Clone
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Floating type for logarithmic outputs: f32 or f64.
pub trait Real: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Integer literal in the scalar type. Panics only if `I` cannot hold a `u64`
/// value this crate itself produced (slope components, digit values).
pub(crate) fn int<I: ExactInt>(v: i64) -> I {
    I::from_i64(v).expect("integer type too narrow for small constant")
}

pub(crate) fn real<F: Real>(v: f64) -> F {
    F::from_f64(v).expect("finite f64 converts to any Real")
}

/// Natural logarithm of a nonnegative big integer, exact to f64 rounding for
/// values of any size. Returns -inf for zero.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map(f64::ln).unwrap_or(f64::INFINITY);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::MAX);
    top.ln() + (shift as f64) * std::f64::consts::LN_2
}

/// Natural logarithm of an exact count as the requested float type.
pub fn ln_count<F: Real>(x: &BigUint) -> F {
    real(ln_biguint(x))
}

/// Converts a `BigInt` rational into another backing type, if it fits.
pub fn narrow<I: ExactInt>(r: &Ratio<BigInt>) -> Option<Ratio<I>> {
    let n = I::from_i128(r.numer().to_i128()?)?;
    let d = I::from_i128(r.denom().to_i128()?)?;
    Some(Ratio::new(n, d))
}

/// Converts any rational into the `BigInt` backing.
pub fn widen<I: ExactInt>(r: &Ratio<I>) -> Ratio<BigInt> {
    let parse = |v: &I| v.to_string().parse::<BigInt>().expect("integer Display is decimal");
    Ratio::new(parse(r.numer()), parse(r.denom()))
}
