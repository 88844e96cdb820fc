//! Exact integer helpers over arbitrary-precision integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Int = BigInt;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(&'static str),
}

pub fn int(v: i64) -> Int {
    BigInt::from(v)
}

/// Least integer `q` with `q >= n / d`.
pub fn ceil_div(n: &Int, d: &Int) -> Result<Int, ArithError> {
    if d.is_zero() {
        return Err(ArithError::DivisionByZero);
    }
    Ok(Integer::div_ceil(n, d))
}

/// Greatest integer `q` with `q <= n / d`.
pub fn floor_div(n: &Int, d: &Int) -> Result<Int, ArithError> {
    if d.is_zero() {
        return Err(ArithError::DivisionByZero);
    }
    Ok(Integer::div_floor(n, d))
}

/// Nonnegative gcd; `gcd(0, 0) = 0`.
pub fn gcd(a: &Int, b: &Int) -> Int {
    a.gcd(b)
}

/// Positive lcm of two nonzero integers.
pub fn lcm(a: &Int, b: &Int) -> Result<Int, ArithError> {
    if a.is_zero() || b.is_zero() {
        return Err(ArithError::Domain("lcm of zero"));
    }
    Ok(a.lcm(b).abs())
}

/// Returns `(d, c1, c2)` with `d = gcd(a, b) >= 0` and `c1*a + c2*b = d`.
pub fn extended_gcd(a: &Int, b: &Int) -> Result<(Int, Int, Int), ArithError> {
    if a.is_zero() && b.is_zero() {
        return Err(ArithError::Domain("extended gcd of (0, 0)"));
    }
    if !a.is_zero() && (b % a).is_zero() {
        return Ok((a.abs(), a.signum(), Int::zero()));
    }
    let (mut old_r, mut r) = (a.clone(), b.clone());
    let (mut old_s, mut s) = (Int::one(), Int::zero());
    let (mut old_t, mut t) = (Int::zero(), Int::one());
    while !r.is_zero() {
        let q = old_r.div_floor(&r);
        let next_r = &old_r - &q * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_s = &old_s - &q * &s;
        old_s = std::mem::replace(&mut s, next_s);
        let next_t = &old_t - &q * &t;
        old_t = std::mem::replace(&mut t, next_t);
    }
    if old_r.is_negative() {
        Ok((-old_r, -old_s, -old_t))
    } else {
        Ok((old_r, old_s, old_t))
    }
}

/// True iff `d` divides `n` (`d != 0`).
pub fn divides(d: &Int, n: &Int) -> bool {
    if d.is_zero() {
        return n.is_zero();
    }
    (n % d).is_zero()
}
