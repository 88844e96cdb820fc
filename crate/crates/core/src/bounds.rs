//! Interval evaluation of polynomials under M, bound computation for inequalities and
//! divisibility constraints, the improves predicate and conflict detection.

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::arith::{ceil_div, divides, extended_gcd, floor_div, gcd, Int};
use crate::model::{Bounds, Constraint, Direction, LinearPolynomial, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("variable does not occur in the constraint")]
    VarNotInConstraint,
    #[error("polynomial is not fixed")]
    NotFixed,
    #[error("required bound is infinite")]
    InfiniteBound,
}

/// A bound value; variant order gives `NegInf < Finite(_) < PosInf`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundValue {
    NegInf,
    Finite(Int),
    PosInf,
}

impl BoundValue {
    pub fn finite(&self) -> Option<&Int> {
        match self {
            BoundValue::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn into_finite(self) -> Option<Int> {
        match self {
            BoundValue::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, BoundValue::Finite(_))
    }

    fn lower_of(v: Option<&Int>) -> BoundValue {
        v.map_or(BoundValue::NegInf, |v| BoundValue::Finite(v.clone()))
    }

    fn upper_of(v: Option<&Int>) -> BoundValue {
        v.map_or(BoundValue::PosInf, |v| BoundValue::Finite(v.clone()))
    }
}

pub fn lower_var<B: Bounds + ?Sized>(x: Var, m: &B) -> BoundValue {
    BoundValue::lower_of(m.lower_of(x))
}

pub fn upper_var<B: Bounds + ?Sized>(x: Var, m: &B) -> BoundValue {
    BoundValue::upper_of(m.upper_of(x))
}

/// Smallest value of `p` under the bounds of `m`.
pub fn lower<B: Bounds + ?Sized>(p: &LinearPolynomial, m: &B) -> BoundValue {
    let mut acc = p.constant().clone();
    for (x, c) in p.terms() {
        let b = if c.is_positive() {
            m.lower_of(x)
        } else {
            m.upper_of(x)
        };
        match b {
            Some(b) => acc += c * b,
            None => return BoundValue::NegInf,
        }
    }
    BoundValue::Finite(acc)
}

/// Largest value of `p` under the bounds of `m`.
pub fn upper<B: Bounds + ?Sized>(p: &LinearPolynomial, m: &B) -> BoundValue {
    let mut acc = p.constant().clone();
    for (x, c) in p.terms() {
        let b = if c.is_positive() {
            m.upper_of(x)
        } else {
            m.lower_of(x)
        };
        match b {
            Some(b) => acc += c * b,
            None => return BoundValue::PosInf,
        }
    }
    BoundValue::Finite(acc)
}

pub fn is_fixed_poly<B: Bounds + ?Sized>(p: &LinearPolynomial, m: &B) -> bool {
    p.vars().all(|x| m.is_fixed(x))
}

/// Value of a polynomial whose variables are all fixed.
pub fn val<B: Bounds + ?Sized>(p: &LinearPolynomial, m: &B) -> Result<Int, BoundsError> {
    let mut acc = p.constant().clone();
    for (x, c) in p.terms() {
        acc += c * m.fixed_value(x).ok_or(BoundsError::NotFixed)?;
    }
    Ok(acc)
}

/// Direction of the bound an inequality `ax + p <= 0` gives on `x`.
pub fn ineq_direction(j: &LinearPolynomial, x: Var) -> Result<Direction, BoundsError> {
    let a = j.coeff_ref(x).ok_or(BoundsError::VarNotInConstraint)?;
    Ok(if a.is_positive() {
        Direction::Upper
    } else {
        Direction::Lower
    })
}

/// Strictest bound on `x` implied by `j <= 0` under `m`: an upper bound when the
/// coefficient of `x` is positive, a lower bound otherwise.
pub fn bound_ineq<B: Bounds + ?Sized>(
    j: &LinearPolynomial,
    x: Var,
    m: &B,
) -> Result<BoundValue, BoundsError> {
    let a = j.coeff_ref(x).ok_or(BoundsError::VarNotInConstraint)?;
    let rest = lower_without(j, x, m);
    Ok(match rest {
        None if a.is_positive() => BoundValue::PosInf,
        None => BoundValue::NegInf,
        Some(l) if a.is_positive() => BoundValue::Finite(-ceil_div(&l, a).expect("nonzero")),
        Some(l) => BoundValue::Finite(-floor_div(&l, a).expect("nonzero")),
    })
}

fn lower_without<B: Bounds + ?Sized>(j: &LinearPolynomial, x: Var, m: &B) -> Option<Int> {
    let mut acc = j.constant().clone();
    for (y, c) in j.terms() {
        if y == x {
            continue;
        }
        let b = if c.is_positive() {
            m.lower_of(y)
        } else {
            m.upper_of(y)
        };
        acc += c * b?;
    }
    Some(acc)
}

/// Splits `d | p` into `(a, k)` with `a > 0` the coefficient of `x` and `k` the value of
/// the fixed remainder, negating the constraint when the coefficient is negative.
pub fn div_parts<B: Bounds + ?Sized>(
    p: &LinearPolynomial,
    x: Var,
    m: &B,
) -> Result<(Int, Int), BoundsError> {
    let a = p.coeff_ref(x).ok_or(BoundsError::VarNotInConstraint)?;
    let k = val(&p.without(x), m)?;
    if a.is_negative() {
        Ok((-a, -k))
    } else {
        Ok((a.clone(), k))
    }
}

/// Bound on `x` from `d | ax + p` with `p` fixed, rounding once through the quotient
/// `(ax + p) / d`. No solution lies strictly between the current bound and the result, but
/// the result need not be a solution.
pub fn bound_div<B: Bounds + ?Sized>(
    d: &Int,
    p: &LinearPolynomial,
    x: Var,
    m: &B,
    direction: Direction,
) -> Result<Int, BoundsError> {
    let (a, k) = div_parts(p, x, m)?;
    let b = m.bound_of(x, direction).ok_or(BoundsError::InfiniteBound)?;
    let ab_k = &a * b + &k;
    Ok(match direction {
        Direction::Lower => ceil_div(&(d * ceil_div(&ab_k, d).unwrap() - &k), &a).unwrap(),
        Direction::Upper => floor_div(&(d * floor_div(&ab_k, d).unwrap() - &k), &a).unwrap(),
    })
}

/// Negative coefficient: `lower(x) < bound <= upper(x)`; positive: `lower(x) <= bound < upper(x)`.
pub fn improves<B: Bounds + ?Sized>(j: &LinearPolynomial, x: Var, m: &B) -> bool {
    let Ok(b) = bound_ineq(j, x, m) else {
        return false;
    };
    if !b.is_finite() {
        return false;
    }
    let (lo, hi) = (lower_var(x, m), upper_var(x, m));
    if j.coeff(x).is_negative() {
        lo < b && b <= hi
    } else {
        lo <= b && b < hi
    }
}

/// Smallest `b` in `[lo, hi]` with `d | a*b + k`, solving the congruence directly.
pub fn first_div_solution(d: &Int, a: &Int, k: &Int, lo: &Int, hi: &Int) -> Option<Int> {
    if lo > hi {
        return None;
    }
    let b = least_solution_at_or_above(d, a, k, lo)?;
    (b <= *hi).then_some(b)
}

/// Smallest `b >= lo` with `d | a*b + k` (`d > 0`), if the congruence is solvable.
pub fn least_solution_at_or_above(d: &Int, a: &Int, k: &Int, lo: &Int) -> Option<Int> {
    let (b0, period) = solve_congruence(d, a, k)?;
    let shift = floor_div(&(lo - &b0 + &period - Int::one()), &period).unwrap();
    Some(b0 + shift * period)
}

/// Largest `b <= hi` with `d | a*b + k` (`d > 0`), if the congruence is solvable.
pub fn greatest_solution_at_or_below(d: &Int, a: &Int, k: &Int, hi: &Int) -> Option<Int> {
    let (b0, period) = solve_congruence(d, a, k)?;
    let shift = floor_div(&(hi - &b0), &period).unwrap();
    Some(b0 + shift * period)
}

/// Solutions of `d | a*b + k` as `b0 + e*period`; `None` when `gcd(a, d)` does not divide `k`.
pub fn solve_congruence(d: &Int, a: &Int, k: &Int) -> Option<(Int, Int)> {
    let g = gcd(a, d);
    if g.is_zero() {
        return None;
    }
    if !divides(&g, k) {
        return None;
    }
    let period = d / &g;
    if period.is_one() {
        return Some((Int::zero(), period));
    }
    // a/g is invertible modulo d/g
    let (_, inv, _) = extended_gcd(&(a / &g), &period).unwrap();
    let b0 = (-(k / &g) * inv).mod_floor(&period);
    Some((b0, period))
}

/// Inequality: `lower(p) > 0`. Divisibility `d | ax + p`: all but at most one variable fixed,
/// the remaining variable bounded on both sides, and no value in its interval works.
pub fn is_conflict<B: Bounds + ?Sized>(c: &Constraint, m: &B) -> bool {
    match c {
        Constraint::Ineq(p) => matches!(lower(p, m), BoundValue::Finite(v) if v.is_positive()),
        Constraint::Div(d, p) => {
            let mut unfixed = p.vars().filter(|x| !m.is_fixed(*x));
            let x = match (unfixed.next(), unfixed.next()) {
                (None, _) => match p.vars().next() {
                    Some(x) => x,
                    None => return !divides(d, p.constant()),
                },
                (Some(x), None) => x,
                _ => return false,
            };
            let (Some(lo), Some(hi)) = (m.lower_of(x), m.upper_of(x)) else {
                return false;
            };
            let (a, k) = div_parts(p, x, m).expect("remainder fixed");
            first_div_solution(d, &a, &k, lo, hi).is_none()
        }
    }
}

/// Inequality: `upper(p) <= 0`. Divisibility: every variable fixed and the value divisible.
pub fn is_satisfied<B: Bounds + ?Sized>(c: &Constraint, m: &B) -> bool {
    match c {
        Constraint::Ineq(p) => matches!(upper(p, m), BoundValue::Finite(v) if !v.is_positive()),
        Constraint::Div(d, p) => val(p, m).is_ok_and(|v| divides(d, &v)),
    }
}
