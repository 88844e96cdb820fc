//! Justification synthesis: resolution against propagated bounds, the rule system that
//! turns a propagating inequality into one with a unit coefficient on the propagated
//! variable, and justifications for divisibility propagation.

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::arith::{ceil_div, floor_div, Int};
use crate::bounds::{div_parts, BoundsError};
use crate::model::{Bound, BoundStack, Bounds, Direction, LinearPolynomial, Var, VariableOrder};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TightError {
    #[error("bound is decided, not propagated")]
    NotPropagated,
    #[error("no rule applies before the right side is constant")]
    Stuck,
    #[error("decision on v{} has no propagated bound below it", .0.0)]
    MissingPropagatedBound(Var),
    #[error("rule would keep restricted variable v{} in the justification", .0.0)]
    Restricted(Var),
    #[error("pivot has zero coefficient")]
    ZeroPivot,
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Placeholder for the auxiliary variable of divisibility justifications. It never
/// enters a problem or a bound stack.
pub const AUX: Var = Var(u32::MAX);

/// Eliminates the bounded variable of `gamma` from `j <= 0` when the signs oppose,
/// otherwise returns `j` unchanged.
pub fn resolve(gamma: &Bound, j: &LinearPolynomial) -> Result<LinearPolynomial, TightError> {
    let just = gamma.justification().ok_or(TightError::NotPropagated)?;
    Ok(resolve_with(gamma.var, just, j))
}

fn resolve_with(x: Var, just: &LinearPolynomial, j: &LinearPolynomial) -> LinearPolynomial {
    let a = j.coeff(x);
    let c = just.coeff(x);
    if (&a * &c).is_negative() {
        let mut out = just.without(x).scaled(&a.abs());
        out.add_scaled(&j.without(x), &c.abs());
        out
    } else {
        j.clone()
    }
}

/// One step of a justification run, for tracing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TightStep {
    Consume(Var),
    ResolveImplied(Var),
    DecideLower(Var),
    DecideLowerNeg(Var),
    DecideUpper(Var),
    DecideUpperPos(Var),
    Skip(Var),
    Round,
}

/// Tight justification of the bound `j <= 0` gives on `x`, computed against the whole stack.
pub fn tight(
    j: &LinearPolynomial,
    x: Var,
    m: &BoundStack,
    order: &VariableOrder,
) -> Result<LinearPolynomial, TightError> {
    tight_in(j, x, m, m.len(), order, &[], &mut None)
}

/// Runs the rule system on `j` pivoting on `x` over the first `len` entries of `m`.
/// Variables in `restricted` (and the pivot) are never moved to the left side.
pub fn tight_in(
    j: &LinearPolynomial,
    x: Var,
    m: &BoundStack,
    len: usize,
    order: &VariableOrder,
    restricted: &[Var],
    log: &mut Option<Vec<TightStep>>,
) -> Result<LinearPolynomial, TightError> {
    let signed = j.coeff(x);
    if signed.is_zero() {
        return Err(TightError::ZeroPivot);
    }
    let a = signed.abs();
    let mut left = LinearPolynomial::term(signed.clone(), x);
    let mut right = j.without(x);
    let mut pos = len.min(m.len());
    let keep_out = |y: Var| y == x || restricted.contains(&y);
    let mut note = |s: TightStep| {
        if let Some(l) = log.as_mut() {
            l.push(s)
        }
    };

    loop {
        let consumable = order.max_of(
            right
                .terms()
                .filter(|(y, c)| !keep_out(*y) && c.is_multiple_of(&a))
                .map(|(y, _)| y),
        );
        if let Some(y) = consumable {
            let c = right.remove_term(y).unwrap();
            left.add_term(y, &c);
            note(TightStep::Consume(y));
            continue;
        }
        if right.is_constant() {
            note(TightStep::Round);
            let mut out = LinearPolynomial::constant_poly(ceil_div(right.constant(), &a).unwrap());
            for (y, c) in left.terms() {
                out.add_term(y, &(c / &a));
            }
            return Ok(out);
        }
        if pos == 0 {
            return Err(TightError::Stuck);
        }
        pos -= 1;
        let gamma = m.get(pos);
        let y = gamma.var;
        let c = right.coeff(y);
        if c.is_zero() {
            note(TightStep::Skip(y));
            continue;
        }
        if let Some(just) = gamma.justification() {
            right = resolve_with(y, just, &right);
            note(TightStep::ResolveImplied(y));
            continue;
        }
        let below = m
            .latest(y, gamma.dir.opposite(), pos)
            .ok_or(TightError::MissingPropagatedBound(y))?;
        let just = m
            .get(below)
            .justification()
            .ok_or(TightError::MissingPropagatedBound(y))?;
        // `just` is `y + q <= 0` under a decided lower bound, `-y + q <= 0` under a decided upper.
        let q = just.without(y);
        match (gamma.dir, c.is_positive()) {
            (Direction::Lower, true) => {
                if keep_out(y) {
                    return Err(TightError::Restricted(y));
                }
                let k = ceil_div(&c, &a).unwrap();
                let ak = &a * &k;
                left.add_term(y, &ak);
                right.remove_term(y);
                right.add_scaled(&q, &(&ak - &c));
                note(TightStep::DecideLower(y));
            }
            (Direction::Lower, false) => {
                right = resolve_with(y, just, &right);
                note(TightStep::DecideLowerNeg(y));
            }
            (Direction::Upper, false) => {
                if keep_out(y) {
                    return Err(TightError::Restricted(y));
                }
                let k = floor_div(&c, &a).unwrap();
                let ak = &a * &k;
                left.add_term(y, &ak);
                right.remove_term(y);
                right.add_scaled(&q, &(&c - &ak));
                note(TightStep::DecideUpper(y));
            }
            (Direction::Upper, true) => {
                right = resolve_with(y, just, &right);
                note(TightStep::DecideUpperPos(y));
            }
        }
    }
}

/// Normalized pieces of `d | p` around `x`: `(a, rest)` with `a > 0` and `d | a*x + rest`.
fn split_div(p: &LinearPolynomial, x: Var) -> Result<(Int, LinearPolynomial), TightError> {
    let a = p.coeff(x);
    if a.is_zero() {
        return Err(BoundsError::VarNotInConstraint.into());
    }
    if a.is_negative() {
        Ok((-a, p.negated().without(x)))
    } else {
        Ok((a, p.without(x)))
    }
}

/// Bound on the auxiliary quotient variable of `d | ax + p`: `-z + r <= 0` for the lower
/// direction, `z + r <= 0` for the upper one, with `x` eliminated.
pub fn div_part(
    d: &Int,
    p: &LinearPolynomial,
    x: Var,
    m: &BoundStack,
    order: &VariableOrder,
    direction: Direction,
) -> Result<LinearPolynomial, TightError> {
    div_part_in(d, p, x, m, m.len(), order, direction)
}

fn div_part_in(
    d: &Int,
    p: &LinearPolynomial,
    x: Var,
    m: &BoundStack,
    len: usize,
    order: &VariableOrder,
    direction: Direction,
) -> Result<LinearPolynomial, TightError> {
    div_parts(p, x, &m.prefix(len))?;
    if m.prefix(len).bound_of(x, direction).is_none() {
        return Err(BoundsError::InfiniteBound.into());
    }
    let (a, rest) = split_div(p, x)?;
    let mut diophantine = LinearPolynomial::term(a, x);
    diophantine.add_scaled(&rest, &Int::one());
    let j = match direction {
        Direction::Lower => {
            diophantine.add_term(AUX, &-d);
            diophantine
        }
        Direction::Upper => {
            let mut j = diophantine.negated();
            j.add_term(AUX, d);
            j
        }
    };
    tight_in(&j, AUX, m, len, order, &[x], &mut None)
}

/// Justification for the bound `bound_div` computes: an inequality with coefficient -1
/// (lower) or +1 (upper) on `x`. The latest bound of `x` in `direction` must be propagated;
/// a decided one fails with [`TightError::Restricted`].
pub fn div_derive(
    d: &Int,
    p: &LinearPolynomial,
    x: Var,
    m: &BoundStack,
    order: &VariableOrder,
    direction: Direction,
) -> Result<LinearPolynomial, TightError> {
    let part = div_part_in(d, p, x, m, m.len(), order, direction)?;
    let (a, rest) = split_div(p, x)?;
    let j = match direction {
        Direction::Lower => {
            // part = -z + r
            let r = part.without(AUX);
            let mut j = r.scaled(d);
            j.add_term(x, &-a);
            j.add_scaled(&rest, &-Int::one());
            j
        }
        Direction::Upper => {
            // part = z + r
            let r = part.without(AUX);
            let mut j = r.scaled(d);
            j.add_term(x, &a);
            j.add_scaled(&rest, &Int::one());
            j
        }
    };
    tight(&j, x, m, order)
}
