//! Divisibility combination, conflicting cores and their strong resolvents, and weak
//! Cooper elimination of a single variable.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::arith::{divides, extended_gcd, gcd, lcm, Int};
use crate::bounds::{bound_ineq, first_div_solution, val, BoundValue, BoundsError};
use crate::model::{
    Bounds, Constraint, LinearPolynomial, ModelError, Problem, Var, VarKind, VariableOrder,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CooperError {
    #[error("variable does not occur in a divisibility constraint")]
    MissingVariable,
    #[error("expected a divisibility constraint")]
    NotDivisibility,
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `(a, rest)` with `a > 0` and the constraint equivalent to `d | a*x + rest`.
fn orient_div(c: &Constraint, x: Var) -> Result<(Int, Int, LinearPolynomial), CooperError> {
    let Constraint::Div(d, p) = c else {
        return Err(CooperError::NotDivisibility);
    };
    let a = p.coeff(x);
    if a.is_zero() {
        return Err(CooperError::MissingVariable);
    }
    if a.is_negative() {
        Ok((d.clone(), -a, p.negated().without(x)))
    } else {
        Ok((d.clone(), a, p.without(x)))
    }
}

/// Rewrites two divisibility constraints on `x` into an equivalent pair where only the
/// first mentions `x`.
pub fn divsolve(
    x: Var,
    i1: &Constraint,
    i2: &Constraint,
    order: &VariableOrder,
) -> Result<(Constraint, Constraint), CooperError> {
    let (d1, a1, p1) = orient_div(i1, x)?;
    let (d2, a2, p2) = orient_div(i2, x)?;
    let (d, c1, c2) = extended_gcd(&(&a1 * &d2), &(&a2 * &d1)).expect("nonzero");
    let mut first = LinearPolynomial::term(d.clone(), x);
    first.add_scaled(&p1, &(&c1 * &d2));
    first.add_scaled(&p2, &(&c2 * &d1));
    let mut second = p1.scaled(&a2);
    second.add_scaled(&p2, &-&a1);
    Ok((
        Constraint::Div(&d1 * &d2, first).normalize(order),
        Constraint::Div(d, second).normalize(order),
    ))
}

/// Leaves exactly one divisibility constraint mentioning `x` (adding `1 | x` if there was
/// none). Output order: constraints without divisibility on `x`, the combined constraint,
/// then the side constraints produced along the way.
pub fn combine_divs(x: Var, c: &Problem) -> Result<Problem, CooperError> {
    let (divs, rest): (Vec<&Constraint>, Vec<&Constraint>) = c
        .constraints()
        .iter()
        .partition(|k| k.is_div() && k.contains(x));
    let mut side = Vec::new();
    let mut combined = match divs.first() {
        Some(first) => (*first).clone(),
        None => Constraint::Div(Int::one(), LinearPolynomial::var(x)),
    };
    for next in divs.iter().skip(1) {
        let (a, b) = divsolve(x, &combined, next, &c.order)?;
        combined = a;
        side.push(b);
    }
    let mut out = c.with_constraints(rest.into_iter().cloned());
    out.add(combined);
    for s in side {
        out.add(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoreKind {
    Interval,
    Divisibility,
    Diophantine,
}

/// A pattern of constraints with top variable `var` that has no solution for `var`
/// under the current values of the smaller variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictingCore {
    pub var: Var,
    pub kind: CoreKind,
    pub lower: Option<Constraint>,
    pub upper: Option<Constraint>,
    pub div: Option<Constraint>,
}

impl ConflictingCore {
    pub fn constraints(&self) -> Vec<Constraint> {
        [&self.lower, &self.upper, &self.div]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrongResolvent {
    /// Guards of the fresh variable.
    pub r_k: Vec<Constraint>,
    pub r_c: Vec<Constraint>,
}

impl StrongResolvent {
    pub fn all(&self) -> impl Iterator<Item = &Constraint> {
        self.r_k.iter().chain(self.r_c.iter())
    }
}

/// Detects a conflicting core at `x` among the constraints whose top variable is `x`.
/// Preference: diophantine, then divisibility, then interval.
pub fn classify_core<'a, B: Bounds + ?Sized>(
    x: Var,
    constraints: impl IntoIterator<Item = &'a Constraint>,
    m: &B,
    order: &VariableOrder,
) -> Result<Option<ConflictingCore>, CooperError> {
    let mut lower: Option<(Int, &Constraint)> = None;
    let mut upper: Option<(Int, &Constraint)> = None;
    let mut div: Option<&Constraint> = None;
    for c in constraints {
        if c.top(order) != Some(x) {
            continue;
        }
        if c.vars().any(|y| y != x && !m.is_fixed(y)) {
            return Err(CooperError::Precondition("smaller variable not fixed"));
        }
        match c {
            Constraint::Div(..) => {
                if div.is_some() {
                    return Err(CooperError::Precondition(
                        "two divisibility constraints on top",
                    ));
                }
                div = Some(c);
            }
            Constraint::Ineq(p) => {
                let BoundValue::Finite(b) = bound_ineq(p, x, m)? else {
                    unreachable!()
                };
                if p.coeff(x).is_negative() {
                    if lower.as_ref().is_none_or(|(cur, _)| b > *cur) {
                        lower = Some((b, c));
                    }
                } else if upper.as_ref().is_none_or(|(cur, _)| b < *cur) {
                    upper = Some((b, c));
                }
            }
        }
    }
    let core = |kind, with_bounds: bool, with_div: bool| ConflictingCore {
        var: x,
        kind,
        lower: lower
            .as_ref()
            .filter(|_| with_bounds)
            .map(|(_, c)| (*c).clone()),
        upper: upper
            .as_ref()
            .filter(|_| with_bounds)
            .map(|(_, c)| (*c).clone()),
        div: div.filter(|_| with_div).cloned(),
    };
    if let Some(Constraint::Div(d, p)) = div {
        let c = p.coeff(x);
        let k = val(&p.without(x), m)?;
        if !divides(&gcd(&c, d), &k) {
            return Ok(Some(core(CoreKind::Diophantine, false, true)));
        }
        if let (Some((bl, _)), Some((bu, _))) = (&lower, &upper) {
            if bl <= bu && first_div_solution(d, &c, &k, bl, bu).is_none() {
                return Ok(Some(core(CoreKind::Divisibility, true, true)));
            }
        }
    }
    if let (Some((bl, _)), Some((bu, _))) = (&lower, &upper) {
        if bl > bu {
            return Ok(Some(core(CoreKind::Interval, true, false)));
        }
    }
    Ok(None)
}

/// `(a, p)` of a lower inequality `-a*x + p <= 0` and `(b, q)` of an upper one `b*x - q <= 0`.
fn lower_parts(c: &Constraint, x: Var) -> (Int, LinearPolynomial) {
    let p = c.poly();
    (-p.coeff(x), p.without(x))
}

fn upper_parts(c: &Constraint, x: Var) -> (Int, LinearPolynomial) {
    let p = c.poly();
    (p.coeff(x), p.without(x).negated())
}

/// The pair resolvent over fresh `k`: guards `0 <= k <= m` and the remaining constraints.
fn pair_resolvent(
    x: Var,
    lower: &Constraint,
    upper: &Constraint,
    div: Option<(&Int, &Int, &LinearPolynomial)>,
    k: Var,
) -> StrongResolvent {
    let (a, p) = lower_parts(lower, x);
    let (b, q) = upper_parts(upper, x);
    let mut ineq = p.scaled(&b);
    ineq.add_scaled(&q, &-&a);
    ineq.add_term(k, &b);
    let mut k_plus_p = p.clone();
    k_plus_p.add_term(k, &Int::one());
    let mut r_c = vec![Constraint::Ineq(ineq), Constraint::Div(a.clone(), k_plus_p)];
    let m = match div {
        None => &a - Int::one(),
        Some((d, c, s)) => {
            let ad = &a * d;
            let m = lcm(&a, &(&ad / gcd(&ad, c))).unwrap() - Int::one();
            let mut poly = p.scaled(c);
            poly.add_scaled(s, &a);
            poly.add_term(k, c);
            r_c.push(Constraint::Div(ad, poly));
            m
        }
    };
    let r_k = vec![
        Constraint::Ineq(LinearPolynomial::term(-1, k)),
        Constraint::Ineq(LinearPolynomial::from_terms([(k, Int::one())], -m)),
    ];
    StrongResolvent { r_k, r_c }
}

fn div_parts_of(c: &Constraint, x: Var) -> (Int, Int, LinearPolynomial) {
    orient_div(c, x).expect("core divisibility constraint mentions its variable")
}

/// Strong resolvent of a core. `fresh` allocates the new minimal variable when one is needed.
pub fn cooper(core: &ConflictingCore, fresh: &mut dyn FnMut() -> Var) -> StrongResolvent {
    let x = core.var;
    match core.kind {
        CoreKind::Diophantine => {
            let (d, c, s) = div_parts_of(core.div.as_ref().unwrap(), x);
            StrongResolvent {
                r_k: vec![],
                r_c: vec![Constraint::Div(gcd(&c, &d), s)],
            }
        }
        CoreKind::Interval => pair_resolvent(
            x,
            core.lower.as_ref().unwrap(),
            core.upper.as_ref().unwrap(),
            None,
            fresh(),
        ),
        CoreKind::Divisibility => {
            let (d, c, s) = div_parts_of(core.div.as_ref().unwrap(), x);
            pair_resolvent(
                x,
                core.lower.as_ref().unwrap(),
                core.upper.as_ref().unwrap(),
                Some((&d, &c, &s)),
                fresh(),
            )
        }
    }
}

/// Record of one elimination step, used to extend models back to the eliminated variable.
#[derive(Debug, Clone)]
pub struct Elimination {
    pub var: Var,
    /// The constraints mentioning the variable after combining divisibility constraints.
    pub with_var: Vec<Constraint>,
    pub fresh: Vec<Var>,
    pub result: Problem,
}

/// Eliminates `x`: keeps constraints without `x`, adds `gcd(c, d) | s` for the combined
/// `d | cx + s`, and one resolvent over a fresh guarded variable per lower/upper pair.
pub fn weak_cooper_eliminate(x: Var, c: &Problem) -> Result<Problem, CooperError> {
    Ok(eliminate(x, c)?.result)
}

pub fn eliminate(x: Var, c: &Problem) -> Result<Elimination, CooperError> {
    let combined = combine_divs(x, c)?;
    let with_var: Vec<Constraint> = combined
        .constraints()
        .iter()
        .filter(|k| k.contains(x))
        .cloned()
        .collect();
    let div = with_var
        .iter()
        .find(|k| k.is_div())
        .expect("combine_divs leaves one");
    let (d, cx, s) = orient_div(div, x)?;
    let lowers: Vec<&Constraint> = with_var
        .iter()
        .filter(|k| k.is_ineq() && k.coeff(x).is_negative())
        .collect();
    let uppers: Vec<&Constraint> = with_var
        .iter()
        .filter(|k| k.is_ineq() && k.coeff(x).is_positive())
        .collect();

    let mut out = combined.with_constraints(
        combined
            .constraints()
            .iter()
            .filter(|k| !k.contains(x))
            .cloned(),
    );
    out.add(Constraint::Div(gcd(&cx, &d), s.clone()));
    let mut fresh = Vec::new();
    for l in &lowers {
        for u in &uppers {
            let k = out.vars.fresh("_k", VarKind::Fresh);
            out.order.push_min(k);
            fresh.push(k);
            let r = pair_resolvent(x, l, u, Some((&d, &cx, &s)), k);
            for con in r.all() {
                out.add(con.clone());
            }
        }
    }
    let mut trimmed = out.with_constraints(
        out.constraints()
            .iter()
            .filter(|k| !k.is_trivially_true())
            .cloned(),
    );
    trimmed.vars = out.vars;
    Ok(Elimination {
        var: x,
        with_var,
        fresh,
        result: trimmed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;
    use crate::model::{Bound, BoundStack, Direction, VarTable};

    fn problem(names: &[&str]) -> (Problem, Vec<Var>) {
        let mut t = VarTable::new();
        let v: Vec<Var> = names.iter().map(|n| t.intern(n)).collect();
        (Problem::new(t, VariableOrder::from_ascending(v.clone())), v)
    }

    fn lp<const N: usize>(terms: [(Var, i64); N], c: i64) -> LinearPolynomial {
        LinearPolynomial::from_terms(terms, c)
    }

    fn div<const N: usize>(d: i64, terms: [(Var, i64); N], c: i64) -> Constraint {
        Constraint::Div(int(d), lp(terms, c))
    }

    fn ineq<const N: usize>(terms: [(Var, i64); N], c: i64) -> Constraint {
        Constraint::Ineq(lp(terms, c))
    }

    fn fix(m: &mut BoundStack, x: Var, v: i64) {
        m.push(Bound::decided(x, Direction::Lower, int(v))).unwrap();
        m.push(Bound::decided(x, Direction::Upper, int(v))).unwrap();
    }

    #[test]
    fn divsolve_examples() {
        let (p, v) = problem(&["z", "y", "x"]);
        let (z, y, x) = (v[0], v[1], v[2]);
        let (a, b) = divsolve(
            x,
            &div(4, [(x, 2), (y, 2)], 0),
            &div(2, [(x, 1), (z, 1)], 0),
            &p.order,
        )
        .unwrap();
        assert_eq!(a, div(8, [(x, 4), (y, 4)], 0));
        assert_eq!(b, div(4, [(y, 2), (z, -2)], 0));
        let (a, b) = divsolve(x, &div(2, [(x, 1)], 0), &div(2, [(x, 1)], 0), &p.order).unwrap();
        assert_eq!(a, div(4, [(x, 2)], 0));
        assert_eq!(b, div(2, [], 0));
        let (_, b) = divsolve(
            x,
            &div(1, [(x, 1)], 0),
            &div(6, [(x, 5), (y, 1)], 3),
            &p.order,
        )
        .unwrap();
        assert!(!b.contains(x));
        assert_eq!(
            divsolve(x, &div(1, [(y, 1)], 0), &div(2, [(x, 1)], 0), &p.order),
            Err(CooperError::MissingVariable)
        );
    }

    #[test]
    fn combine_divs_examples() {
        let (mut p, v) = problem(&["z", "y", "x"]);
        let (z, y, x) = (v[0], v[1], v[2]);
        p.add(div(4, [(x, 2), (y, 2)], 0));
        p.add(div(2, [(x, 1), (z, 1)], 0));
        p.add(ineq([(x, 1)], 0));
        let out = combine_divs(x, &p).unwrap();
        assert_eq!(
            out.constraints(),
            &[
                ineq([(x, 1)], 0),
                div(8, [(x, 4), (y, 4)], 0),
                div(4, [(y, 2), (z, -2)], 0)
            ]
        );
        let q = p.with_constraints([ineq([(x, 1)], 0)]);
        assert_eq!(
            combine_divs(x, &q).unwrap().constraints(),
            &[ineq([(x, 1)], 0), div(1, [(x, 1)], 0)]
        );
        let q = p.with_constraints([div(6, [(x, 2), (y, 1)], 0)]);
        assert_eq!(combine_divs(x, &q).unwrap().constraints(), q.constraints());
    }

    #[test]
    fn classify_examples() {
        let (_, v) = problem(&["x", "y"]);
        let (x, y) = (v[0], v[1]);
        let order = VariableOrder::from_ascending(vec![x, y]);
        let mut m = BoundStack::new();
        fix(&mut m, x, 1);
        let cs = [ineq([(y, -1)], 0), div(6, [(y, 4), (x, 1)], 0)];
        let core = classify_core(y, &cs, &m, &order).unwrap().unwrap();
        assert_eq!(core.kind, CoreKind::Diophantine);
        assert_eq!(core.constraints(), vec![div(6, [(y, 4), (x, 1)], 0)]);

        let (_, v) = problem(&["z"]);
        let z = v[0];
        let order = VariableOrder::from_ascending(vec![z]);
        let cs = [ineq([(z, -1)], 0), ineq([(z, 1)], 1)];
        let core = classify_core(z, &cs, &BoundStack::new(), &order)
            .unwrap()
            .unwrap();
        assert_eq!(core.kind, CoreKind::Interval);

        let cs = [ineq([(y, -1)], 0), ineq([(y, 1)], -3), div(4, [(y, 2)], 1)];
        let order = VariableOrder::from_ascending(vec![x, y]);
        let core = classify_core(y, &cs, &BoundStack::new(), &order)
            .unwrap()
            .unwrap();
        // gcd(2, 4) = 2 does not divide 1, so the diophantine core wins
        assert_eq!(core.kind, CoreKind::Diophantine);
        let cs = [ineq([(y, -1)], 0), ineq([(y, 1)], -2), div(8, [(y, 2)], 2)];
        let core = classify_core(y, &cs, &BoundStack::new(), &order)
            .unwrap()
            .unwrap();
        assert_eq!(core.kind, CoreKind::Divisibility);
        let cs = [ineq([(y, -1)], 0), ineq([(y, 1)], -3), div(8, [(y, 2)], 2)];
        assert_eq!(
            classify_core(y, &cs, &BoundStack::new(), &order).unwrap(),
            None
        );
    }

    #[test]
    fn cooper_examples() {
        let (_, v) = problem(&["k", "y", "x", "z"]);
        let (k, y, x, z) = (v[0], v[1], v[2], v[3]);
        let core = ConflictingCore {
            var: x,
            kind: CoreKind::Diophantine,
            lower: None,
            upper: None,
            div: Some(div(6, [(x, 2), (y, 1)], 0)),
        };
        let r = cooper(&core, &mut || unreachable!());
        assert_eq!(
            r,
            StrongResolvent {
                r_k: vec![],
                r_c: vec![div(2, [(y, 1)], 0)]
            }
        );

        let core = ConflictingCore {
            var: z,
            kind: CoreKind::Interval,
            lower: Some(ineq([(z, -1)], 0)),
            upper: Some(ineq([(z, 1)], 1)),
            div: None,
        };
        let r = cooper(&core, &mut || k);
        assert_eq!(r.r_k, vec![ineq([(k, -1)], 0), ineq([(k, 1)], 0)]);
        assert_eq!(r.r_c, vec![ineq([(k, 1)], 1), div(1, [(k, 1)], 0)]);

        // a=2, p=y, b=1, q=3, d=4, c=2, s=1
        let core = ConflictingCore {
            var: x,
            kind: CoreKind::Divisibility,
            lower: Some(ineq([(x, -2), (y, 1)], 0)),
            upper: Some(ineq([(x, 1)], -3)),
            div: Some(div(4, [(x, 2)], 1)),
        };
        let r = cooper(&core, &mut || k);
        assert_eq!(r.r_k, vec![ineq([(k, -1)], 0), ineq([(k, 1)], -3)]);
        assert_eq!(
            r.r_c,
            vec![
                ineq([(y, 1), (k, 1)], -6),
                div(2, [(k, 1), (y, 1)], 0),
                div(8, [(y, 2), (k, 2)], 2)
            ]
        );
    }

    #[test]
    fn eliminate_examples() {
        let (mut p, v) = problem(&["y", "x"]);
        let (y, x) = (v[0], v[1]);
        p.add(ineq([(y, 1)], -1));
        p.add(ineq([(y, -1)], 1));
        p.add(div(6, [(x, 2), (y, 1)], 0));
        let out = weak_cooper_eliminate(x, &p).unwrap();
        assert_eq!(
            out.constraints(),
            &[ineq([(y, 1)], -1), ineq([(y, -1)], 1), div(2, [(y, 1)], 0)]
        );

        let q = p.with_constraints([ineq([(y, 1)], -1)]);
        assert_eq!(
            weak_cooper_eliminate(x, &q).unwrap().constraints(),
            q.constraints()
        );

        let q = p.with_constraints([ineq([(x, -1)], 0), ineq([(x, 1)], -1)]);
        let e = eliminate(x, &q).unwrap();
        assert_eq!(e.fresh.len(), 1);
        let k = e.fresh[0];
        // 0 <= k <= 0 and 0 - 1 + k <= 0
        assert!(e.result.contains(&ineq([(k, 1)], -1)));
    }
}
