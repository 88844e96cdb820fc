//! Independent i64 oracles and random case generators shared by the acceptance harness
//! and the property tests. Each `*_case` returns `Err` with a description on a violation.

#![allow(dead_code)]

use std::collections::HashMap;

use num_traits::ToPrimitive;
use rand::Rng;

use cutsat::arith::Int;
use cutsat::bounds::{bound_div, bound_ineq, improves, BoundValue};
use cutsat::cooper::{classify_core, combine_divs, cooper, divsolve, eliminate};
use cutsat::model::{
    Bound, BoundStack, Bounds, Constraint, Direction, LinearPolynomial, Problem, Var, VarKind,
    VarTable, VariableOrder,
};
use cutsat::tighten::{div_derive, tight};

pub type Point = HashMap<Var, i64>;

fn small(v: &Int) -> i64 {
    v.to_i64().expect("test values fit in i64")
}

pub fn eval(p: &LinearPolynomial, at: &Point) -> Option<i64> {
    let mut acc = small(p.constant());
    for (x, c) in p.terms() {
        acc += small(c) * at.get(&x)?;
    }
    Some(acc)
}

/// `None` when a variable is unassigned.
pub fn holds(c: &Constraint, at: &Point) -> Option<bool> {
    Some(match c {
        Constraint::Ineq(p) => eval(p, at)? <= 0,
        Constraint::Div(d, p) => eval(p, at)?.rem_euclid(small(d)) == 0,
    })
}

fn lcm(a: i64, b: i64) -> i64 {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

/// Exact test for an integer `x` satisfying every constraint in `cs` with the other
/// variables taken from `at`. Inequalities give an interval, divisibility constraints a
/// period; at most one period needs to be scanned.
pub fn exists_x(cs: &[Constraint], x: Var, at: &Point) -> bool {
    let (mut lo, mut hi) = (None::<i64>, None::<i64>);
    let mut period = 1;
    let mut divs = Vec::new();
    for c in cs {
        let a = small(&c.poly().coeff(x));
        let rest = eval(&c.poly().without(x), at).expect("other variables assigned");
        match c {
            Constraint::Ineq(_) if a == 0 => {
                if rest > 0 {
                    return false;
                }
            }
            Constraint::Ineq(_) if a > 0 => {
                let b = (-rest).div_euclid(a);
                hi = Some(hi.map_or(b, |h| h.min(b)));
            }
            Constraint::Ineq(_) => {
                let b = -((-rest).div_euclid(-a));
                lo = Some(lo.map_or(b, |l| l.max(b)));
            }
            Constraint::Div(d, _) => {
                let d = small(d);
                period = lcm(period, d);
                divs.push((d, a, rest));
            }
        }
    }
    let start = match (lo, hi) {
        (Some(l), Some(h)) if l > h => return false,
        (Some(l), _) => l,
        (None, Some(h)) => h - period + 1,
        (None, None) => 0,
    };
    let end = match hi {
        Some(h) => h.min(start + period - 1),
        None => start + period - 1,
    };
    (start..=end).any(|v| divs.iter().all(|(d, a, r)| (a * v + r).rem_euclid(*d) == 0))
}

/// Depth-first search over `ranges` (in the given order), checking each constraint as soon
/// as its variables are assigned.
pub fn box_sat(cs: &[Constraint], ranges: &[(Var, i64, i64)]) -> bool {
    fn go(cs: &[Constraint], ranges: &[(Var, i64, i64)], i: usize, at: &mut Point) -> bool {
        if i == ranges.len() {
            return cs.iter().all(|c| holds(c, at) == Some(true));
        }
        let (x, lo, hi) = ranges[i];
        for v in lo..=hi {
            at.insert(x, v);
            let ok = cs.iter().all(|c| holds(c, at) != Some(false));
            if ok && go(cs, ranges, i + 1, at) {
                at.remove(&x);
                return true;
            }
        }
        at.remove(&x);
        false
    }
    go(cs, ranges, 0, &mut Point::new())
}

/// Interval of `x` from unit constraints `±x + c <= 0`.
pub fn unit_interval(cs: &[Constraint], x: Var) -> (Option<i64>, Option<i64>) {
    let (mut lo, mut hi) = (None::<i64>, None::<i64>);
    for c in cs {
        let Constraint::Ineq(p) = c else { continue };
        if p.num_vars() != 1 || !p.contains(x) {
            continue;
        }
        let (a, k) = (small(&p.coeff(x)), small(p.constant()));
        if a > 0 {
            let b = (-k).div_euclid(a);
            hi = Some(hi.map_or(b, |h| h.min(b)));
        } else {
            let b = -((-k).div_euclid(-a));
            lo = Some(lo.map_or(b, |l| l.max(b)));
        }
    }
    (lo, hi)
}

fn nonzero(rng: &mut impl Rng, max: i64) -> i64 {
    let v = rng.gen_range(1..=max);
    if rng.gen_bool(0.5) {
        -v
    } else {
        v
    }
}

fn vars(n: usize) -> (VarTable, Vec<Var>, VariableOrder) {
    let mut t = VarTable::new();
    let v: Vec<Var> = (0..n).map(|i| t.intern(&format!("v{i}"))).collect();
    let o = VariableOrder::from_ascending(v.clone());
    (t, v, o)
}

fn unit(x: Var, dir: Direction, b: i64) -> Bound {
    let j = match dir {
        Direction::Lower => LinearPolynomial::from_terms([(x, -1)], b),
        Direction::Upper => LinearPolynomial::from_terms([(x, 1)], -b),
    };
    Bound::propagated(x, dir, Int::from(b), j)
}

/// Divisibility bound on one random configuration: no value strictly between the current bound and
/// the propagated divisibility bound satisfies the constraint.
pub fn div_bound_case(rng: &mut impl Rng) -> Result<(), String> {
    let (_, v, _) = vars(2);
    let (x, y) = (v[0], v[1]);
    let d = rng.gen_range(1..=30i64);
    let a = nonzero(rng, 12);
    let (cy, k0) = (rng.gen_range(-6..=6i64), rng.gen_range(-40..=40i64));
    let yv = rng.gen_range(-10..=10i64);
    let lo = rng.gen_range(-30..=30i64);
    let hi = lo + rng.gen_range(0..=40i64);
    let mut m = BoundStack::new();
    m.push(unit(y, Direction::Lower, yv)).unwrap();
    m.push(unit(y, Direction::Upper, yv)).unwrap();
    m.push(unit(x, Direction::Lower, lo)).unwrap();
    m.push(unit(x, Direction::Upper, hi)).unwrap();
    let p = LinearPolynomial::from_terms([(x, a), (y, cy)], k0);
    let k = cy * yv + k0;
    let sat = |e: i64| (a * e + k).rem_euclid(d) == 0;
    for (dir, b) in [(Direction::Lower, lo), (Direction::Upper, hi)] {
        if sat(b) {
            continue;
        }
        let c = small(&bound_div(&Int::from(d), &p, x, &m, dir).map_err(|e| e.to_string())?);
        let skipped = match dir {
            Direction::Lower => (b..c).find(|e| sat(*e)),
            Direction::Upper => (c + 1..=b).find(|e| sat(*e)),
        };
        if let Some(e) = skipped {
            return Err(format!(
                "{d} | {a}x + {k} from {b} ({dir:?}) to {c} skips {e}"
            ));
        }
        let moved = match dir {
            Direction::Lower => c > b,
            Direction::Upper => c < b,
        };
        if !moved {
            return Err(format!(
                "{d} | {a}x + {k}: bound {c} does not move past {b}"
            ));
        }
    }
    Ok(())
}

/// A bound stack over three variables with unit-justified boxes inside `[-4, 4]`, some
/// decisions and some propagations through `tight`.
fn random_stack(rng: &mut impl Rng, v: &[Var], o: &VariableOrder) -> BoundStack {
    let mut m = BoundStack::new();
    for x in v {
        let lo = rng.gen_range(-4..=2i64);
        let hi = rng.gen_range(lo..=4);
        m.push(unit(*x, Direction::Lower, lo)).unwrap();
        m.push(unit(*x, Direction::Upper, hi)).unwrap();
    }
    for _ in 0..rng.gen_range(0..4) {
        let x = v[rng.gen_range(0..v.len())];
        if m.is_fixed(x) {
            continue;
        }
        if rng.gen_bool(0.5) {
            let l = m.lower_of(x).unwrap().clone();
            m.push(Bound::decided(x, Direction::Upper, l)).unwrap();
        } else {
            let j = random_ineq(rng, v, x);
            let Ok(BoundValue::Finite(b)) = bound_ineq(&j, x, &m) else {
                continue;
            };
            let dir = if j.coeff(x) > Int::from(0) {
                Direction::Upper
            } else {
                Direction::Lower
            };
            let improves = match dir {
                Direction::Lower => {
                    m.lower_of(x).is_some_and(|l| b > *l) && m.upper_of(x).is_some_and(|u| b <= *u)
                }
                Direction::Upper => {
                    m.upper_of(x).is_some_and(|u| b < *u) && m.lower_of(x).is_some_and(|l| b >= *l)
                }
            };
            if !improves {
                continue;
            }
            if let Ok(i) = tight(&j, x, &m, o) {
                m.push(Bound::propagated(x, dir, b, i)).unwrap();
            }
        }
    }
    m
}

fn random_ineq(rng: &mut impl Rng, v: &[Var], x: Var) -> LinearPolynomial {
    let mut p = LinearPolynomial::term(nonzero(rng, 5), x);
    for y in v {
        if *y != x && rng.gen_bool(0.6) {
            p.add_term(*y, &Int::from(rng.gen_range(-4..=4i64)));
        }
    }
    p.set_constant(Int::from(rng.gen_range(-8..=8i64)));
    p
}

/// Points of the stack's box satisfying every justification in `m`.
fn justified_points(m: &BoundStack, v: &[Var], extra: &[Constraint]) -> Vec<Point> {
    let mut cs: Vec<Constraint> = m
        .entries()
        .iter()
        .filter_map(|b| b.justification().cloned())
        .map(Constraint::Ineq)
        .collect();
    cs.extend_from_slice(extra);
    let mut out = Vec::new();
    let mut at = Point::new();
    fn go(i: usize, v: &[Var], cs: &[Constraint], at: &mut Point, out: &mut Vec<Point>) {
        if i == v.len() {
            if cs.iter().all(|c| holds(c, at) == Some(true)) {
                out.push(at.clone());
            }
            return;
        }
        for val in -4..=4 {
            at.insert(v[i], val);
            go(i + 1, v, cs, at, out);
        }
        at.remove(&v[i]);
    }
    go(0, v, &cs, &mut at, &mut out);
    out
}

fn stronger(dir: Direction, got: &BoundValue, want: &Int) -> bool {
    match (dir, got) {
        (Direction::Lower, BoundValue::Finite(g)) => g >= want,
        (Direction::Upper, BoundValue::Finite(g)) => g <= want,
        _ => false,
    }
}

/// One `tight` call and one `div_derive` call on a random stack; checks the unit pivot
/// coefficient, implication on the box and bound strength.
pub fn justification_case(rng: &mut impl Rng) -> Result<bool, String> {
    let (_, v, o) = vars(3);
    let m = random_stack(rng, &v, &o);
    let x = v[rng.gen_range(0..3)];

    let mut checked = false;

    let j = random_ineq(rng, &v, x);
    if improves(&j, x, &m) {
        let dir = if j.coeff(x) > Int::from(0) {
            Direction::Upper
        } else {
            Direction::Lower
        };
        let want = match bound_ineq(&j, x, &m).map_err(|e| e.to_string())? {
            BoundValue::Finite(b) => b,
            _ => return Err("guarded box leaves a bound infinite".into()),
        };
        let i = tight(&j, x, &m, &o).map_err(|e| format!("tight({j:?}): {e}"))?;
        check_justification(&m, &v, x, dir, &i, &want, &[Constraint::Ineq(j.clone())])
            .map_err(|e| format!("tight({j:?}): {e}"))?;
        checked = true;
    }

    let d = rng.gen_range(2..=9i64);
    let mut p = LinearPolynomial::term(nonzero(rng, 6), x);
    for y in &v {
        if *y != x && m.is_fixed(*y) && rng.gen_bool(0.7) {
            p.add_term(*y, &Int::from(rng.gen_range(-5..=5i64)));
        }
    }
    p.set_constant(Int::from(rng.gen_range(0..d)));
    let a = small(&p.coeff(x));
    let k = eval(&p.without(x), &fixed_point(&m, &v)).expect("remainder fixed");
    let dir = if rng.gen_bool(0.5) {
        Direction::Lower
    } else {
        Direction::Upper
    };
    let decided = m
        .latest(x, dir, m.len())
        .is_some_and(|i| m.get(i).is_decided());
    if decided {
        return Ok(checked);
    }
    let b = small(m.bound_of(x, dir).unwrap());
    if (a * b + k).rem_euclid(d) == 0 {
        return Ok(checked);
    }
    let dd = Int::from(d);
    let want = bound_div(&dd, &p, x, &m, dir).map_err(|e| e.to_string())?;
    let i =
        div_derive(&dd, &p, x, &m, &o, dir).map_err(|e| format!("div_derive({d} | {p:?}): {e}"))?;
    check_justification(
        &m,
        &v,
        x,
        dir,
        &i,
        &want,
        &[Constraint::Div(dd.clone(), p.clone())],
    )
    .map_err(|e| format!("div_derive({d} | {p:?}, {dir:?}): {e}"))?;
    Ok(true)
}

fn fixed_point(m: &BoundStack, v: &[Var]) -> Point {
    v.iter()
        .filter(|y| m.is_fixed(**y))
        .map(|y| (*y, small(m.lower_of(*y).unwrap())))
        .collect()
}

fn check_justification(
    m: &BoundStack,
    v: &[Var],
    x: Var,
    dir: Direction,
    i: &LinearPolynomial,
    want: &Int,
    input: &[Constraint],
) -> Result<(), String> {
    let expected = match dir {
        Direction::Lower => -1,
        Direction::Upper => 1,
    };
    if small(&i.coeff(x)) != expected {
        return Err(format!("pivot coefficient of {i:?} is not {expected}"));
    }
    let got = bound_ineq(i, x, m).map_err(|e| e.to_string())?;
    if !stronger(dir, &got, want) {
        return Err(format!("{i:?} gives {got:?}, weaker than {want}"));
    }
    let out = Constraint::Ineq(i.clone());
    if let Some(p) = justified_points(m, v, input)
        .iter()
        .find(|p| holds(&out, p) != Some(true))
    {
        return Err(format!("{i:?} fails at {p:?}"));
    }
    Ok(())
}

/// Divisibility pair (or group) over the box `[-12, 12]^n`: same solutions after
/// `divsolve` and after `combine_divs`.
pub fn divsolve_case(rng: &mut impl Rng) -> Result<(), String> {
    let n = rng.gen_range(2..=3);
    let (t, v, o) = vars(n);
    let x = v[n - 1];
    let mut divs = Vec::new();
    for _ in 0..rng.gen_range(2..=3) {
        let d = rng.gen_range(2..=8i64);
        let mut p = LinearPolynomial::term(nonzero(rng, 6), x);
        for y in &v[..n - 1] {
            p.add_term(*y, &Int::from(rng.gen_range(-5..=5i64)));
        }
        p.set_constant(Int::from(rng.gen_range(0..d)));
        divs.push(Constraint::Div(Int::from(d), p).normalize(&o));
    }
    if divs.iter().any(|c| !c.contains(x)) {
        return Ok(());
    }
    let (i1, i2) = divsolve(x, &divs[0], &divs[1], &o).map_err(|e| e.to_string())?;
    if i2.contains(x) {
        return Err(format!(
            "second divsolve output {i2:?} mentions the variable"
        ));
    }
    let mut problem = Problem::new(t, o);
    for c in &divs {
        problem.add(c.clone());
    }
    let combined = combine_divs(x, &problem).map_err(|e| e.to_string())?;
    let mentioning = combined
        .constraints()
        .iter()
        .filter(|c| c.is_div() && c.contains(x))
        .count();
    if mentioning != 1 {
        return Err(format!(
            "{mentioning} divisibility constraints still mention the variable"
        ));
    }
    let pair_before = &divs[..2];
    let pair_after = [i1, i2];
    let mut at = Point::new();
    let mut all = Vec::new();
    enumerate_box(&v, -12, 12, &mut at, &mut |p| all.push(p.clone()));
    for p in &all {
        let sat = |cs: &[Constraint]| cs.iter().all(|c| holds(c, p) == Some(true));
        if sat(pair_before) != sat(&pair_after) {
            return Err(format!("divsolve changes the solution set at {p:?}"));
        }
        if sat(&divs) != sat(combined.constraints()) {
            return Err(format!("combine_divs changes the solution set at {p:?}"));
        }
    }
    Ok(())
}

fn enumerate_box(v: &[Var], lo: i64, hi: i64, at: &mut Point, f: &mut dyn FnMut(&Point)) {
    let Some((x, rest)) = v.split_first() else {
        f(at);
        return;
    };
    for val in lo..=hi {
        at.insert(*x, val);
        enumerate_box(rest, lo, hi, at, f);
    }
    at.remove(x);
}

/// Random constraints with top `x` over two fixed smaller variables. When they form a
/// conflicting core: the core has no solution for `x` at the fixed values, and every
/// solution of the strong resolvent on the box extends to a solution of the core.
/// `Ok(false)` when no core was detected.
pub fn core_case(rng: &mut impl Rng) -> Result<bool, String> {
    let (mut t, v, o) = vars(3);
    let (ys, x) = (&v[..2], v[2]);
    let mut m = BoundStack::new();
    let mut fixed = Point::new();
    for y in ys {
        let val = rng.gen_range(-4..=4i64);
        m.push(unit(*y, Direction::Lower, val)).unwrap();
        m.push(unit(*y, Direction::Upper, val)).unwrap();
        fixed.insert(*y, val);
    }
    let mut cs = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let mut p = LinearPolynomial::term(nonzero(rng, 4), x);
        for y in ys {
            p.add_term(*y, &Int::from(rng.gen_range(-3..=3i64)));
        }
        p.set_constant(Int::from(rng.gen_range(-10..=10i64)));
        cs.push(Constraint::Ineq(p).normalize(&o));
    }
    if rng.gen_bool(0.6) {
        let d = rng.gen_range(2..=8i64);
        let mut p = LinearPolynomial::term(nonzero(rng, 6), x);
        for y in ys {
            p.add_term(*y, &Int::from(rng.gen_range(-4..=4i64)));
        }
        p.set_constant(Int::from(rng.gen_range(0..d)));
        cs.push(Constraint::Div(Int::from(d), p).normalize(&o));
    }
    cs.retain(|c| c.top(&o) == Some(x));
    let Some(core) = classify_core(x, &cs, &m, &o).map_err(|e| e.to_string())? else {
        return Ok(false);
    };
    let core_cs = core.constraints();
    if exists_x(&core_cs, x, &fixed) {
        return Err(format!(
            "{:?} core {core_cs:?} has a solution at {fixed:?}",
            core.kind
        ));
    }
    let r = cooper(&core, &mut || t.fresh("_k", VarKind::Fresh));
    let resolvent: Vec<Constraint> = r.all().cloned().collect();
    if resolvent.iter().any(|c| c.contains(x)) {
        return Err(format!(
            "resolvent {resolvent:?} mentions the core variable"
        ));
    }
    let mut ranges: Vec<(Var, i64, i64)> = ys.iter().map(|y| (*y, -6, 6)).collect();
    for c in &r.r_k {
        for k in c.vars() {
            if ranges.iter().any(|(y, ..)| *y == k) {
                continue;
            }
            let (Some(lo), Some(hi)) = unit_interval(&r.r_k, k) else {
                return Err(format!("fresh variable without guards in {:?}", r.r_k));
            };
            ranges.push((k, lo, hi));
        }
    }
    let mut bad = None;
    let mut at = Point::new();
    each_point(&ranges, &mut at, &mut |p| {
        if bad.is_none()
            && resolvent.iter().all(|c| holds(c, p) == Some(true))
            && !exists_x(&core_cs, x, p)
        {
            bad = Some(p.clone());
        }
    });
    match bad {
        Some(p) => Err(format!(
            "resolvent {resolvent:?} holds at {p:?} but {core_cs:?} has no solution"
        )),
        None => Ok(true),
    }
}

fn each_point(ranges: &[(Var, i64, i64)], at: &mut Point, f: &mut dyn FnMut(&Point)) {
    let Some(((x, lo, hi), rest)) = ranges.split_first() else {
        f(at);
        return;
    };
    for val in *lo..=*hi {
        at.insert(*x, val);
        each_point(rest, at, f);
    }
    at.remove(x);
}

/// Eliminates the largest of three variables from a random problem whose other variables
/// are guarded within `[-4, 4]`, then compares satisfiability exactly.
/// `Ok(false)` when the result is too large to enumerate.
pub fn elimination_case(rng: &mut impl Rng) -> Result<bool, String> {
    let (t, v, o) = vars(3);
    let (ys, x) = (&v[..2], v[2]);
    let mut problem = Problem::new(t, o.clone());
    for y in ys {
        let lo = rng.gen_range(-4..=4i64);
        let hi = rng.gen_range(lo..=4);
        problem.add(Constraint::Ineq(LinearPolynomial::from_terms(
            [(*y, -1)],
            lo,
        )));
        problem.add(Constraint::Ineq(LinearPolynomial::from_terms(
            [(*y, 1)],
            -hi,
        )));
    }
    for _ in 0..rng.gen_range(1..=4) {
        let mut p = LinearPolynomial::term(nonzero(rng, 3), x);
        for y in ys {
            p.add_term(*y, &Int::from(rng.gen_range(-3..=3i64)));
        }
        if rng.gen_range(0..100) < 35 {
            let d = rng.gen_range(2..=6i64);
            p.set_constant(Int::from(rng.gen_range(0..d)));
            problem.add(Constraint::Div(Int::from(d), p));
        } else {
            p.set_constant(Int::from(rng.gen_range(-8..=8i64)));
            problem.add(Constraint::Ineq(p));
        }
    }
    let before = {
        let ranges: Vec<(Var, i64, i64)> = ys
            .iter()
            .map(|y| {
                let (lo, hi) = unit_interval(problem.constraints(), *y);
                (*y, lo.unwrap(), hi.unwrap())
            })
            .collect();
        let mut found = false;
        let mut at = Point::new();
        each_point(&ranges, &mut at, &mut |p| {
            found |= exists_x(problem.constraints(), x, p)
        });
        found
    };
    let e = eliminate(x, &problem).map_err(|e| e.to_string())?;
    let out = e.result.constraints();
    if out.iter().any(|c| c.contains(x)) {
        return Err("eliminated variable survives".into());
    }
    let mut ranges = Vec::new();
    for y in e.result.order.ascending() {
        if !out.iter().any(|c| c.contains(*y)) {
            continue;
        }
        let (Some(lo), Some(hi)) = unit_interval(out, *y) else {
            return Err(format!(
                "variable {} left unbounded",
                e.result.vars.name(*y)
            ));
        };
        ranges.push((*y, lo, hi));
    }
    let points: f64 = ranges
        .iter()
        .map(|(_, l, h)| (h - l + 1).max(0) as f64)
        .product();
    if points > 2e6 {
        return Ok(false);
    }
    // fresh variables last, so the guarded ones prune first
    ranges.sort_by_key(|(y, ..)| e.fresh.contains(y));
    let after = box_sat(out, &ranges);
    if before != after {
        return Err(format!(
            "satisfiable before: {before}, after: {after}\n{:?}",
            out
        ));
    }
    Ok(true)
}
