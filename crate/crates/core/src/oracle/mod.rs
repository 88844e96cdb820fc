//! Independent deciders used to cross-check the engine: bounded enumeration and
//! elimination of unguarded variables followed by a search over the guarded ones.

pub mod gen;

use std::collections::BTreeMap;

use num_bigint::ToBigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::arith::Int;
use crate::bounds::{greatest_solution_at_or_below, least_solution_at_or_above, solve_congruence};
use crate::cooper::{eliminate, CooperError, Elimination};
use crate::engine::{EngineConfig, SolveOutcome, Solver};
use crate::model::{Assignment, Constraint, Problem, Var};

pub const DEFAULT_POINT_CAP: u64 = 10_000_000;
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;
/// Half-width of the search interval given to unguarded variables in differential runs.
pub const UNGUARDED_RADIUS: i64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("box has {points} points, above the cap of {cap}")]
    BoxTooLarge { points: String, cap: u64 },
    #[error("search exceeded {0} nodes")]
    Budget(u64),
    #[error("box does not cover v{}", .0.0)]
    Uncovered(Var),
    #[error("back-substitution found no value for v{}", .0.0)]
    BackSubstitution(Var),
    #[error(transparent)]
    Cooper(#[from] CooperError),
}

/// Inclusive integer interval per variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchBox {
    ranges: BTreeMap<Var, (Int, Int)>,
}

impl SearchBox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, x: Var, lo: impl Into<Int>, hi: impl Into<Int>) {
        self.ranges.insert(x, (lo.into(), hi.into()));
    }

    pub fn get(&self, x: Var) -> Option<&(Int, Int)> {
        self.ranges.get(&x)
    }

    /// Same interval for every variable.
    pub fn uniform(vars: impl IntoIterator<Item = Var>, lo: i64, hi: i64) -> Self {
        let mut b = SearchBox::new();
        for x in vars {
            b.set(x, lo, hi);
        }
        b
    }

    pub fn points(&self, vars: &[Var]) -> Int {
        vars.iter()
            .map(|x| {
                self.ranges
                    .get(x)
                    .map_or(Int::zero(), |(lo, hi)| hi - lo + Int::one())
            })
            .fold(Int::one(), |acc, n| acc * n.max(Int::zero()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnumResult {
    Sat(Assignment),
    NoSolutionInBox,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QeResult {
    Sat(Assignment),
    Unsat,
}

/// A constraint compiled for the search: coefficients per search position.
struct Compiled<T> {
    terms: Vec<(usize, T)>,
    constant: T,
    modulus: Option<T>,
    /// Deepest position the constraint mentions; it is checked once that position is set.
    last: usize,
}

struct Search<'a, T> {
    cons: &'a [Compiled<T>],
    ranges: &'a [(T, T)],
    values: Vec<T>,
    nodes: u64,
    budget: u64,
}

impl<T: Integer + Signed + Clone> Search<'_, T> {
    /// Lower bound of `p` over the remaining box when positions `< depth` are set.
    fn min_value(&self, c: &Compiled<T>, depth: usize) -> T {
        let mut acc = c.constant.clone();
        for (i, a) in &c.terms {
            let v = if *i < depth {
                &self.values[*i]
            } else if a.is_positive() {
                &self.ranges[*i].0
            } else {
                &self.ranges[*i].1
            };
            acc = acc + a.clone() * v.clone();
        }
        acc
    }

    /// Exact check once every position of `c` is below `depth`.
    fn holds(&self, c: &Compiled<T>, depth: usize) -> bool {
        let v = self.min_value(c, depth);
        match &c.modulus {
            None => !v.is_positive(),
            Some(d) => v.is_multiple_of(d),
        }
    }

    fn run(&mut self, depth: usize) -> Result<bool, u64> {
        if depth == self.ranges.len() {
            return Ok(true);
        }
        let (lo, hi) = self.ranges[depth].clone();
        let mut v = lo;
        while v <= hi {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(self.budget);
            }
            self.values[depth] = v.clone();
            let set = depth + 1;
            let mut ok = true;
            for c in self.cons {
                if c.last == depth {
                    ok = self.holds(c, set);
                } else if c.last > depth && c.modulus.is_none() {
                    ok = !self.min_value(c, set).is_positive();
                }
                if !ok {
                    break;
                }
            }
            if ok && self.run(depth + 1)? {
                return Ok(true);
            }
            v = v + T::one();
        }
        Ok(false)
    }
}

fn compile<T, F: Fn(&Int) -> T>(
    constraints: &[Constraint],
    pos: &BTreeMap<Var, usize>,
    conv: F,
) -> Vec<Compiled<T>> {
    constraints
        .iter()
        .map(|c| {
            let p = c.poly();
            let terms: Vec<(usize, T)> = p.terms().map(|(x, a)| (pos[&x], conv(a))).collect();
            let last = terms.iter().map(|(i, _)| *i).max().unwrap_or(0);
            Compiled {
                terms,
                constant: conv(p.constant()),
                modulus: c.modulus().map(&conv),
                last,
            }
        })
        .collect()
}

/// Depth-first search over `vars` (first is most significant) with pruning; returns the
/// lexicographically first solution.
fn search(
    constraints: &[Constraint],
    vars: &[Var],
    bx: &SearchBox,
    budget: u64,
) -> Result<Option<Assignment>, OracleError> {
    let pos: BTreeMap<Var, usize> = vars.iter().enumerate().map(|(i, x)| (*x, i)).collect();
    let mut ranges = Vec::new();
    for x in vars {
        let (lo, hi) = bx.get(*x).ok_or(OracleError::Uncovered(*x))?;
        if lo > hi {
            return Ok(None);
        }
        ranges.push((lo.clone(), hi.clone()));
    }
    for c in constraints {
        if let Some(x) = c.vars().find(|x| !pos.contains_key(x)) {
            return Err(OracleError::Uncovered(x));
        }
    }
    let constant_false = constraints
        .iter()
        .any(|c| c.vars().next().is_none() && !c.is_trivially_true());
    if constant_false {
        return Ok(None);
    }
    let small = |n: &Int| n.abs() < Int::from(1i64 << 40);
    let fits = ranges.iter().all(|(lo, hi)| small(lo) && small(hi))
        && constraints.iter().all(|c| {
            c.poly().terms().all(|(_, a)| small(a))
                && small(c.poly().constant())
                && c.modulus().is_none_or(small)
        })
        && vars.len() < 64;
    let found: Option<Vec<Int>> = if fits {
        let cons = compile(constraints, &pos, |n| n.to_i128().unwrap());
        let r: Vec<(i128, i128)> = ranges
            .iter()
            .map(|(a, b)| (a.to_i128().unwrap(), b.to_i128().unwrap()))
            .collect();
        let mut s = Search {
            cons: &cons,
            ranges: &r,
            values: vec![0; r.len()],
            nodes: 0,
            budget,
        };
        s.run(0)
            .map_err(OracleError::Budget)?
            .then(|| s.values.iter().map(|v| v.to_bigint().unwrap()).collect())
    } else {
        let cons = compile(constraints, &pos, Int::clone);
        let mut s = Search {
            cons: &cons,
            ranges: &ranges,
            values: vec![Int::zero(); ranges.len()],
            nodes: 0,
            budget,
        };
        s.run(0)
            .map_err(OracleError::Budget)?
            .then(|| s.values.clone())
    };
    Ok(found.map(|vals| vars.iter().copied().zip(vals).collect()))
}

/// Exhaustive search of `bx` for a model, in ascending variable order (smallest
/// variable most significant).
pub fn enumerate(c: &Problem, bx: &SearchBox) -> Result<EnumResult, OracleError> {
    enumerate_with_cap(c, bx, DEFAULT_POINT_CAP)
}

pub fn enumerate_with_cap(
    c: &Problem,
    bx: &SearchBox,
    cap: u64,
) -> Result<EnumResult, OracleError> {
    let mut vars: Vec<Var> = c
        .order
        .ascending()
        .iter()
        .copied()
        .filter(|x| bx.get(*x).is_some())
        .collect();
    for x in c.occurring_vars() {
        if !vars.contains(&x) {
            return Err(OracleError::Uncovered(x));
        }
    }
    for x in bx.ranges.keys() {
        if !vars.contains(x) {
            vars.push(*x);
        }
    }
    let points = bx.points(&vars);
    if points > Int::from(cap) {
        return Err(OracleError::BoxTooLarge {
            points: points.to_string(),
            cap,
        });
    }
    Ok(match search(c.constraints(), &vars, bx, u64::MAX)? {
        Some(a) => EnumResult::Sat(a),
        None => EnumResult::NoSolutionInBox,
    })
}

/// Eliminates unguarded variables, largest first, until only guarded ones remain.
pub fn eliminate_unguarded(c: &Problem) -> Result<(Problem, Vec<Elimination>), OracleError> {
    let mut cur = c.clone();
    let mut steps = Vec::new();
    loop {
        let target = cur
            .occurring_vars()
            .into_iter()
            .rev()
            .find(|x| !cur.is_guarded(*x));
        let Some(x) = target else {
            return Ok((cur, steps));
        };
        let e = eliminate(x, &cur)?;
        cur = e.result.clone();
        steps.push(e);
    }
}

/// Decides `c` by eliminating unguarded variables and searching the guard box of the rest;
/// models are extended back through the eliminations.
pub fn qe_decide(c: &Problem) -> Result<QeResult, OracleError> {
    qe_decide_with_budget(c, DEFAULT_NODE_BUDGET)
}

pub fn qe_decide_with_budget(c: &Problem, budget: u64) -> Result<QeResult, OracleError> {
    let (residual, steps) = eliminate_unguarded(c)?;
    let vars = residual.occurring_vars();
    let mut bx = SearchBox::new();
    for x in &vars {
        let (lo, hi) = residual
            .guard_interval(*x)
            .ok_or(OracleError::Uncovered(*x))?;
        bx.set(*x, lo, hi);
    }
    let Some(mut model) = search(residual.constraints(), &vars, &bx, budget)? else {
        return Ok(QeResult::Unsat);
    };
    for e in steps.iter().rev() {
        let v = back_substitute(e, &mut model)?;
        model.set(e.var, v);
    }
    let mut out = Assignment::new();
    for x in c.occurring_vars() {
        out.set(x, model.get(x).cloned().unwrap_or_else(Int::zero));
    }
    Ok(QeResult::Sat(out))
}

/// A value for the eliminated variable satisfying the constraints that mentioned it;
/// variables without a value yet are set to zero.
fn back_substitute(e: &Elimination, model: &mut Assignment) -> Result<Int, OracleError> {
    let x = e.var;
    for c in &e.with_var {
        for y in c.vars() {
            if y != x && model.get(y).is_none() {
                model.set(y, Int::zero());
            }
        }
    }
    let (mut lo, mut hi): (Option<Int>, Option<Int>) = (None, None);
    let mut congruence = (Int::one(), Int::one(), Int::zero());
    for c in &e.with_var {
        let a = c.coeff(x);
        let rest = c.poly().without(x).eval(model).expect("all assigned");
        match c {
            Constraint::Ineq(_) if a.is_positive() => {
                let b = (-rest).div_floor(&a);
                hi = Some(hi.map_or(b.clone(), |h| h.min(b)));
            }
            Constraint::Ineq(_) => {
                let b = rest.div_ceil(&-a);
                lo = Some(lo.map_or(b.clone(), |l| l.max(b)));
            }
            Constraint::Div(d, _) => congruence = (d.clone(), a, rest),
        }
    }
    let (d, a, k) = congruence;
    let found = match (&lo, &hi) {
        (Some(l), _) => {
            least_solution_at_or_above(&d, &a, &k, l).filter(|v| hi.as_ref().is_none_or(|h| v <= h))
        }
        (None, Some(h)) => greatest_solution_at_or_below(&d, &a, &k, h),
        (None, None) => solve_congruence(&d, &a, &k).map(|(b0, _)| b0),
    };
    let v = found.ok_or(OracleError::BackSubstitution(x))?;
    debug_assert!(e.with_var.iter().all(|c| {
        let mut m = model.clone();
        m.set(x, v.clone());
        c.holds(&m).unwrap()
    }));
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat,
    Unsat,
    /// Enumeration found nothing in a box that does not bound every variable.
    Inconclusive,
    StepLimit,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agreement {
    pub engine: Verdict,
    pub qe: Verdict,
    /// `None` when the box was too large to enumerate.
    pub enumerate: Option<Verdict>,
    /// Every reported model satisfies the problem.
    pub models_ok: bool,
}

impl Agreement {
    /// Engine and elimination agree, enumeration does not contradict either, and all
    /// models check out.
    pub fn agrees(&self) -> bool {
        let decided = |v: &Verdict| matches!(v, Verdict::Sat | Verdict::Unsat);
        let enum_ok = match &self.enumerate {
            Some(Verdict::Sat) => self.engine == Verdict::Sat,
            Some(Verdict::Unsat) => self.engine == Verdict::Unsat,
            _ => true,
        };
        decided(&self.engine) && self.engine == self.qe && enum_ok && self.models_ok
    }
}

/// The box used by differential runs: guard intervals for guarded variables and
/// `[-64, 64]` for the others.
pub fn differential_box(c: &Problem) -> (SearchBox, bool) {
    let mut bx = SearchBox::new();
    let mut exact = true;
    for x in c.occurring_vars() {
        match c.guard_interval(x) {
            Some((lo, hi)) if c.is_guarded(x) => bx.set(x, lo, hi),
            _ => {
                exact = false;
                bx.set(x, -UNGUARDED_RADIUS, UNGUARDED_RADIUS);
            }
        }
    }
    (bx, exact)
}

/// Runs the engine, elimination and (when the box is small enough) enumeration on `c`.
pub fn differential(c: &Problem, engine_config: EngineConfig) -> Agreement {
    let mut models_ok = true;
    let mut check = |a: &Assignment| {
        if !c.holds(a).unwrap_or(false) {
            models_ok = false;
        }
    };
    let engine = match Solver::new(c, engine_config).solve() {
        Ok(SolveOutcome::Sat(a)) => {
            check(&a);
            Verdict::Sat
        }
        Ok(SolveOutcome::Unsat) => Verdict::Unsat,
        Ok(SolveOutcome::StepLimit) => Verdict::StepLimit,
        Err(e) => Verdict::Error(e.to_string()),
    };
    let qe = match qe_decide(c) {
        Ok(QeResult::Sat(a)) => {
            check(&a);
            Verdict::Sat
        }
        Ok(QeResult::Unsat) => Verdict::Unsat,
        Err(e) => Verdict::Error(e.to_string()),
    };
    let (bx, exact) = differential_box(c);
    let enumerate = match enumerate(c, &bx) {
        Ok(EnumResult::Sat(a)) => {
            check(&a);
            Some(Verdict::Sat)
        }
        Ok(EnumResult::NoSolutionInBox) if exact => Some(Verdict::Unsat),
        Ok(EnumResult::NoSolutionInBox) => Some(Verdict::Inconclusive),
        Err(_) => None,
    };
    Agreement {
        engine,
        qe,
        enumerate,
        models_ok,
    }
}
