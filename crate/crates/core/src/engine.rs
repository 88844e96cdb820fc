//! The transition system and its strictly-two-layered scheduler.
//!
//! Guarded variables are handled first by the conflict-driven layer (propagate, decide,
//! conflict analysis with resolution and backjumping). Once every guarded variable is
//! fixed, the unguarded variables are processed in ascending order; conflicts at an
//! unguarded top variable are resolved by combining divisibility constraints or by adding
//! the strong resolvent of a conflicting core.

use std::collections::HashSet;
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::arith::{divides, gcd, Int};
use crate::bounds::{
    bound_div, bound_ineq, div_parts, improves, is_conflict, is_satisfied, lower, BoundValue,
    BoundsError,
};
use crate::cooper::{classify_core, cooper, divsolve, ConflictingCore, CooperError, CoreKind};
use crate::model::{
    Assignment, Bound, BoundStack, Bounds, Constraint, Direction, LinearPolynomial, Problem, Var,
    VarKind,
};
use crate::tighten::{div_derive, resolve, tight, tight_in, TightError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Propagate,
    PropagateDiv,
    Decide,
    Conflict,
    ConflictDiv,
    Sat,
    UnsatDiv,
    Forget,
    SlackIntro,
    Resolve,
    SkipDecision,
    Backjump,
    Unsat,
    Learn,
    ResolveCooper,
    SolveDivLeft,
    SolveDivRight,
}

impl Rule {
    pub const ALL: [Rule; 17] = [
        Rule::Propagate,
        Rule::PropagateDiv,
        Rule::Decide,
        Rule::Conflict,
        Rule::ConflictDiv,
        Rule::Sat,
        Rule::UnsatDiv,
        Rule::Forget,
        Rule::SlackIntro,
        Rule::Resolve,
        Rule::SkipDecision,
        Rule::Backjump,
        Rule::Unsat,
        Rule::Learn,
        Rule::ResolveCooper,
        Rule::SolveDivLeft,
        Rule::SolveDivRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Propagate => "Propagate",
            Rule::PropagateDiv => "Propagate-Div",
            Rule::Decide => "Decide",
            Rule::Conflict => "Conflict",
            Rule::ConflictDiv => "Conflict-Div",
            Rule::Sat => "Sat",
            Rule::UnsatDiv => "Unsat-Div",
            Rule::Forget => "Forget",
            Rule::SlackIntro => "Slack-Intro",
            Rule::Resolve => "Resolve",
            Rule::SkipDecision => "Skip-Decision",
            Rule::Backjump => "Backjump",
            Rule::Unsat => "Unsat",
            Rule::Learn => "Learn",
            Rule::ResolveCooper => "Resolve-Cooper",
            Rule::SolveDivLeft => "Solve-Div-Left",
            Rule::SolveDivRight => "Solve-Div-Right",
        }
    }

    fn index(self) -> usize {
        Rule::ALL.iter().position(|r| *r == self).unwrap()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rule-specific payload of a trace event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Detail {
    None,
    Bound {
        dir: Direction,
        value: Int,
        decided: bool,
    },
    Constraint(Constraint),
    Added(Vec<Constraint>),
    Replaced {
        removed: Vec<Constraint>,
        added: Vec<Constraint>,
        kept_len: usize,
    },
    Model(Assignment),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub step: u64,
    pub rule: Rule,
    pub var: Option<Var>,
    pub detail: Detail,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub steps: u64,
    pub rule_counts: [u64; 17],
    pub peak_depth: usize,
    pub fresh_vars: usize,
    /// Times a conflicting core that already has a resolvent in the problem was selected again.
    pub core_reselections: u64,
}

impl Stats {
    pub fn count(&self, r: Rule) -> u64 {
        self.rule_counts[r.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// 0 means unlimited.
    pub max_steps: u64,
    /// Run the state checkers after every transition.
    pub check_invariants: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_steps: 0,
            check_invariants: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Assignment),
    Unsat,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("frozen state: {0}")]
    Frozen(String),
    #[error("invariant violated after {rule}: {what}")]
    Invariant { rule: Rule, what: String },
    #[error("conflicting core at v{} selected again", .0.0)]
    Reselected(Var),
    #[error("model does not satisfy the input problem")]
    UnsoundModel,
    #[error("state is final")]
    Final,
    #[error(transparent)]
    Tight(#[from] TightError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Cooper(#[from] CooperError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Search,
    Conflict(LinearPolynomial),
    Sat(Assignment),
    Unsat,
}

type Applied = (Rule, Option<Var>, Detail);

pub struct Solver {
    problem: Problem,
    input: Problem,
    m: BoundStack,
    status: Status,
    guarded: HashSet<Var>,
    slack: Option<Var>,
    cores: HashSet<(Var, Vec<Constraint>)>,
    unsat_div: Option<Constraint>,
    stats: Stats,
    config: EngineConfig,
}

impl Solver {
    /// Guardedness is fixed here; the order is repaired so that guarded variables come first.
    pub fn new(problem: &Problem, config: EngineConfig) -> Self {
        let mut problem = problem.clone();
        problem.repair_order();
        let guarded: HashSet<Var> = problem
            .order
            .ascending()
            .iter()
            .copied()
            .filter(|v| problem.is_guarded(*v))
            .collect();
        let unsat_div = problem
            .constraints()
            .iter()
            .find(|c| violates_gcd(c))
            .cloned();
        Solver {
            input: problem.clone(),
            problem,
            m: BoundStack::new(),
            status: Status::Search,
            guarded,
            slack: None,
            cores: HashSet::new(),
            unsat_div,
            stats: Stats::default(),
            config,
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn stack(&self) -> &BoundStack {
        &self.m
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn is_guarded(&self, x: Var) -> bool {
        self.guarded.contains(&x)
    }

    pub fn is_final(&self) -> bool {
        matches!(self.status, Status::Sat(_) | Status::Unsat)
    }

    pub fn solve(&mut self) -> Result<SolveOutcome, EngineError> {
        self.solve_with(&mut |_, _| {})
    }

    /// Runs to a final state, handing every event to `sink` together with the current problem.
    pub fn solve_with(
        &mut self,
        sink: &mut dyn FnMut(&TraceEvent, &Problem),
    ) -> Result<SolveOutcome, EngineError> {
        loop {
            match &self.status {
                Status::Sat(a) => return Ok(SolveOutcome::Sat(a.clone())),
                Status::Unsat => return Ok(SolveOutcome::Unsat),
                _ => {}
            }
            if self.config.max_steps > 0 && self.stats.steps >= self.config.max_steps {
                return Ok(SolveOutcome::StepLimit);
            }
            let ev = self.step()?;
            sink(&ev, &self.problem);
        }
    }

    /// Applies exactly one rule.
    pub fn step(&mut self) -> Result<TraceEvent, EngineError> {
        let (rule, var, detail) = match self.status.clone() {
            Status::Sat(_) | Status::Unsat => return Err(EngineError::Final),
            Status::Search => self.step_search()?,
            Status::Conflict(i) => self.step_conflict(i)?,
        };
        self.stats.steps += 1;
        self.stats.rule_counts[rule.index()] += 1;
        self.stats.peak_depth = self.stats.peak_depth.max(self.m.len());
        if self.config.check_invariants {
            self.check_state(rule)?;
        }
        Ok(TraceEvent {
            step: self.stats.steps,
            rule,
            var,
            detail,
        })
    }

    fn check_state(&self, rule: Rule) -> Result<(), EngineError> {
        let fail = |what: String| Err(EngineError::Invariant { rule, what });
        for x in self.problem.order.ascending() {
            if let (Some(l), Some(u)) = (self.m.lower_of(*x), self.m.upper_of(*x)) {
                if l > u {
                    return fail(format!("bounds of {} cross", self.problem.vars.name(*x)));
                }
            }
        }
        match &self.status {
            Status::Search => {
                if let Err(what) = self.eager_top_level_violation() {
                    return fail(what);
                }
            }
            Status::Conflict(i) => {
                if !is_conflict(&Constraint::Ineq(i.clone()), &self.m) {
                    return fail("conflict state holds a non-conflict".into());
                }
                if let Some(y) = i.vars().find(|y| !self.is_guarded(*y)) {
                    return fail(format!(
                        "conflict mentions unguarded {}",
                        self.problem.vars.name(y)
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// No decided unguarded variable is the top variable of a conflict.
    pub fn check_eager_top_level(&self) -> bool {
        self.eager_top_level_violation().is_ok()
    }

    fn eager_top_level_violation(&self) -> Result<(), String> {
        let order = &self.problem.order;
        for b in self.m.entries() {
            if !b.is_decided() || self.is_guarded(b.var) {
                continue;
            }
            let conflict = self
                .problem
                .constraints()
                .iter()
                .any(|c| c.top(order) == Some(b.var) && is_conflict(c, &self.m));
            if conflict {
                return Err(format!("decided {} is top of a conflict", self.name(b.var)));
            }
        }
        Ok(())
    }

    /// Preconditions of a decision on unguarded `x`: every constraint with top `x` has all
    /// its other variables fixed, and unless `x` is bounded on both sides at most one
    /// divisibility constraint has top `x`.
    fn check_unguarded_decision(&self, x: Var) -> Result<(), EngineError> {
        let order = &self.problem.order;
        let tops: Vec<&Constraint> = self
            .problem
            .constraints()
            .iter()
            .filter(|c| c.top(order) == Some(x))
            .collect();
        let what = if tops
            .iter()
            .any(|c| c.vars().any(|y| y != x && !self.m.is_fixed(y)))
        {
            format!(
                "decision on {} before its constraints are fixed",
                self.name(x)
            )
        } else if (self.m.lower_of(x).is_none() || self.m.upper_of(x).is_none())
            && tops.iter().filter(|c| c.is_div()).count() > 1
        {
            format!(
                "decision on half-bounded {} with several divisibility constraints",
                self.name(x)
            )
        } else {
            return Ok(());
        };
        Err(EngineError::Invariant {
            rule: Rule::Decide,
            what,
        })
    }

    /// Unfixed variables with no bound and no inequality giving them a finite bound.
    pub fn detect_stuck(&self) -> Vec<Var> {
        self.occurring_vars()
            .into_iter()
            .filter(|x| {
                self.m.lower_of(*x).is_none()
                    && self.m.upper_of(*x).is_none()
                    && !self.problem.constraints().iter().any(|c| match c {
                        Constraint::Ineq(p) if p.contains(*x) => {
                            bound_ineq(p, *x, &self.m).is_ok_and(|b| b.is_finite())
                        }
                        _ => false,
                    })
            })
            .collect()
    }

    fn name(&self, x: Var) -> &str {
        self.problem.vars.name(x)
    }

    fn occurring_vars(&self) -> Vec<Var> {
        self.problem.occurring_vars()
    }

    fn is_guarded_constraint(&self, c: &Constraint) -> bool {
        c.vars().all(|y| self.is_guarded(y))
    }

    fn add_constraint(&mut self, c: Constraint) -> Option<Constraint> {
        if c.is_trivially_true() {
            return None;
        }
        let c = c.normalize(&self.problem.order);
        if violates_gcd(&c) && self.unsat_div.is_none() {
            self.unsat_div = Some(c.clone());
        }
        self.problem.add(c.clone()).then_some(c)
    }

    fn push(&mut self, b: Bound) -> Result<(), EngineError> {
        self.m
            .push(b)
            .map_err(|e| EngineError::Frozen(format!("rejected bound: {e}")))
    }

    fn propagate(
        &mut self,
        rule: Rule,
        x: Var,
        dir: Direction,
        value: Int,
        justification: LinearPolynomial,
    ) -> Result<Applied, EngineError> {
        self.push(Bound::propagated(x, dir, value.clone(), justification))?;
        Ok((
            rule,
            Some(x),
            Detail::Bound {
                dir,
                value,
                decided: false,
            },
        ))
    }

    fn decide(&mut self, x: Var) -> Result<Applied, EngineError> {
        let (dir, value) = match (self.m.lower_of(x), self.m.upper_of(x)) {
            (Some(l), _) => (Direction::Upper, l.clone()),
            (None, Some(u)) => (Direction::Lower, u.clone()),
            (None, None) => {
                return Err(EngineError::Frozen(format!(
                    "decide on unbounded {}",
                    self.name(x)
                )))
            }
        };
        if self.config.check_invariants && !self.is_guarded(x) {
            self.check_unguarded_decision(x)?;
        }
        self.push(Bound::decided(x, dir, value.clone()))?;
        if self.config.check_invariants && !self.is_guarded(x) {
            let order = &self.problem.order;
            let conflict = self
                .problem
                .constraints()
                .iter()
                .any(|c| c.top(order) == Some(x) && is_conflict(c, &self.m));
            if conflict {
                return Err(EngineError::Invariant {
                    rule: Rule::Decide,
                    what: format!(
                        "decision on {} creates a conflict at its level",
                        self.name(x)
                    ),
                });
            }
        }
        Ok((
            Rule::Decide,
            Some(x),
            Detail::Bound {
                dir,
                value,
                decided: true,
            },
        ))
    }

    /// Length of the longest prefix of `M` holding decisions only for variables `≺ y`.
    fn prefix_len(&self, y: Var) -> usize {
        let order = &self.problem.order;
        self.m
            .entries()
            .iter()
            .position(|b| b.is_decided() && !order.less(b.var, y))
            .unwrap_or(self.m.len())
    }

    fn step_search(&mut self) -> Result<Applied, EngineError> {
        if let Some(c) = self.unsat_div.take() {
            self.status = Status::Unsat;
            return Ok((Rule::UnsatDiv, None, Detail::Constraint(c)));
        }
        if let Some(a) = self.unit_propagate()? {
            return Ok(a);
        }
        if let Some(a) = self.try_sat()? {
            return Ok(a);
        }
        if let Some(a) = self.guarded_conflict()? {
            return Ok(a);
        }
        if let Some(a) = self.guarded_propagate()? {
            return Ok(a);
        }
        if let Some(x) = self
            .occurring_vars()
            .into_iter()
            .find(|x| self.is_guarded(*x) && !self.m.is_fixed(*x))
        {
            return self.decide(x);
        }
        self.unguarded_layer()
    }

    fn unit_propagate(&mut self) -> Result<Option<Applied>, EngineError> {
        let found = self.problem.constraints().iter().find_map(|c| match c {
            Constraint::Ineq(p) if p.num_vars() == 1 => {
                let x = p.vars().next().unwrap();
                improves(p, x, &self.m).then(|| (p.clone(), x))
            }
            _ => None,
        });
        let Some((p, x)) = found else { return Ok(None) };
        Ok(Some(self.propagate_ineq(&p, x)?))
    }

    fn propagate_ineq(&mut self, p: &LinearPolynomial, x: Var) -> Result<Applied, EngineError> {
        let BoundValue::Finite(b) = bound_ineq(p, x, &self.m)? else {
            return Err(EngineError::Frozen("propagating an infinite bound".into()));
        };
        let dir = if p.coeff(x).is_positive() {
            Direction::Upper
        } else {
            Direction::Lower
        };
        let j = tight(p, x, &self.m, &self.problem.order)?;
        self.propagate(Rule::Propagate, x, dir, b, j)
    }

    fn try_sat(&mut self) -> Result<Option<Applied>, EngineError> {
        let vars = self.occurring_vars();
        if !vars.iter().all(|x| self.m.is_fixed(*x)) {
            return Ok(None);
        }
        if !self
            .problem
            .constraints()
            .iter()
            .all(|c| is_satisfied(c, &self.m))
        {
            return Ok(None);
        }
        let mut model = Assignment::new();
        for x in self.input.order.ascending() {
            if self.input.vars.kind(*x) != VarKind::Original {
                continue;
            }
            let v = self.m.fixed_value(*x).cloned().unwrap_or_else(Int::zero);
            model.set(*x, v);
        }
        if !self.input.holds(&model).unwrap_or(false) {
            return Err(EngineError::UnsoundModel);
        }
        self.status = Status::Sat(model.clone());
        Ok(Some((Rule::Sat, None, Detail::Model(model))))
    }

    fn guarded_conflict(&mut self) -> Result<Option<Applied>, EngineError> {
        let candidates: Vec<Constraint> = self
            .problem
            .constraints()
            .iter()
            .filter(|c| self.is_guarded_constraint(c) && is_conflict(c, &self.m))
            .cloned()
            .collect();
        for c in candidates {
            match &c {
                Constraint::Ineq(p) => {
                    self.status = Status::Conflict(p.clone());
                    return Ok(Some((Rule::Conflict, None, Detail::Constraint(c.clone()))));
                }
                Constraint::Div(d, p) => {
                    let Some((x, dir)) = self.div_conflict_pivot(d, p)? else {
                        continue;
                    };
                    let i = div_derive(d, p, x, &self.m, &self.problem.order, dir)?;
                    self.status = Status::Conflict(i.clone());
                    return Ok(Some((
                        Rule::ConflictDiv,
                        Some(x),
                        Detail::Constraint(Constraint::Ineq(i)),
                    )));
                }
            }
        }
        Ok(None)
    }

    /// The variable and direction for Conflict-Div on `d | p`: the unfixed variable if there
    /// is one, otherwise the top variable, and a direction whose divisibility bound crosses
    /// the opposite bound. A direction whose latest bound on the variable is a decision is
    /// never used. `None` when no direction crosses yet.
    fn div_conflict_pivot(
        &self,
        d: &Int,
        p: &LinearPolynomial,
    ) -> Result<Option<(Var, Direction)>, EngineError> {
        let order = &self.problem.order;
        let x = p.vars().find(|y| !self.m.is_fixed(*y)).unwrap_or_else(|| {
            p.top(order)
                .expect("constant divisibility handled by Unsat-Div")
        });
        let (a, k) = div_parts(p, x, &self.m)?;
        let len = self.m.len();
        let decided = |dir| {
            self.m
                .latest(x, dir, len)
                .is_some_and(|i| self.m.get(i).is_decided())
        };
        let dirs = if decided(Direction::Lower) {
            [Direction::Upper, Direction::Lower]
        } else {
            [Direction::Lower, Direction::Upper]
        };
        for dir in dirs {
            if decided(dir) {
                continue;
            }
            let Some(b) = self.m.bound_of(x, dir) else {
                continue;
            };
            if divides(d, &(&a * b + &k)) {
                continue;
            }
            let c = bound_div(d, p, x, &self.m, dir)?;
            let crosses = match dir {
                Direction::Lower => self.m.upper_of(x).is_some_and(|u| c > *u),
                Direction::Upper => self.m.lower_of(x).is_some_and(|l| c < *l),
            };
            if crosses {
                return Ok(Some((x, dir)));
            }
        }
        Ok(None)
    }

    fn guarded_propagate(&mut self) -> Result<Option<Applied>, EngineError> {
        let constraints: Vec<Constraint> = self
            .problem
            .constraints()
            .iter()
            .filter(|c| self.is_guarded_constraint(c))
            .cloned()
            .collect();
        for c in &constraints {
            match c {
                Constraint::Ineq(p) => {
                    if let Some(x) = p.vars().find(|x| improves(p, *x, &self.m)) {
                        return Ok(Some(self.propagate_ineq(p, x)?));
                    }
                }
                Constraint::Div(d, p) => {
                    if let Some(a) = self.propagate_div(d, p, None)? {
                        return Ok(Some(a));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Propagate-Div on the single unfixed variable of `d | p` (or on `only` when given).
    fn propagate_div(
        &mut self,
        d: &Int,
        p: &LinearPolynomial,
        only: Option<Var>,
    ) -> Result<Option<Applied>, EngineError> {
        let mut unfixed = p.vars().filter(|y| !self.m.is_fixed(*y));
        let (Some(x), None) = (unfixed.next(), unfixed.next()) else {
            return Ok(None);
        };
        if only.is_some_and(|o| o != x) {
            return Ok(None);
        }
        let (a, k) = div_parts(p, x, &self.m)?;
        for dir in [Direction::Lower, Direction::Upper] {
            let Some(b) = self.m.bound_of(x, dir) else {
                continue;
            };
            if divides(d, &(&a * b + &k)) {
                continue;
            }
            let c = bound_div(d, p, x, &self.m, dir)?;
            let within = match dir {
                Direction::Lower => self.m.upper_of(x).is_none_or(|u| c <= *u),
                Direction::Upper => self.m.lower_of(x).is_none_or(|l| c >= *l),
            };
            if !within {
                continue;
            }
            let j = div_derive(d, p, x, &self.m, &self.problem.order, dir)?;
            return Ok(Some(self.propagate(Rule::PropagateDiv, x, dir, c, j)?));
        }
        Ok(None)
    }

    fn unguarded_layer(&mut self) -> Result<Applied, EngineError> {
        let order = self.problem.order.clone();
        for x in self.occurring_vars() {
            if self.is_guarded(x) {
                continue;
            }
            let tops: Vec<Constraint> = self
                .problem
                .constraints()
                .iter()
                .filter(|c| c.top(&order) == Some(x))
                .cloned()
                .collect();
            let fixed = self.m.is_fixed(x);
            if fixed && !tops.iter().any(|c| is_conflict(c, &self.m)) {
                continue;
            }
            let divs: Vec<&Constraint> = tops.iter().filter(|c| c.is_div()).collect();
            if divs.len() >= 2 {
                return self.solve_div(x, divs[0].clone(), divs[1].clone());
            }
            if let Some(core) = classify_core(x, &tops, &self.m, &order)? {
                return self.resolve_cooper(core);
            }
            if fixed {
                return Err(EngineError::Frozen(format!(
                    "conflict at fixed {} without a core",
                    self.name(x)
                )));
            }
            for c in &tops {
                if let Constraint::Ineq(p) = c {
                    if improves(p, x, &self.m) {
                        return self.propagate_ineq(p, x);
                    }
                }
            }
            if let Some(Constraint::Div(d, p)) = divs.first() {
                let both = self.m.lower_of(x).is_some() && self.m.upper_of(x).is_some();
                let (a, k) = div_parts(p, x, &self.m)?;
                // with a single divisibility constraint on top, only solvability matters
                if both || divides(&gcd(&a, d), &k) {
                    if let Some(a) = self.propagate_div(d, p, Some(x))? {
                        return Ok(a);
                    }
                }
            }
            if self.m.lower_of(x).is_some() || self.m.upper_of(x).is_some() {
                return self.decide(x);
            }
            return self.slack_intro(x);
        }
        Err(EngineError::Frozen("no rule applies".into()))
    }

    fn solve_div(
        &mut self,
        x: Var,
        i1: Constraint,
        i2: Constraint,
    ) -> Result<Applied, EngineError> {
        let (n1, n2) = divsolve(x, &i1, &i2, &self.problem.order)?;
        self.problem.remove(&i1);
        self.problem.remove(&i2);
        let conflict = if n2.poly().is_constant() {
            !n2.is_trivially_true()
        } else {
            is_conflict(&n2, &self.m)
        };
        let mut added = Vec::new();
        added.extend(self.add_constraint(n1));
        added.extend(self.add_constraint(n2.clone()));
        let removed = vec![i1, i2];
        if !conflict {
            let kept_len = self.m.len();
            return Ok((
                Rule::SolveDivLeft,
                Some(x),
                Detail::Replaced {
                    removed,
                    added,
                    kept_len,
                },
            ));
        }
        if let Some(y) = n2.top(&self.problem.order) {
            let len = self.prefix_len(y);
            self.m.truncate(len);
        }
        let kept_len = self.m.len();
        Ok((
            Rule::SolveDivRight,
            Some(x),
            Detail::Replaced {
                removed,
                added,
                kept_len,
            },
        ))
    }

    fn resolve_cooper(&mut self, core: ConflictingCore) -> Result<Applied, EngineError> {
        let x = core.var;
        let mut signature = core.constraints();
        signature.sort();
        if !self.cores.insert((x, signature)) {
            self.stats.core_reselections += 1;
            return Err(EngineError::Reselected(x));
        }
        let fresh = if core.kind == CoreKind::Diophantine {
            None
        } else {
            let k = self.problem.vars.fresh("_k", VarKind::Fresh);
            self.problem.order.push_min(k);
            self.guarded.insert(k);
            self.stats.fresh_vars += 1;
            Some(k)
        };
        let r = cooper(&core, &mut || {
            fresh.expect("resolvent needs a fresh variable")
        });
        let order = &self.problem.order;
        let y = order.min_of(r.r_c.iter().filter_map(|c| c.top(order)));
        let mut added = Vec::new();
        for c in r.all() {
            added.extend(self.add_constraint(c.clone()));
        }
        if let Some(y) = y {
            let len = self.prefix_len(y);
            self.m.truncate(len);
        }
        let kept_len = self.m.len();
        Ok((
            Rule::ResolveCooper,
            Some(x),
            Detail::Replaced {
                removed: vec![],
                added,
                kept_len,
            },
        ))
    }

    fn slack_intro(&mut self, x: Var) -> Result<Applied, EngineError> {
        let s = match self.slack {
            Some(s) => s,
            None => {
                let s = self.problem.vars.fresh("_s", VarKind::Slack);
                let pos = self
                    .problem
                    .order
                    .ascending()
                    .iter()
                    .filter(|v| self.guarded.contains(v))
                    .count();
                self.problem.order.insert_at(pos, s);
                self.slack = Some(s);
                self.stats.fresh_vars += 1;
                s
            }
        };
        let cs = [
            LinearPolynomial::term(-1, s),
            LinearPolynomial::from_terms([(x, 1), (s, -1)], 0),
            LinearPolynomial::from_terms([(x, -1), (s, -1)], 0),
        ];
        let mut added = Vec::new();
        for p in cs {
            added.extend(self.add_constraint(Constraint::Ineq(p)));
        }
        if added.is_empty() {
            return Err(EngineError::Frozen(format!("{} stays stuck", self.name(x))));
        }
        Ok((Rule::SlackIntro, Some(x), Detail::Added(added)))
    }

    fn step_conflict(&mut self, i: LinearPolynomial) -> Result<Applied, EngineError> {
        if i.is_constant() {
            self.status = Status::Unsat;
            return Ok((Rule::Unsat, None, Detail::Constraint(Constraint::Ineq(i))));
        }
        let Some(gamma) = self.m.top().cloned() else {
            return Err(EngineError::Frozen("conflict over an empty stack".into()));
        };
        if !gamma.is_decided() {
            let resolved = resolve(&gamma, &i)?;
            self.m.pop();
            self.status = Status::Conflict(resolved.clone());
            return Ok((
                Rule::Resolve,
                Some(gamma.var),
                Detail::Constraint(Constraint::Ineq(resolved)),
            ));
        }
        let len = self.m.len() - 1;
        if matches!(lower(&i, &self.m.prefix(len)), BoundValue::Finite(v) if v.is_positive()) {
            self.m.pop();
            return Ok((Rule::SkipDecision, Some(gamma.var), Detail::None));
        }
        let learned = Constraint::Ineq(i.clone());
        if !self.problem.contains(&learned) {
            self.problem.add(learned.clone());
            return Ok((Rule::Learn, None, Detail::Constraint(learned)));
        }
        self.backjump(i, len)
    }

    /// Jumps below the decision at `len` and propagates from the conflict on its variable
    /// (or, failing that, on the largest variable of the conflict that it improves).
    fn backjump(&mut self, i: LinearPolynomial, len: usize) -> Result<Applied, EngineError> {
        let gamma_var = self.m.get(len).var;
        let order = self.problem.order.clone();
        let mut candidates: Vec<Var> = vec![gamma_var];
        let mut rest = i.vars_descending(&order);
        rest.retain(|y| *y != gamma_var);
        candidates.extend(rest);
        let prefix = self.m.prefix(len);
        let Some(x) = candidates
            .into_iter()
            .find(|x| i.contains(*x) && improves(&i, *x, &prefix))
        else {
            return Err(EngineError::Frozen(
                "backjump has no improving variable".into(),
            ));
        };
        let BoundValue::Finite(b) = bound_ineq(&i, x, &prefix)? else {
            unreachable!()
        };
        let dir = if i.coeff(x).is_positive() {
            Direction::Upper
        } else {
            Direction::Lower
        };
        let j = tight_in(&i, x, &self.m, len, &order, &[], &mut None)?;
        self.m.truncate(len);
        self.status = Status::Search;
        self.propagate(Rule::Backjump, x, dir, b, j)
    }
}

/// `d | a1*x1 + ... + c` with `gcd(d, a1, ..., an)` not dividing `c`.
fn violates_gcd(c: &Constraint) -> bool {
    match c {
        Constraint::Div(d, p) => !divides(&gcd(d, &p.coeff_gcd()), p.constant()),
        Constraint::Ineq(_) => false,
    }
}

/// Convenience wrapper: builds a solver and runs it.
pub fn solve(problem: &Problem, config: EngineConfig) -> Result<SolveOutcome, EngineError> {
    Solver::new(problem, config).solve()
}
