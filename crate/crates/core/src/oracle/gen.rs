//! Seeded random problems for differential and termination testing.

use rand::Rng;

use crate::arith::Int;
use crate::model::{Constraint, LinearPolynomial, Problem, Var, VarTable, VariableOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardMode {
    /// Every variable gets both unit guards.
    All,
    /// At least one variable has no upper guard.
    SomeUnguarded,
    /// Each variable is guarded with probability one half.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenParams {
    pub max_vars: usize,
    pub max_coeff: i64,
    /// Constraints besides the guards.
    pub max_constraints: usize,
    /// Guards lie within `[-guard_radius, guard_radius]`.
    pub guard_radius: i64,
    pub max_modulus: i64,
    /// Percentage of generated constraints that are divisibility constraints.
    pub div_percent: u32,
    /// Maximum number of variables per generated constraint.
    pub max_width: usize,
    pub guards: GuardMode,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_vars: 4,
            max_coeff: 5,
            max_constraints: 6,
            guard_radius: 10,
            max_modulus: 6,
            div_percent: 25,
            max_width: 3,
            guards: GuardMode::All,
        }
    }
}

fn nonzero(rng: &mut impl Rng, max: i64) -> i64 {
    let v = rng.gen_range(1..=max);
    if rng.gen_bool(0.5) {
        -v
    } else {
        v
    }
}

/// A random problem over `x0, x1, ...` in declaration order (before the guarded-first repair).
pub fn random_problem(rng: &mut impl Rng, params: &GenParams) -> Problem {
    let n = rng.gen_range(1..=params.max_vars.max(1));
    let mut vars = VarTable::new();
    let xs: Vec<Var> = (0..n).map(|i| vars.intern(&format!("x{i}"))).collect();
    let mut problem = Problem::new(vars, VariableOrder::from_ascending(xs.clone()));

    let unguarded_pick = rng.gen_range(0..n);
    for (i, x) in xs.iter().enumerate() {
        let guarded = match params.guards {
            GuardMode::All => true,
            GuardMode::SomeUnguarded => i != unguarded_pick && rng.gen_bool(0.5),
            GuardMode::Mixed => rng.gen_bool(0.5),
        };
        let r = params.guard_radius;
        let lo = rng.gen_range(-r..=r);
        if guarded {
            let hi = rng.gen_range(lo..=r);
            problem.add(Constraint::Ineq(LinearPolynomial::from_terms(
                [(*x, -1)],
                lo,
            )));
            problem.add(Constraint::Ineq(LinearPolynomial::from_terms(
                [(*x, 1)],
                -hi,
            )));
        } else if rng.gen_bool(0.3) {
            problem.add(Constraint::Ineq(LinearPolynomial::from_terms(
                [(*x, -1)],
                lo,
            )));
        }
    }

    let m = rng.gen_range(1..=params.max_constraints.max(1));
    for i in 0..m {
        let width = rng.gen_range(1..=params.max_width.clamp(1, n));
        let mut p = LinearPolynomial::zero();
        if i == 0 && params.guards != GuardMode::All {
            p.add_term(
                xs[unguarded_pick],
                &Int::from(nonzero(rng, params.max_coeff)),
            );
        }
        for _ in 0..width {
            let x = xs[rng.gen_range(0..n)];
            p.add_term(x, &Int::from(nonzero(rng, params.max_coeff)));
        }
        if p.is_constant() {
            continue;
        }
        let div = rng.gen_range(0..100) < params.div_percent;
        if div {
            let d = rng.gen_range(2..=params.max_modulus.max(2));
            p.set_constant(Int::from(rng.gen_range(0..d)));
            problem.add(Constraint::Div(Int::from(d), p));
        } else {
            let r = params.max_coeff * 3;
            p.set_constant(Int::from(rng.gen_range(-r..=r)));
            problem.add(Constraint::Ineq(p));
        }
    }
    problem.repair_order();
    problem
}
