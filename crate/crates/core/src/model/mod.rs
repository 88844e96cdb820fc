//! Variables, polynomials, constraints, the bound sequence and problems.

mod constraint;
mod poly;
mod trail;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

pub use constraint::Constraint;
pub use poly::LinearPolynomial;
pub use trail::{Bound, BoundStack, Bounds, Direction, Prefix, Reason};

use crate::arith::Int;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("constraint has no variables")]
    ConstantConstraint,
    #[error("zero modulus in divisibility constraint")]
    ZeroModulus,
    #[error("variable v{} has no value", .0.0)]
    MissingVariable(Var),
    #[error("bound does not strictly improve or makes the stack inconsistent")]
    BadBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Original,
    Slack,
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
}

/// Names and kinds of all variables of one problem or solver instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarTable {
    infos: Vec<VarInfo>,
    by_name: HashMap<String, Var>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.infos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infos.is_empty()
    }

    /// Returns the existing variable with this name, or creates it.
    pub fn intern(&mut self, name: &str) -> Var {
        if let Some(v) = self.by_name.get(name) {
            return *v;
        }
        self.push(name.to_string(), VarKind::Original)
    }

    /// A new variable whose name starts with `stem` and collides with nothing.
    pub fn fresh(&mut self, stem: &str, kind: VarKind) -> Var {
        let mut n = self.infos.len();
        loop {
            let name = format!("{stem}{n}");
            if !self.by_name.contains_key(&name) {
                return self.push(name, kind);
            }
            n += 1;
        }
    }

    fn push(&mut self, name: String, kind: VarKind) -> Var {
        let v = Var(self.infos.len() as u32);
        self.by_name.insert(name.clone(), v);
        self.infos.push(VarInfo { name, kind });
        v
    }

    pub fn lookup(&self, name: &str) -> Option<Var> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, v: Var) -> &str {
        &self.infos[v.index()].name
    }

    pub fn kind(&self, v: Var) -> VarKind {
        self.infos[v.index()].kind
    }

    pub fn all(&self) -> impl Iterator<Item = Var> {
        (0..self.infos.len() as u32).map(Var)
    }
}

/// The total order ≺, stored as an ascending sequence plus a rank table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariableOrder {
    seq: Vec<Var>,
    rank: Vec<usize>,
}

impl VariableOrder {
    pub fn from_ascending(seq: Vec<Var>) -> Self {
        let mut o = VariableOrder {
            seq,
            rank: Vec::new(),
        };
        o.reindex();
        o
    }

    fn reindex(&mut self) {
        let max = self.seq.iter().map(|v| v.index() + 1).max().unwrap_or(0);
        self.rank = vec![usize::MAX; max];
        for (i, v) in self.seq.iter().enumerate() {
            self.rank[v.index()] = i;
        }
    }

    pub fn ascending(&self) -> &[Var] {
        &self.seq
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn contains(&self, v: Var) -> bool {
        self.rank.get(v.index()).is_some_and(|r| *r != usize::MAX)
    }

    pub fn rank(&self, v: Var) -> usize {
        self.rank.get(v.index()).copied().unwrap_or(usize::MAX)
    }

    pub fn cmp(&self, a: Var, b: Var) -> Ordering {
        self.rank(a).cmp(&self.rank(b))
    }

    pub fn less(&self, a: Var, b: Var) -> bool {
        self.rank(a) < self.rank(b)
    }

    pub fn max_of(&self, vars: impl IntoIterator<Item = Var>) -> Option<Var> {
        vars.into_iter().max_by_key(|v| self.rank(*v))
    }

    pub fn min_of(&self, vars: impl IntoIterator<Item = Var>) -> Option<Var> {
        vars.into_iter().min_by_key(|v| self.rank(*v))
    }

    /// Insert `v` so that exactly `pos` variables precede it.
    pub fn insert_at(&mut self, pos: usize, v: Var) {
        self.seq.insert(pos, v);
        self.reindex();
    }

    /// Insert `v` as the new global minimum.
    pub fn push_min(&mut self, v: Var) {
        self.insert_at(0, v);
    }

    pub fn push_max(&mut self, v: Var) {
        self.seq.push(v);
        self.reindex();
    }
}

/// A (partial) map from variables to integers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment(BTreeMap<Var, Int>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: Var) -> Option<&Int> {
        self.0.get(&v)
    }

    pub fn set(&mut self, v: Var, value: Int) {
        self.0.insert(v, value);
    }

    pub fn remove(&mut self, v: Var) -> Option<Int> {
        self.0.remove(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Int)> {
        self.0.iter().map(|(v, i)| (*v, i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(Var, Int)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (Var, Int)>>(iter: T) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

/// Exact value of `p` under `a`.
pub fn eval(p: &LinearPolynomial, a: &Assignment) -> Result<Int, ModelError> {
    p.eval(a)
}

pub fn normalize(c: &Constraint, order: &VariableOrder) -> Constraint {
    c.normalize(order)
}

pub fn top_variable(c: &Constraint, order: &VariableOrder) -> Result<Var, ModelError> {
    c.top_variable(order)
}

/// True iff `constraints` contains both unit guards `x - u <= 0` and `-x + l <= 0`.
pub fn is_guarded<'a>(x: Var, constraints: impl IntoIterator<Item = &'a Constraint>) -> bool {
    let (mut lo, mut hi) = (false, false);
    for c in constraints {
        lo |= c.as_lower_guard().is_some_and(|(v, _)| v == x);
        hi |= c.as_upper_guard().is_some_and(|(v, _)| v == x);
    }
    lo && hi
}

/// The tightest syntactic guard interval of `x`, if both sides are present.
pub fn guard_interval<'a>(
    x: Var,
    constraints: impl IntoIterator<Item = &'a Constraint>,
) -> Option<(Int, Int)> {
    let (mut lo, mut hi): (Option<Int>, Option<Int>) = (None, None);
    for c in constraints {
        if let Some((v, l)) = c.as_lower_guard() {
            if v == x && lo.as_ref().is_none_or(|cur| l > *cur) {
                lo = Some(l);
            }
        }
        if let Some((v, u)) = c.as_upper_guard() {
            if v == x && hi.as_ref().is_none_or(|cur| u < *cur) {
                hi = Some(u);
            }
        }
    }
    Some((lo?, hi?))
}

/// A conjunction of constraints with its variables and order. Constraints are kept
/// normalized, in insertion order, without duplicates.
#[derive(Debug, Clone, Default)]
pub struct Problem {
    pub vars: VarTable,
    pub order: VariableOrder,
    constraints: Vec<Constraint>,
    seen: HashSet<Constraint>,
}

impl Problem {
    pub fn new(vars: VarTable, order: VariableOrder) -> Self {
        Problem {
            vars,
            order,
            constraints: Vec::new(),
            seen: HashSet::new(),
        }
    }

    /// Normalizes and inserts; returns false for duplicates.
    pub fn add(&mut self, c: Constraint) -> bool {
        let c = c.normalize(&self.order);
        if self.seen.contains(&c) {
            return false;
        }
        self.seen.insert(c.clone());
        self.constraints.push(c);
        true
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.seen.contains(c)
    }

    pub fn remove(&mut self, c: &Constraint) -> bool {
        if !self.seen.remove(c) {
            return false;
        }
        self.constraints.retain(|k| k != c);
        true
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Same variables and order, constraints replaced.
    pub fn with_constraints(&self, cs: impl IntoIterator<Item = Constraint>) -> Problem {
        let mut p = Problem::new(self.vars.clone(), self.order.clone());
        for c in cs {
            p.add(c);
        }
        p
    }

    /// Variables occurring in some constraint, ascending by ≺.
    pub fn occurring_vars(&self) -> Vec<Var> {
        let used: HashSet<Var> = self.constraints.iter().flat_map(|c| c.vars()).collect();
        self.order
            .ascending()
            .iter()
            .copied()
            .filter(|v| used.contains(v))
            .collect()
    }

    pub fn is_guarded(&self, x: Var) -> bool {
        is_guarded(x, &self.constraints)
    }

    pub fn guard_interval(&self, x: Var) -> Option<(Int, Int)> {
        guard_interval(x, &self.constraints)
    }

    pub fn holds(&self, a: &Assignment) -> Result<bool, ModelError> {
        for c in &self.constraints {
            if !c.holds(a)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Re-sort the order so guarded variables precede unguarded ones, keeping the
    /// relative order inside each class.
    pub fn repair_order(&mut self) {
        let (g, u): (Vec<Var>, Vec<Var>) = self
            .order
            .ascending()
            .iter()
            .partition(|v| self.is_guarded(**v));
        self.order = VariableOrder::from_ascending(g.into_iter().chain(u).collect());
        let old = std::mem::take(&mut self.constraints);
        self.seen.clear();
        for c in old {
            self.add(c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;

    fn setup(names: &[&str]) -> (VarTable, Vec<Var>) {
        let mut t = VarTable::new();
        let vs = names.iter().map(|n| t.intern(n)).collect();
        (t, vs)
    }

    #[test]
    fn top_variable_examples() {
        let (_, v) = setup(&["x", "y"]);
        let (x, y) = (v[0], v[1]);
        let y_lt_x = VariableOrder::from_ascending(vec![y, x]);
        let x_lt_y = VariableOrder::from_ascending(vec![x, y]);
        let i = Constraint::Ineq(LinearPolynomial::from_terms([(x, 1), (y, -1)], 0));
        assert_eq!(top_variable(&i, &y_lt_x).unwrap(), x);
        let d = Constraint::div(6, LinearPolynomial::from_terms([(y, 4), (x, 1)], 0)).unwrap();
        assert_eq!(top_variable(&d, &x_lt_y).unwrap(), y);
        let c = Constraint::Ineq(LinearPolynomial::constant_poly(3));
        assert_eq!(
            top_variable(&c, &x_lt_y),
            Err(ModelError::ConstantConstraint)
        );
    }

    #[test]
    fn guarded_examples() {
        let (_, v) = setup(&["x", "y", "z"]);
        let (x, y, z) = (v[0], v[1], v[2]);
        let c = [
            Constraint::Ineq(LinearPolynomial::term(-1, x)),
            Constraint::Ineq(LinearPolynomial::from_terms([(x, 1)], -1)),
            Constraint::Ineq(LinearPolynomial::term(-1, y)),
            Constraint::Ineq(LinearPolynomial::term(-1, z)),
            Constraint::Ineq(LinearPolynomial::term(1, z)),
        ];
        assert!(is_guarded(x, &c));
        assert!(!is_guarded(y, &c));
        assert!(is_guarded(z, &c));
        assert_eq!(guard_interval(x, &c), Some((int(0), int(1))));
        // non-unit coefficient is not a guard
        let c2 = [
            Constraint::Ineq(LinearPolynomial::from_terms([(y, 2)], -4)),
            Constraint::Ineq(LinearPolynomial::term(-1, y)),
        ];
        assert!(!is_guarded(y, &c2));
    }

    #[test]
    fn normalize_examples() {
        let (_, v) = setup(&["x", "y"]);
        let (x, y) = (v[0], v[1]);
        let o = VariableOrder::from_ascending(vec![x, y]);
        let d = Constraint::div(6, LinearPolynomial::from_terms([(y, -4), (x, -1)], 0)).unwrap();
        let n = normalize(&d, &o);
        assert_eq!(
            n,
            Constraint::Div(int(6), LinearPolynomial::from_terms([(y, 4), (x, 1)], 0))
        );
        assert_eq!(normalize(&n, &o), n);
        let d = Constraint::div(-2, LinearPolynomial::var(x)).unwrap();
        assert_eq!(
            normalize(&d, &o),
            Constraint::Div(int(2), LinearPolynomial::var(x))
        );
        let i = Constraint::Ineq(LinearPolynomial::from_terms([(x, 1), (y, 0)], -3));
        assert_eq!(
            normalize(&i, &o),
            Constraint::Ineq(LinearPolynomial::from_terms([(x, 1)], -3))
        );
        assert_eq!(
            Constraint::div(0, LinearPolynomial::var(x)),
            Err(ModelError::ZeroModulus)
        );
    }

    #[test]
    fn eval_examples() {
        let (_, v) = setup(&["x", "y"]);
        let (x, y) = (v[0], v[1]);
        let a: Assignment = [(x, int(1)), (y, int(2))].into_iter().collect();
        let p = LinearPolynomial::from_terms([(y, 4), (x, 1)], 0);
        assert_eq!(eval(&p, &a).unwrap(), int(9));
        assert_eq!(
            eval(&LinearPolynomial::constant_poly(5), &Assignment::new()).unwrap(),
            int(5)
        );
        let a: Assignment = [(x, int(3)), (y, int(3))].into_iter().collect();
        let p = LinearPolynomial::from_terms([(x, 1), (y, -1)], 0);
        assert_eq!(eval(&p, &a).unwrap(), int(0));
        assert_eq!(
            eval(&p, &Assignment::new()),
            Err(ModelError::MissingVariable(x))
        );
    }

    #[test]
    fn stack_rejects_non_improving() {
        let (_, v) = setup(&["x"]);
        let x = v[0];
        let mut m = BoundStack::new();
        m.push(Bound::decided(x, Direction::Lower, int(0))).unwrap();
        assert_eq!(
            m.push(Bound::decided(x, Direction::Lower, int(0))),
            Err(ModelError::BadBound)
        );
        m.push(Bound::decided(x, Direction::Upper, int(3))).unwrap();
        assert_eq!(
            m.push(Bound::decided(x, Direction::Lower, int(4))),
            Err(ModelError::BadBound)
        );
        m.push(Bound::decided(x, Direction::Lower, int(3))).unwrap();
        assert!(m.is_fixed(x));
        assert_eq!(m.prefix(2).lower_of(x), Some(&int(0)));
        m.pop();
        assert_eq!(m.lower_of(x), Some(&int(0)));
    }

    #[test]
    fn problem_dedups_after_normalizing() {
        let (t, v) = setup(&["x"]);
        let x = v[0];
        let mut p = Problem::new(t, VariableOrder::from_ascending(vec![x]));
        assert!(p.add(Constraint::div(2, LinearPolynomial::term(-1, x)).unwrap()));
        assert!(!p.add(Constraint::div(2, LinearPolynomial::var(x)).unwrap()));
        assert_eq!(p.len(), 1);
    }
}
