use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::{Assignment, ModelError, Var, VariableOrder};
use crate::arith::Int;

/// Integer linear form `sum(c_i * x_i) + constant`. Zero coefficients are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearPolynomial {
    terms: BTreeMap<Var, Int>,
    constant: Int,
}

impl LinearPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant_poly(c: impl Into<Int>) -> Self {
        Self {
            terms: BTreeMap::new(),
            constant: c.into(),
        }
    }

    pub fn var(x: Var) -> Self {
        Self::term(1, x)
    }

    pub fn term(c: impl Into<Int>, x: Var) -> Self {
        let mut p = Self::zero();
        p.add_term(x, &c.into());
        p
    }

    pub fn from_terms<I, C>(terms: I, constant: impl Into<Int>) -> Self
    where
        I: IntoIterator<Item = (Var, C)>,
        C: Into<Int>,
    {
        let mut p = Self::constant_poly(constant);
        for (x, c) in terms {
            p.add_term(x, &c.into());
        }
        p
    }

    pub fn constant(&self) -> &Int {
        &self.constant
    }

    pub fn set_constant(&mut self, c: Int) {
        self.constant = c;
    }

    pub fn add_constant(&mut self, c: &Int) {
        self.constant += c;
    }

    /// Coefficient of `x`, zero when absent.
    pub fn coeff(&self, x: Var) -> Int {
        self.terms.get(&x).cloned().unwrap_or_default()
    }

    pub fn coeff_ref(&self, x: Var) -> Option<&Int> {
        self.terms.get(&x)
    }

    pub fn contains(&self, x: Var) -> bool {
        self.terms.contains_key(&x)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Var, &Int)> + '_ {
        self.terms.iter().map(|(v, c)| (*v, c))
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.terms.keys().copied()
    }

    pub fn num_vars(&self) -> usize {
        self.terms.len()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, x: Var, c: &Int) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(x).or_default();
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&x);
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &LinearPolynomial, factor: &Int) {
        if factor.is_zero() {
            return;
        }
        for (x, c) in other.terms() {
            self.add_term(x, &(c * factor));
        }
        self.constant += &other.constant * factor;
    }

    pub fn scaled(&self, factor: &Int) -> LinearPolynomial {
        let mut out = LinearPolynomial::zero();
        out.add_scaled(self, factor);
        out
    }

    pub fn negated(&self) -> LinearPolynomial {
        LinearPolynomial {
            terms: self.terms.iter().map(|(v, c)| (*v, -c)).collect(),
            constant: -&self.constant,
        }
    }

    /// Copy without the term on `x`.
    pub fn without(&self, x: Var) -> LinearPolynomial {
        let mut out = self.clone();
        out.terms.remove(&x);
        out
    }

    pub fn remove_term(&mut self, x: Var) -> Option<Int> {
        self.terms.remove(&x)
    }

    /// Gcd of all variable coefficients (zero for a constant polynomial).
    pub fn coeff_gcd(&self) -> Int {
        self.terms
            .values()
            .fold(Int::zero(), |g, c| crate::arith::gcd(&g, c))
    }

    /// The ≺-maximal variable.
    pub fn top(&self, order: &VariableOrder) -> Option<Var> {
        order.max_of(self.vars())
    }

    pub fn eval(&self, a: &Assignment) -> Result<Int, ModelError> {
        let mut v = self.constant.clone();
        for (x, c) in self.terms() {
            let value = a.get(x).ok_or(ModelError::MissingVariable(x))?;
            v += c * value;
        }
        Ok(v)
    }

    /// Variables sorted by descending ≺, the canonical rendering order.
    pub fn vars_descending(&self, order: &VariableOrder) -> Vec<Var> {
        let mut vs: Vec<Var> = self.vars().collect();
        vs.sort_by(|a, b| order.cmp(*b, *a));
        vs
    }

    pub fn max_abs_coeff(&self) -> Int {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_default()
    }
}
