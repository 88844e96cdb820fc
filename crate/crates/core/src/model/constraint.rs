use num_traits::{One, Signed, Zero};

use super::{Assignment, LinearPolynomial, ModelError, Var, VariableOrder};
use crate::arith::{divides, Int};

/// `Ineq(p)` means `p <= 0`; `Div(d, p)` means `d | p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    Ineq(LinearPolynomial),
    Div(Int, LinearPolynomial),
}

impl Constraint {
    pub fn ineq(p: LinearPolynomial) -> Self {
        Constraint::Ineq(p)
    }

    /// Divisibility constraint; the modulus sign is dropped.
    pub fn div(d: impl Into<Int>, p: LinearPolynomial) -> Result<Self, ModelError> {
        let d = d.into();
        if d.is_zero() {
            return Err(ModelError::ZeroModulus);
        }
        Ok(Constraint::Div(d.abs(), p))
    }

    pub fn poly(&self) -> &LinearPolynomial {
        match self {
            Constraint::Ineq(p) | Constraint::Div(_, p) => p,
        }
    }

    pub fn modulus(&self) -> Option<&Int> {
        match self {
            Constraint::Div(d, _) => Some(d),
            Constraint::Ineq(_) => None,
        }
    }

    pub fn is_ineq(&self) -> bool {
        matches!(self, Constraint::Ineq(_))
    }

    pub fn is_div(&self) -> bool {
        matches!(self, Constraint::Div(..))
    }

    pub fn coeff(&self, x: Var) -> Int {
        self.poly().coeff(x)
    }

    pub fn contains(&self, x: Var) -> bool {
        self.poly().contains(x)
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.poly().vars()
    }

    pub fn top(&self, order: &VariableOrder) -> Option<Var> {
        self.poly().top(order)
    }

    /// Like [`Constraint::top`] but a constant constraint is an error.
    pub fn top_variable(&self, order: &VariableOrder) -> Result<Var, ModelError> {
        self.top(order).ok_or(ModelError::ConstantConstraint)
    }

    /// Positive modulus and positive top coefficient for divisibility constraints.
    /// A variable-free divisibility constraint gets a nonnegative constant.
    pub fn normalize(&self, order: &VariableOrder) -> Constraint {
        match self {
            Constraint::Ineq(p) => Constraint::Ineq(p.clone()),
            Constraint::Div(d, p) => {
                let flip = match p.top(order) {
                    Some(t) => p.coeff(t).is_negative(),
                    None => p.constant().is_negative(),
                };
                let p = if flip { p.negated() } else { p.clone() };
                Constraint::Div(d.abs(), p)
            }
        }
    }

    /// Divisibility constraints that hold for every assignment (`1 | p`, `d | 0`).
    pub fn is_trivially_true(&self) -> bool {
        match self {
            Constraint::Div(d, p) => divides(d, &p.coeff_gcd()) && divides(d, p.constant()),
            Constraint::Ineq(p) => p.is_constant() && !p.constant().is_positive(),
        }
    }

    pub fn holds(&self, a: &Assignment) -> Result<bool, ModelError> {
        Ok(match self {
            Constraint::Ineq(p) => !p.eval(a)?.is_positive(),
            Constraint::Div(d, p) => divides(d, &p.eval(a)?),
        })
    }

    /// Unit guard `x - u <= 0`: returns `(x, u)`.
    pub fn as_upper_guard(&self) -> Option<(Var, Int)> {
        self.as_unit(true)
    }

    /// Unit guard `-x + l <= 0`: returns `(x, l)`.
    pub fn as_lower_guard(&self) -> Option<(Var, Int)> {
        self.as_unit(false)
    }

    fn as_unit(&self, upper: bool) -> Option<(Var, Int)> {
        let Constraint::Ineq(p) = self else {
            return None;
        };
        if p.num_vars() != 1 {
            return None;
        }
        let (x, c) = p.terms().next()?;
        if upper && c.is_one() {
            Some((x, -p.constant()))
        } else if !upper && *c == -Int::one() {
            Some((x, p.constant().clone()))
        } else {
            None
        }
    }

    pub fn is_unit(&self) -> bool {
        self.as_upper_guard().is_some() || self.as_lower_guard().is_some()
    }
}
