use std::sync::Arc;

use super::{LinearPolynomial, ModelError, Var};
use crate::arith::Int;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Lower,
    Upper,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Lower => Direction::Upper,
            Direction::Upper => Direction::Lower,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reason {
    Decided,
    /// Justification `poly <= 0`; its coefficient on the bounded variable is -1 for
    /// lower bounds and +1 for upper bounds.
    Propagated(Arc<LinearPolynomial>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub var: Var,
    pub dir: Direction,
    pub value: Int,
    pub reason: Reason,
}

impl Bound {
    pub fn decided(var: Var, dir: Direction, value: Int) -> Self {
        Bound {
            var,
            dir,
            value,
            reason: Reason::Decided,
        }
    }

    pub fn propagated(
        var: Var,
        dir: Direction,
        value: Int,
        justification: LinearPolynomial,
    ) -> Self {
        Bound {
            var,
            dir,
            value,
            reason: Reason::Propagated(Arc::new(justification)),
        }
    }

    pub fn is_decided(&self) -> bool {
        matches!(self.reason, Reason::Decided)
    }

    pub fn justification(&self) -> Option<&LinearPolynomial> {
        match &self.reason {
            Reason::Propagated(j) => Some(j),
            Reason::Decided => None,
        }
    }
}

/// Read access to the current lower/upper bound of each variable.
pub trait Bounds {
    fn lower_of(&self, x: Var) -> Option<&Int>;
    fn upper_of(&self, x: Var) -> Option<&Int>;

    fn bound_of(&self, x: Var, dir: Direction) -> Option<&Int> {
        match dir {
            Direction::Lower => self.lower_of(x),
            Direction::Upper => self.upper_of(x),
        }
    }

    fn is_fixed(&self, x: Var) -> bool {
        matches!((self.lower_of(x), self.upper_of(x)), (Some(l), Some(u)) if l == u)
    }

    /// The value of a fixed variable.
    fn fixed_value(&self, x: Var) -> Option<&Int> {
        match (self.lower_of(x), self.upper_of(x)) {
            (Some(l), Some(u)) if l == u => Some(l),
            _ => None,
        }
    }
}

/// The bound sequence M, with per-variable indices for O(log n) lookups on prefixes.
#[derive(Debug, Clone, Default)]
pub struct BoundStack {
    entries: Vec<Bound>,
    lower_idx: Vec<Vec<usize>>,
    upper_idx: Vec<Vec<usize>>,
}

impl BoundStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Bound] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &Bound {
        &self.entries[i]
    }

    pub fn top(&self) -> Option<&Bound> {
        self.entries.last()
    }

    fn index(&self, x: Var, dir: Direction) -> Option<&Vec<usize>> {
        match dir {
            Direction::Lower => self.lower_idx.get(x.index()),
            Direction::Upper => self.upper_idx.get(x.index()),
        }
    }

    /// Index of the latest entry for `(x, dir)` among the first `len` entries.
    pub fn latest(&self, x: Var, dir: Direction, len: usize) -> Option<usize> {
        let idx = self.index(x, dir)?;
        let n = idx.partition_point(|&i| i < len);
        n.checked_sub(1).map(|k| idx[k])
    }

    pub fn prefix(&self, len: usize) -> Prefix<'_> {
        Prefix {
            stack: self,
            len: len.min(self.len()),
        }
    }

    /// Push a bound; it must strictly improve the current bound in its direction and keep
    /// lower <= upper.
    pub fn push(&mut self, b: Bound) -> Result<(), ModelError> {
        let improves = match b.dir {
            Direction::Lower => self.lower_of(b.var).is_none_or(|l| b.value > *l),
            Direction::Upper => self.upper_of(b.var).is_none_or(|u| b.value < *u),
        };
        let consistent = match b.dir {
            Direction::Lower => self.upper_of(b.var).is_none_or(|u| b.value <= *u),
            Direction::Upper => self.lower_of(b.var).is_none_or(|l| b.value >= *l),
        };
        if !improves || !consistent {
            return Err(ModelError::BadBound);
        }
        let slot = b.var.index();
        let table = match b.dir {
            Direction::Lower => &mut self.lower_idx,
            Direction::Upper => &mut self.upper_idx,
        };
        if table.len() <= slot {
            table.resize_with(slot + 1, Vec::new);
        }
        table[slot].push(self.entries.len());
        self.entries.push(b);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<Bound> {
        let b = self.entries.pop()?;
        let table = match b.dir {
            Direction::Lower => &mut self.lower_idx,
            Direction::Upper => &mut self.upper_idx,
        };
        table[b.var.index()].pop();
        Some(b)
    }

    pub fn truncate(&mut self, len: usize) {
        while self.entries.len() > len {
            self.pop();
        }
    }

    /// Number of decided entries.
    pub fn decision_count(&self) -> usize {
        self.entries.iter().filter(|b| b.is_decided()).count()
    }
}

impl Bounds for BoundStack {
    fn lower_of(&self, x: Var) -> Option<&Int> {
        self.lower_idx
            .get(x.index())
            .and_then(|v| v.last())
            .map(|&i| &self.entries[i].value)
    }

    fn upper_of(&self, x: Var) -> Option<&Int> {
        self.upper_idx
            .get(x.index())
            .and_then(|v| v.last())
            .map(|&i| &self.entries[i].value)
    }
}

/// View of the first `len` entries of a [`BoundStack`].
#[derive(Clone, Copy)]
pub struct Prefix<'a> {
    stack: &'a BoundStack,
    len: usize,
}

impl Prefix<'_> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl Bounds for Prefix<'_> {
    fn lower_of(&self, x: Var) -> Option<&Int> {
        self.stack
            .latest(x, Direction::Lower, self.len)
            .map(|i| &self.stack.entries[i].value)
    }

    fn upper_of(&self, x: Var) -> Option<&Int> {
        self.stack
            .latest(x, Direction::Upper, self.len)
            .map(|i| &self.stack.entries[i].value)
    }
}
