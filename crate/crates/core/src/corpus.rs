//! Regression instances with expected verdicts and step budgets.

use std::fmt;

use crate::engine::{EngineConfig, SolveOutcome, Solver};
use crate::frontend::{parse, Expected, OrderPolicy};
use crate::oracle::{qe_decide, QeResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub text: &'static str,
    pub expected: Expected,
    pub step_budget: u64,
    /// Variable order fixed by the entry, ascending.
    pub required_order: Option<Vec<String>>,
}

const SOURCES: [(&str, &str); 5] = [
    ("ex1", include_str!("../corpus/ex1.lia")),
    ("ex2", include_str!("../corpus/ex2.lia")),
    ("ex3", include_str!("../corpus/ex3.lia")),
    ("ex4", include_str!("../corpus/ex4.lia")),
    ("parity", include_str!("../corpus/parity.lia")),
];

/// All entries; panics if a bundled file lacks its `expect` or `budget` directive.
pub fn entries() -> Vec<CorpusEntry> {
    SOURCES
        .iter()
        .map(|(name, text)| {
            let d = parse(text, OrderPolicy::Declaration)
                .unwrap_or_else(|e| panic!("corpus {name}: {e}"))
                .directives;
            CorpusEntry {
                name,
                text,
                expected: d
                    .expect
                    .unwrap_or_else(|| panic!("corpus {name}: no expect")),
                step_budget: d
                    .budget
                    .unwrap_or_else(|| panic!("corpus {name}: no budget")),
                required_order: d.order,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryReport {
    pub name: &'static str,
    pub expected: Expected,
    /// `sat`, `unsat`, `step-limit` or an error message.
    pub got: String,
    pub steps: u64,
    pub budget: u64,
    /// The elimination oracle agrees with `expected`.
    pub oracle_ok: bool,
}

impl EntryReport {
    pub fn passed(&self) -> bool {
        self.got == self.expected.to_string() && self.steps <= self.budget && self.oracle_ok
    }
}

impl fmt::Display for EntryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: expected {}, got {} in {}/{} steps{}",
            self.name,
            self.expected,
            self.got,
            self.steps,
            self.budget,
            if self.oracle_ok {
                ""
            } else {
                ", oracle disagrees"
            }
        )
    }
}

pub fn run_entry(entry: &CorpusEntry) -> EntryReport {
    let problem = parse(entry.text, OrderPolicy::Declaration)
        .expect("corpus parses")
        .problem;
    let config = EngineConfig {
        max_steps: entry.step_budget,
        check_invariants: true,
    };
    let mut solver = Solver::new(&problem, config);
    let got = match solver.solve() {
        Ok(SolveOutcome::Sat(_)) => "sat".to_string(),
        Ok(SolveOutcome::Unsat) => "unsat".to_string(),
        Ok(SolveOutcome::StepLimit) => "step-limit".to_string(),
        Err(e) => e.to_string(),
    };
    let oracle_ok = matches!(
        (qe_decide(&problem), entry.expected),
        (Ok(QeResult::Sat(_)), Expected::Sat) | (Ok(QeResult::Unsat), Expected::Unsat)
    );
    EntryReport {
        name: entry.name,
        expected: entry.expected,
        got,
        steps: solver.stats().steps,
        budget: entry.step_budget,
        oracle_ok,
    }
}

pub fn run_corpus() -> Vec<EntryReport> {
    entries().iter().map(run_entry).collect()
}
