//! Decision procedure for conjunctions of linear integer inequalities and divisibility
//! constraints, with a two-layered conflict-driven search and elimination-based oracles.

pub mod arith;
pub mod bounds;
pub mod cooper;
pub mod corpus;
pub mod engine;
pub mod frontend;
pub mod model;
pub mod oracle;
pub mod tighten;
