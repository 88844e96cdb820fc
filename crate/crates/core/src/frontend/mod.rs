//! Text format, canonical rendering, trace records and the file-level driver behind the CLI.

mod parse;
mod run;

use std::fmt::Write as _;
use std::io::{self, Write};

use num_traits::{One, Signed, Zero};
use serde_json::{json, Map, Value};

use crate::arith::Int;
use crate::engine::{Detail, TraceEvent};
use crate::model::{
    Constraint, Direction, LinearPolynomial, Problem, Var, VarTable, VariableOrder,
};

pub use parse::{parse, Directives, Expected, OrderPolicy, ParseError, Parsed};
pub use run::{
    combine_exit_codes, oracle_verdict, run_file, run_text, FileReport, OracleMode, RunConfig,
    EXIT_ERROR, EXIT_SAT, EXIT_STEP_LIMIT, EXIT_UNSAT,
};

/// Terms by descending order, explicit signs, no unit coefficients, constant last.
pub fn render_poly(p: &LinearPolynomial, vars: &VarTable, order: &VariableOrder) -> String {
    let mut out = String::new();
    for x in p.vars_descending(order) {
        let c = p.coeff(x);
        let mag = c.abs();
        if out.is_empty() {
            if c.is_negative() {
                out.push('-');
            }
        } else {
            out.push_str(if c.is_negative() { " - " } else { " + " });
        }
        if !mag.is_one() {
            write!(out, "{mag}").unwrap();
        }
        out.push_str(vars.name(x));
    }
    let k = p.constant();
    if out.is_empty() {
        write!(out, "{k}").unwrap();
    } else if !k.is_zero() {
        write!(
            out,
            " {} {}",
            if k.is_negative() { "-" } else { "+" },
            k.abs()
        )
        .unwrap();
    }
    out
}

pub fn render_constraint(c: &Constraint, vars: &VarTable, order: &VariableOrder) -> String {
    match c {
        Constraint::Ineq(p) => format!("{} <= 0", render_poly(p, vars, order)),
        Constraint::Div(d, p) => format!("{d} | {}", render_poly(p, vars, order)),
    }
}

pub fn render_bound(x: Var, dir: Direction, value: &Int, vars: &VarTable) -> String {
    let op = match dir {
        Direction::Lower => ">=",
        Direction::Upper => "<=",
    };
    format!("{} {op} {value}", vars.name(x))
}

/// The whole problem in the input format, with an order directive so parsing it back
/// reproduces the same order.
pub fn render_problem(p: &Problem) -> String {
    let names: Vec<&str> = p
        .order
        .ascending()
        .iter()
        .map(|v| p.vars.name(*v))
        .collect();
    let mut out = format!("#! order: {}\n", names.join(" "));
    for c in p.constraints() {
        out.push_str(&render_constraint(c, &p.vars, &p.order));
        out.push('\n');
    }
    out
}

/// One trace record as a JSON object with `step`, `rule`, `var` and `detail` fields.
pub fn trace_record(ev: &TraceEvent, problem: &Problem) -> Value {
    let (vars, order) = (&problem.vars, &problem.order);
    let render_all = |cs: &[Constraint]| -> Vec<String> {
        cs.iter()
            .map(|c| render_constraint(c, vars, order))
            .collect()
    };
    let mut detail = Map::new();
    match &ev.detail {
        Detail::None => {}
        Detail::Bound {
            dir,
            value,
            decided,
        } => {
            let x = ev.var.expect("bound events carry their variable");
            detail.insert("bound".into(), render_bound(x, *dir, value, vars).into());
            detail.insert("decided".into(), (*decided).into());
        }
        Detail::Constraint(c) => {
            detail.insert(
                "constraint".into(),
                render_constraint(c, vars, order).into(),
            );
        }
        Detail::Added(cs) => {
            detail.insert("added".into(), render_all(cs).into());
        }
        Detail::Replaced {
            removed,
            added,
            kept_len,
        } => {
            if !removed.is_empty() {
                detail.insert("removed".into(), render_all(removed).into());
            }
            detail.insert("added".into(), render_all(added).into());
            detail.insert("stack".into(), (*kept_len).into());
        }
        Detail::Model(a) => {
            let m: Map<String, Value> = a
                .iter()
                .map(|(x, v)| (vars.name(x).to_string(), v.to_string().into()))
                .collect();
            detail.insert("model".into(), m.into());
        }
    }
    json!({
        "step": ev.step,
        "rule": ev.rule.name(),
        "var": ev.var.map(|x| vars.name(x).to_string()),
        "detail": detail,
    })
}

/// Writes one record per line.
pub fn emit_trace(out: &mut dyn Write, ev: &TraceEvent, problem: &Problem) -> io::Result<()> {
    serde_json::to_writer(&mut *out, &trace_record(ev, problem))?;
    out.write_all(b"\n")
}
