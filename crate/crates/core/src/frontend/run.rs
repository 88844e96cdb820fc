use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::json;

use super::{emit_trace, parse, OrderPolicy};
use crate::engine::{EngineConfig, Rule, SolveOutcome, Solver};
use crate::model::{Assignment, Problem};
use crate::oracle::{differential, differential_box, enumerate, qe_decide, EnumResult, QeResult};

pub const EXIT_SAT: i32 = 10;
pub const EXIT_UNSAT: i32 = 20;
pub const EXIT_STEP_LIMIT: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMode {
    #[default]
    None,
    Enumerate,
    Qe,
    Differential,
}

impl FromStr for OracleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(OracleMode::None),
            "enumerate" => Ok(OracleMode::Enumerate),
            "qe" => Ok(OracleMode::Qe),
            "differential" => Ok(OracleMode::Differential),
            _ => Err(format!("unknown oracle mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunConfig {
    /// 0 means unlimited.
    pub max_steps: u64,
    pub trace_path: Option<PathBuf>,
    pub order_policy: OrderPolicy,
    pub emit_model: bool,
    /// Cross-check the engine's verdict with an oracle.
    pub oracle_mode: OracleMode,
    pub stats: bool,
}

/// Buffered output of one input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileReport {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

impl FileReport {
    fn error(msg: impl std::fmt::Display) -> Self {
        FileReport {
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
            exit_code: EXIT_ERROR,
        }
    }
}

fn render_model(out: &mut String, p: &Problem, a: &Assignment) {
    for x in p.order.ascending() {
        if let Some(v) = a.get(*x) {
            out.push_str(&format!("{} = {v}\n", p.vars.name(*x)));
        }
    }
}

pub fn run_file(path: &Path, cfg: &RunConfig) -> FileReport {
    match std::fs::read_to_string(path) {
        Ok(text) => run_text(&path.display().to_string(), &text, cfg),
        Err(e) => FileReport::error(format!("{}: {e}", path.display())),
    }
}

/// Parses and solves `text`; `name` prefixes error messages.
pub fn run_text(name: &str, text: &str, cfg: &RunConfig) -> FileReport {
    let parsed = match parse(text, cfg.order_policy) {
        Ok(p) => p,
        Err(e) => return FileReport::error(format!("{name}:{e}")),
    };
    let problem = parsed.problem;
    let engine_cfg = EngineConfig {
        max_steps: cfg.max_steps,
        ..EngineConfig::default()
    };
    let mut solver = Solver::new(&problem, engine_cfg);

    let outcome = match &cfg.trace_path {
        None => solver.solve(),
        Some(path) => {
            let file = match File::create(path) {
                Ok(f) => f,
                Err(e) => return FileReport::error(format!("{}: {e}", path.display())),
            };
            let mut w = BufWriter::new(file);
            let mut io_err = None;
            let r = solver.solve_with(&mut |ev, p| {
                if io_err.is_none() {
                    io_err = emit_trace(&mut w, ev, p).err();
                }
            });
            if let Some(e) = io_err.or_else(|| w.flush().err()) {
                return FileReport::error(format!("{}: {e}", path.display()));
            }
            r
        }
    };

    let mut stdout = String::new();
    let mut stderr = String::new();
    let exit_code = match &outcome {
        Ok(SolveOutcome::Sat(a)) => {
            stdout.push_str("sat\n");
            if cfg.emit_model {
                render_model(&mut stdout, &problem, a);
            }
            EXIT_SAT
        }
        Ok(SolveOutcome::Unsat) => {
            stdout.push_str("unsat\n");
            EXIT_UNSAT
        }
        Ok(SolveOutcome::StepLimit) => {
            stdout.push_str("unknown\n");
            stderr.push_str(&format!("{name}: step limit {} reached\n", cfg.max_steps));
            EXIT_STEP_LIMIT
        }
        Err(e) => return FileReport::error(format!("{name}: {e}")),
    };

    if cfg.stats {
        let s = solver.stats();
        let counts: serde_json::Map<String, serde_json::Value> = Rule::ALL
            .iter()
            .filter(|r| s.count(**r) > 0)
            .map(|r| (r.name().to_string(), s.count(*r).into()))
            .collect();
        let line = json!({
            "steps": s.steps,
            "rules": counts,
            "peak_depth": s.peak_depth,
            "fresh_vars": s.fresh_vars,
        });
        stderr.push_str(&format!("stats: {line}\n"));
    }

    if cfg.oracle_mode != OracleMode::None && exit_code != EXIT_STEP_LIMIT {
        let verdict = if exit_code == EXIT_SAT {
            "sat"
        } else {
            "unsat"
        };
        match oracle_verdict(&problem, cfg.oracle_mode) {
            Ok(v) => {
                stdout.push_str(&format!("oracle: {v}\n"));
                let conclusive = v == "sat" || v == "unsat";
                if v == "disagree" || (conclusive && v != verdict) {
                    stderr.push_str(&format!("{name}: oracle disagrees with the engine\n"));
                    return FileReport {
                        stdout,
                        stderr,
                        exit_code: EXIT_ERROR,
                    };
                }
            }
            Err(e) => {
                stderr.push_str(&format!("{name}: oracle failed: {e}\n"));
                return FileReport {
                    stdout,
                    stderr,
                    exit_code: EXIT_ERROR,
                };
            }
        }
    }
    FileReport {
        stdout,
        stderr,
        exit_code,
    }
}

/// `sat`, `unsat`, `unknown` (nothing found in a box that does not bound every variable)
/// or `disagree`.
pub fn oracle_verdict(p: &Problem, mode: OracleMode) -> Result<&'static str, String> {
    match mode {
        OracleMode::None => Ok("unknown"),
        OracleMode::Enumerate => {
            let (bx, exact) = differential_box(p);
            match enumerate(p, &bx).map_err(|e| e.to_string())? {
                EnumResult::Sat(_) => Ok("sat"),
                EnumResult::NoSolutionInBox if exact => Ok("unsat"),
                EnumResult::NoSolutionInBox => Ok("unknown"),
            }
        }
        OracleMode::Qe => match qe_decide(p).map_err(|e| e.to_string())? {
            QeResult::Sat(_) => Ok("sat"),
            QeResult::Unsat => Ok("unsat"),
        },
        OracleMode::Differential => {
            let r = differential(p, EngineConfig::default());
            if !r.agrees() {
                return Ok("disagree");
            }
            Ok(if r.engine == crate::oracle::Verdict::Sat {
                "sat"
            } else {
                "unsat"
            })
        }
    }
}

/// Exit code for several files: any error, else any step limit, else any unsat, else sat.
pub fn combine_exit_codes(codes: &[i32]) -> i32 {
    [EXIT_ERROR, EXIT_STEP_LIMIT, EXIT_UNSAT]
        .into_iter()
        .find(|c| codes.contains(c))
        .unwrap_or(EXIT_SAT)
}
