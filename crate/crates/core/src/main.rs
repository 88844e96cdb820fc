use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand};

use cutsat::cooper::weak_cooper_eliminate;
use cutsat::frontend::{
    combine_exit_codes, oracle_verdict, parse, render_problem, run_file, OracleMode, OrderPolicy,
    RunConfig, EXIT_ERROR, EXIT_SAT, EXIT_STEP_LIMIT, EXIT_UNSAT,
};

#[derive(Parser)]
#[command(
    name = "cutsat",
    version,
    about = "Linear integer arithmetic with divisibility constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide each file; files run in parallel, output is printed in argument order.
    Solve {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Give up after this many rule applications (0 = unlimited).
        #[arg(long, default_value_t = 0)]
        max_steps: u64,
        /// Write one JSON record per rule application (single input file only).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Variable order when the file has no order directive.
        #[arg(long, default_value = "declaration")]
        order: OrderPolicy,
        /// Print only the verdict.
        #[arg(long)]
        no_model: bool,
        /// Cross-check the verdict: none, enumerate, qe or differential.
        #[arg(long, default_value = "none")]
        oracle: OracleMode,
        /// Per-rule counters on stderr.
        #[arg(long)]
        stats: bool,
    },
    /// Decide a file with an oracle alone.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value = "qe")]
        mode: OracleMode,
        #[arg(long, default_value = "declaration")]
        order: OrderPolicy,
    },
    /// Print the problem with one variable removed by weak Cooper elimination.
    Eliminate {
        file: PathBuf,
        var: String,
        #[arg(long, default_value = "declaration")]
        order: OrderPolicy,
    },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    exit(EXIT_ERROR)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Solve {
            files,
            max_steps,
            trace,
            order,
            no_model,
            oracle,
            stats,
        } => {
            if trace.is_some() && files.len() > 1 {
                return fail("--trace takes a single input file");
            }
            let cfg = RunConfig {
                max_steps,
                trace_path: trace,
                order_policy: order,
                emit_model: !no_model,
                oracle_mode: oracle,
                stats,
            };
            let reports: Vec<_> = thread::scope(|s| {
                let handles: Vec<_> = files
                    .iter()
                    .map(|f| s.spawn(|| run_file(f, &cfg)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("solver thread panicked"))
                    .collect()
            });
            let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
            for (file, r) in files.iter().zip(&reports) {
                if files.len() > 1 {
                    let _ = writeln!(out, "{}:", file.display());
                }
                let _ = out.write_all(r.stdout.as_bytes());
                let _ = err.write_all(r.stderr.as_bytes());
            }
            let codes: Vec<i32> = reports.iter().map(|r| r.exit_code).collect();
            exit(combine_exit_codes(&codes))
        }
        Command::Oracle { file, mode, order } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return fail(format!("{}: {e}", file.display())),
            };
            let problem = match parse(&text, order) {
                Ok(p) => p.problem,
                Err(e) => return fail(format!("{}:{e}", file.display())),
            };
            match oracle_verdict(&problem, mode) {
                Ok(v) => {
                    println!("{v}");
                    exit(match v {
                        "sat" => EXIT_SAT,
                        "unsat" => EXIT_UNSAT,
                        "unknown" => EXIT_STEP_LIMIT,
                        _ => EXIT_ERROR,
                    })
                }
                Err(e) => fail(e),
            }
        }
        Command::Eliminate { file, var, order } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return fail(format!("{}: {e}", file.display())),
            };
            let problem = match parse(&text, order) {
                Ok(p) => p.problem,
                Err(e) => return fail(format!("{}:{e}", file.display())),
            };
            let Some(x) = problem.vars.lookup(&var) else {
                return fail(format!("no variable `{var}`"));
            };
            match weak_cooper_eliminate(x, &problem) {
                Ok(p) => {
                    print!("{}", render_problem(&p));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
