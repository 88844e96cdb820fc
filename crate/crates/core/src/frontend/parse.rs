use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::arith::Int;
use crate::model::{Constraint, LinearPolynomial, Problem, Var, VarTable, VariableOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderPolicy {
    /// First occurrence in the file.
    #[default]
    Declaration,
    /// By variable name.
    Lexicographic,
}

impl FromStr for OrderPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "declaration" => Ok(OrderPolicy::Declaration),
            "lexicographic" => Ok(OrderPolicy::Lexicographic),
            _ => Err(format!("unknown order policy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Sat,
    Unsat,
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Expected::Sat => "sat",
            Expected::Unsat => "unsat",
        })
    }
}

/// Metadata lines of the form `#! key: value`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Directives {
    /// Explicit ascending order, smallest first.
    pub order: Option<Vec<String>>,
    pub expect: Option<Expected>,
    pub budget: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub problem: Problem,
    pub directives: Directives,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Num(Int),
    Ident(String),
    Plus,
    Minus,
    Star,
    Le,
    Ge,
    Bar,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Ge => f.write_str("`>=`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::End => f.write_str("end of line"),
        }
    }
}

fn tokenize(src: &str, line: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |col: usize, message: String| ParseError {
        line,
        column: col + 1,
        message,
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'|' => out.push((Tok::Bar, start)),
            b'<' | b'>' => {
                if bytes.get(i + 1) != Some(&b'=') {
                    return Err(err(start, "expected `<=` or `>=`".into()));
                }
                out.push((if c == b'<' { Tok::Le } else { Tok::Ge }, start));
                i += 1;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((Tok::Num(src[start..i].parse().unwrap()), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => return Err(err(start, format!("unexpected character `{}`", c as char))),
        }
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct LineParser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    vars: &'a mut VarTable,
}

impl LineParser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.toks[self.pos].1 + 1,
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    /// term := [integer ["*"]] ident | integer
    fn term(&mut self, sign: i64, poly: &mut LinearPolynomial) -> Result<(), ParseError> {
        match self.bump() {
            Tok::Num(n) => {
                let n = n * sign;
                if *self.peek() == Tok::Star {
                    self.bump();
                    match self.bump() {
                        Tok::Ident(name) => self.add_var(poly, &name, &n),
                        Tok::Num(_) => {
                            self.pos -= 1;
                            Err(self.err("constant products are not supported"))
                        }
                        _ => {
                            self.pos -= 1;
                            Err(self.err(format!("expected a variable, found {}", self.peek())))
                        }
                    }
                } else if let Tok::Ident(name) = self.peek().clone() {
                    self.bump();
                    self.add_var(poly, &name, &n)
                } else {
                    poly.add_constant(&n);
                    Ok(())
                }
            }
            Tok::Ident(name) => self.add_var(poly, &name, &Int::from(sign)),
            t => {
                self.pos -= usize::from(t != Tok::End);
                Err(self.err(format!("expected a term, found {}", self.peek())))
            }
        }
    }

    fn add_var(
        &mut self,
        poly: &mut LinearPolynomial,
        name: &str,
        c: &Int,
    ) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Star | Tok::Ident(_)) {
            return Err(self.err("non-linear term"));
        }
        let v = self.vars.intern(name);
        poly.add_term(v, c);
        Ok(())
    }

    /// poly := ["-"] term (("+"|"-") term)*
    fn poly(&mut self) -> Result<LinearPolynomial, ParseError> {
        let mut p = LinearPolynomial::zero();
        let mut sign = 1;
        if *self.peek() == Tok::Minus {
            self.bump();
            sign = -1;
        }
        self.term(sign, &mut p)?;
        loop {
            let sign = match self.peek() {
                Tok::Plus => 1,
                Tok::Minus => -1,
                _ => return Ok(p),
            };
            self.bump();
            self.term(sign, &mut p)?;
        }
    }

    fn constraint(&mut self) -> Result<Constraint, ParseError> {
        let skip = usize::from(*self.peek() == Tok::Minus);
        let modulus = match (self.toks.get(skip), self.toks.get(skip + 1)) {
            (Some((Tok::Num(d), _)), Some((Tok::Bar, _))) => Some(d.clone()),
            _ => None,
        };
        if let Some(d) = modulus {
            if d.is_zero() {
                return Err(self.err("zero modulus"));
            }
            self.pos = skip + 2;
            let p = self.poly()?;
            self.expect_end()?;
            return Ok(Constraint::Div(d.abs(), p));
        }
        let lhs = self.poly()?;
        let flip = match self.bump() {
            Tok::Le => false,
            Tok::Ge => true,
            t => {
                self.pos -= usize::from(t != Tok::End);
                return Err(self.err(format!("expected `<=`, found {}", self.peek())));
            }
        };
        let rhs = self.poly()?;
        self.expect_end()?;
        let mut p = lhs;
        p.add_scaled(&rhs, &Int::from(-1));
        Ok(Constraint::Ineq(if flip { p.negated() } else { p }))
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if *self.peek() != Tok::End {
            return Err(self.err(format!("unexpected {}", self.peek())));
        }
        Ok(())
    }
}

fn parse_directive(body: &str, line: usize, d: &mut Directives) -> Result<(), ParseError> {
    let err = |message: String| ParseError {
        line,
        column: 1,
        message,
    };
    let Some((key, value)) = body.split_once(':') else {
        return Err(err("directive needs `key: value`".into()));
    };
    let value = value.trim();
    match key.trim() {
        "order" => d.order = Some(value.split_whitespace().map(str::to_string).collect()),
        "expect" => {
            d.expect = Some(match value {
                "sat" => Expected::Sat,
                "unsat" => Expected::Unsat,
                _ => return Err(err(format!("expected `sat` or `unsat`, found `{value}`"))),
            })
        }
        "budget" => {
            d.budget = Some(
                value
                    .parse()
                    .map_err(|_| err(format!("bad budget `{value}`")))?,
            )
        }
        other => return Err(err(format!("unknown directive `{other}`"))),
    }
    Ok(())
}

/// Parses one constraint per line. `#` starts a comment; `#!` lines are directives.
/// The variable order follows an `order` directive when present (unlisted variables
/// after it), otherwise `policy`; guarded variables are then moved below unguarded ones.
pub fn parse(text: &str, policy: OrderPolicy) -> Result<Parsed, ParseError> {
    let mut vars = VarTable::new();
    let mut directives = Directives::default();
    let mut constraints = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_start();
        if let Some(body) = trimmed.strip_prefix("#!") {
            parse_directive(body, line, &mut directives)?;
            continue;
        }
        let code = raw.split('#').next().unwrap();
        if code.trim().is_empty() {
            continue;
        }
        let toks = tokenize(code, line)?;
        let mut p = LineParser {
            toks,
            pos: 0,
            line,
            vars: &mut vars,
        };
        constraints.push(p.constraint()?);
    }

    let mut seq: Vec<Var> = Vec::new();
    if let Some(names) = &directives.order {
        for n in names {
            let v = vars.intern(n);
            if !seq.contains(&v) {
                seq.push(v);
            }
        }
    }
    let mut rest: Vec<Var> = vars.all().filter(|v| !seq.contains(v)).collect();
    if policy == OrderPolicy::Lexicographic {
        rest.sort_by(|a, b| vars.name(*a).cmp(vars.name(*b)));
    }
    seq.extend(rest);

    let mut problem = Problem::new(vars, VariableOrder::from_ascending(seq));
    for c in constraints {
        problem.add(c);
    }
    problem.repair_order();
    Ok(Parsed {
        problem,
        directives,
    })
}
