//! Syntax tree for calculator scripts: declarations, commands, and the
//! expression language shared by function, morphism, field, and form bodies.

use std::fmt;

use gradedcalc_core::coeffs::Rat;
use serde_json::Value;

/// 1-based source position of a token or node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Arithmetic over coordinates, named functions, and rational literals.
/// Exponents are literal so that `^` never needs runtime degree checks.
#[derive(Debug, Clone)]
pub enum Expr {
    Number(Rat, Span),
    Name(String, Span),
    Neg(Box<Expr>, Span),
    Add(Box<Expr>, Box<Expr>, Span),
    Sub(Box<Expr>, Box<Expr>, Span),
    Mul(Box<Expr>, Box<Expr>, Span),
    Div(Box<Expr>, Box<Expr>, Span),
    Pow(Box<Expr>, u32, Span),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Number(_, s)
            | Expr::Name(_, s)
            | Expr::Neg(_, s)
            | Expr::Add(_, _, s)
            | Expr::Sub(_, _, s)
            | Expr::Mul(_, _, s)
            | Expr::Div(_, _, s)
            | Expr::Pow(_, _, s) => *s,
        }
    }
}

/// One `coordinate -> expression` line in a morphism or field block.
#[derive(Debug, Clone)]
pub struct Rule {
    pub coord: String,
    pub coord_span: Span,
    pub rhs: Expr,
}

/// A named command invocation with optional `with (...)` data and
/// optional `as` result bindings.
#[derive(Debug, Clone)]
pub struct Command {
    pub name: String,
    pub span: Span,
    pub args: Vec<Arg>,
    pub with: Vec<Expr>,
    pub bind: Vec<(String, Span)>,
    /// The statement as written, whitespace-normalized, for echo lines.
    pub raw: String,
}

#[derive(Debug, Clone)]
pub enum Arg {
    Name(String, Span),
    Int(i64, Span),
}

impl Arg {
    pub fn span(&self) -> Span {
        match self {
            Arg::Name(_, s) | Arg::Int(_, s) => *s,
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Name(n, _) => write!(f, "{n}"),
            Arg::Int(v, _) => write!(f, "{v}"),
        }
    }
}

/// A top-level statement. Declarations build the symbol table; commands
/// run after every declaration has been checked.
#[derive(Debug, Clone)]
pub enum Stmt {
    Trunc {
        weight: u32,
        span: Span,
    },
    Domain {
        name: String,
        evens: Vec<String>,
        coords: Vec<(String, i64)>,
        weight: Option<u32>,
        span: Span,
    },
    Fn {
        name: String,
        degree: i64,
        domain: Option<String>,
        body: Expr,
        upto: Option<u32>,
        span: Span,
    },
    Point {
        name: String,
        domain: Option<String>,
        values: Vec<Rat>,
        span: Span,
    },
    Morphism {
        name: String,
        source: String,
        target: String,
        upto: Option<u32>,
        rules: Vec<Rule>,
        span: Span,
    },
    Field {
        name: String,
        degree: i64,
        domain: Option<String>,
        upto: Option<u32>,
        rules: Vec<Rule>,
        span: Span,
    },
    Form {
        name: String,
        p: u32,
        domain: Option<String>,
        body: Expr,
        upto: Option<u32>,
        span: Span,
    },
    Bundle {
        name: String,
        domain: Option<String>,
        descriptor: Value,
        span: Span,
    },
    Atlas {
        name: String,
        descriptor: Value,
        span: Span,
    },
    Global {
        name: String,
        atlas: String,
        descriptor: Value,
        span: Span,
    },
    Command(Command),
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Trunc { span, .. }
            | Stmt::Domain { span, .. }
            | Stmt::Fn { span, .. }
            | Stmt::Point { span, .. }
            | Stmt::Morphism { span, .. }
            | Stmt::Field { span, .. }
            | Stmt::Form { span, .. }
            | Stmt::Bundle { span, .. }
            | Stmt::Atlas { span, .. }
            | Stmt::Global { span, .. } => *span,
            Stmt::Command(c) => c.span,
        }
    }

    pub fn is_command(&self) -> bool {
        matches!(self, Stmt::Command(_))
    }
}

/// Every statement-head keyword and command name. Object and coordinate
/// names may not collide with these, which keeps the grammar LL(1).
pub const RESERVED: &[&str] = &[
    "trunc", "domain", "even", "coord", "fn", "on", "point", "morphism", "field", "form",
    "bundle", "atlas", "global", "as", "with", "upto", "simplify", "mul", "invert", "partial",
    "taylor", "pullback", "compose", "dmat", "rank", "invert-morphism", "bracket", "apply",
    "euler", "related", "d", "ix", "lie", "pullback-form", "primitive", "cocycle", "dual",
    "shift", "pullback-bundle", "ek", "verify-atlas", "check-global",
];

/// The command names `run` accepts, used for head-of-statement dispatch.
pub const COMMANDS: &[&str] = &[
    "simplify", "mul", "invert", "partial", "taylor", "pullback", "compose", "dmat", "rank",
    "invert-morphism", "bracket", "apply", "euler", "related", "d", "ix", "lie",
    "pullback-form", "primitive", "cocycle", "dual", "shift", "pullback-bundle", "ek",
    "verify-atlas", "check-global",
];

pub fn is_reserved(name: &str) -> bool {
    RESERVED.contains(&name)
}

pub fn is_command(name: &str) -> bool {
    COMMANDS.contains(&name)
}
