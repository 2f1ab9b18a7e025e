//! Edge-condition expression language.
//!
//! Conditions are small boolean expressions over the facts produced by
//! grading a submission (`passed`, `score`, `answer`, `label`, `attempts`,
//! `kind`). The grammar is deliberately tiny:
//!
//! ```text
//! cond       := or
//! or         := and ("||" and)*
//! and        := unary ("&&" unary)*
//! unary      := "!" unary | primary
//! primary    := "(" cond ")" | comparison | term
//! comparison := term op term
//! op         := "==" | "!=" | "<" | "<=" | ">" | ">="
//! term       := IDENT | NUMBER | STRING | "true" | "false"
//! ```
//!
//! Comparisons are non-associative, numbers have no sign or exponent, and
//! strings are double-quoted with `\"` and `\\` as the only escapes.

mod builtin;
mod check;
mod eval;
mod parse;
mod print;

use std::fmt;

use thiserror::Error;

pub use builtin::{builtin_condition, BUILTIN_NAMES};
pub use check::{
    check_types, check_variables, context_type, variables, ValueType, CONTEXT_VARIABLES,
};
pub use eval::{evaluate_condition, Context, EvaluationContext, Value};
pub use parse::{parse_condition, parse_condition_checked};
pub use print::print_condition;

/// A leaf operand.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Bool(bool),
    Num(f64),
    Str(String),
    Var(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Compiled condition tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Term(Term),
    Compare { op: CmpOp, lhs: Term, rhs: Term },
    Not(Box<Condition>),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

impl Condition {
    pub fn var(name: impl Into<String>) -> Self {
        Condition::Term(Term::Var(name.into()))
    }

    pub fn boolean(value: bool) -> Self {
        Condition::Term(Term::Bool(value))
    }

    pub fn compare(op: CmpOp, lhs: Term, rhs: Term) -> Self {
        Condition::Compare { op, lhs, rhs }
    }

    pub fn and(lhs: Condition, rhs: Condition) -> Self {
        Condition::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Condition, rhs: Condition) -> Self {
        Condition::Or(Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Condition) -> Self {
        Condition::Not(Box::new(inner))
    }

    /// True when the condition is the literal `true` (used for shadowing checks).
    pub fn is_always(&self) -> bool {
        matches!(self, Condition::Term(Term::Bool(true)))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_condition(self))
    }
}

impl std::str::FromStr for Condition {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_condition(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    /// `position` is the 1-based character offset; end of input is `len + 1`.
    #[error("syntax error at position {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown builtin condition `{0}`")]
    UnknownBuiltin(String),
    #[error("type mismatch: `{operator}` cannot combine {left} and {right}")]
    TypeMismatch {
        operator: String,
        left: ValueType,
        right: ValueType,
    },
}
