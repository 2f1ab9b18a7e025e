use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CmpOp, Condition, ConditionError, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Boolean,
    Number,
    String,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Boolean => "boolean",
            ValueType::Number => "number",
            ValueType::String => "string",
        })
    }
}

/// The variables every evaluation context provides, with their types.
pub const CONTEXT_VARIABLES: [(&str, ValueType); 6] = [
    ("passed", ValueType::Boolean),
    ("score", ValueType::Number),
    ("answer", ValueType::String),
    ("label", ValueType::String),
    ("attempts", ValueType::Number),
    ("kind", ValueType::String),
];

/// Type of a standard context variable.
pub fn context_type(name: &str) -> Option<ValueType> {
    CONTEXT_VARIABLES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
}

/// Every variable name referenced by the condition, sorted.
pub fn variables(condition: &Condition) -> BTreeSet<String> {
    fn term(t: &Term, out: &mut BTreeSet<String>) {
        if let Term::Var(name) = t {
            out.insert(name.clone());
        }
    }
    fn walk(c: &Condition, out: &mut BTreeSet<String>) {
        match c {
            Condition::Term(t) => term(t, out),
            Condition::Compare { lhs, rhs, .. } => {
                term(lhs, out);
                term(rhs, out);
            }
            Condition::Not(inner) => walk(inner, out),
            Condition::And(l, r) | Condition::Or(l, r) => {
                walk(l, out);
                walk(r, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(condition, &mut out);
    out
}

/// Fails on the first (lexicographically smallest) undeclared variable.
pub fn check_variables(
    condition: &Condition,
    declared: &BTreeSet<String>,
) -> Result<(), ConditionError> {
    match variables(condition).into_iter().find(|v| !declared.contains(v)) {
        Some(unknown) => Err(ConditionError::UnknownVariable(unknown)),
        None => Ok(()),
    }
}

/// Static type check. Variables whose type `lookup` does not know are
/// treated as compatible with anything.
pub fn check_types(
    condition: &Condition,
    lookup: &dyn Fn(&str) -> Option<ValueType>,
) -> Result<(), ConditionError> {
    let term_type = |t: &Term| match t {
        Term::Bool(_) => Some(ValueType::Boolean),
        Term::Num(_) => Some(ValueType::Number),
        Term::Str(_) => Some(ValueType::String),
        Term::Var(name) => lookup(name),
    };
    match condition {
        Condition::Term(t) => match term_type(t) {
            Some(ty) if ty != ValueType::Boolean => Err(ConditionError::TypeMismatch {
                operator: "condition".into(),
                left: ty,
                right: ValueType::Boolean,
            }),
            _ => Ok(()),
        },
        Condition::Compare { op, lhs, rhs } => match (term_type(lhs), term_type(rhs)) {
            (Some(l), Some(r)) => comparable(*op, l, r),
            _ => Ok(()),
        },
        Condition::Not(inner) => check_types(inner, lookup),
        Condition::And(l, r) | Condition::Or(l, r) => {
            check_types(l, lookup)?;
            check_types(r, lookup)
        }
    }
}

pub(crate) fn comparable(op: CmpOp, left: ValueType, right: ValueType) -> Result<(), ConditionError> {
    let ordered = !matches!(op, CmpOp::Eq | CmpOp::Ne);
    if left != right || (ordered && left == ValueType::Boolean) {
        return Err(ConditionError::TypeMismatch {
            operator: op.symbol().into(),
            left,
            right,
        });
    }
    Ok(())
}
