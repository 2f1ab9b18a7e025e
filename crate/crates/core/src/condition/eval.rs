use serde::{Deserialize, Serialize};

use super::check::comparable;
use super::{CmpOp, Condition, ConditionError, Term, ValueType};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Num(f64),
    Str(String),
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Bool(_) => ValueType::Boolean,
            Value::Num(_) => ValueType::Number,
            Value::Str(_) => ValueType::String,
        }
    }
}

/// Variable lookup used by the evaluator.
pub trait Context {
    fn lookup(&self, name: &str) -> Option<Value>;
}

/// Facts about the latest graded submission that edge conditions read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationContext {
    pub passed: bool,
    pub score: f64,
    pub answer: String,
    pub label: String,
    pub attempts: u32,
    pub kind: String,
}

impl Context for EvaluationContext {
    fn lookup(&self, name: &str) -> Option<Value> {
        Some(match name {
            "passed" => Value::Bool(self.passed),
            "score" => Value::Num(self.score),
            "answer" => Value::Str(self.answer.clone()),
            "label" => Value::Str(self.label.clone()),
            "attempts" => Value::Num(f64::from(self.attempts)),
            "kind" => Value::Str(self.kind.clone()),
            _ => return None,
        })
    }
}

fn resolve(term: &Term, ctx: &dyn Context) -> Result<Value, ConditionError> {
    Ok(match term {
        Term::Bool(b) => Value::Bool(*b),
        Term::Num(n) => Value::Num(*n),
        Term::Str(s) => Value::Str(s.clone()),
        Term::Var(name) => ctx
            .lookup(name)
            .ok_or_else(|| ConditionError::UnknownVariable(name.clone()))?,
    })
}

fn compare(op: CmpOp, lhs: Value, rhs: Value) -> Result<bool, ConditionError> {
    comparable(op, lhs.value_type(), rhs.value_type())?;
    let ordering = match (&lhs, &rhs) {
        (Value::Num(a), Value::Num(b)) => a.partial_cmp(b),
        (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
        (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
        _ => unreachable!("operand types checked above"),
    };
    let Some(ordering) = ordering else {
        // NaN compares unequal to everything.
        return Ok(op == CmpOp::Ne);
    };
    Ok(match op {
        CmpOp::Eq => ordering.is_eq(),
        CmpOp::Ne => ordering.is_ne(),
        CmpOp::Lt => ordering.is_lt(),
        CmpOp::Le => ordering.is_le(),
        CmpOp::Gt => ordering.is_gt(),
        CmpOp::Ge => ordering.is_ge(),
    })
}

/// Strictly typed evaluation with short-circuiting `&&` and `||`.
pub fn evaluate_condition(
    condition: &Condition,
    ctx: &dyn Context,
) -> Result<bool, ConditionError> {
    match condition {
        Condition::Term(term) => match resolve(term, ctx)? {
            Value::Bool(b) => Ok(b),
            other => Err(ConditionError::TypeMismatch {
                operator: "condition".into(),
                left: other.value_type(),
                right: ValueType::Boolean,
            }),
        },
        Condition::Compare { op, lhs, rhs } => {
            let lhs = resolve(lhs, ctx)?;
            let rhs = resolve(rhs, ctx)?;
            compare(*op, lhs, rhs)
        }
        Condition::Not(inner) => Ok(!evaluate_condition(inner, ctx)?),
        Condition::And(lhs, rhs) => {
            Ok(evaluate_condition(lhs, ctx)? && evaluate_condition(rhs, ctx)?)
        }
        Condition::Or(lhs, rhs) => {
            Ok(evaluate_condition(lhs, ctx)? || evaluate_condition(rhs, ctx)?)
        }
    }
}
