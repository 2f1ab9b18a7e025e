use super::{CmpOp, Condition, ConditionError, Term};

/// Names offered to authors as ready-made link conditions.
/// `retry_exceeded` takes a non-negative integer argument: `retry_exceeded(3)`.
pub const BUILTIN_NAMES: [&str; 4] = ["pass", "fail", "always", "retry_exceeded(n)"];

/// Expands a builtin name into its condition tree.
pub fn builtin_condition(name: &str) -> Result<Condition, ConditionError> {
    let passed_is = |b| Condition::compare(CmpOp::Eq, Term::Var("passed".into()), Term::Bool(b));
    match name.trim() {
        "pass" => Ok(passed_is(true)),
        "fail" => Ok(passed_is(false)),
        "always" => Ok(Condition::boolean(true)),
        other => other
            .strip_prefix("retry_exceeded(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|n| n.trim().parse::<u32>().ok())
            .map(|n| {
                Condition::compare(
                    CmpOp::Ge,
                    Term::Var("attempts".into()),
                    Term::Num(f64::from(n)),
                )
            })
            .ok_or_else(|| ConditionError::UnknownBuiltin(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansions() {
        assert_eq!(
            builtin_condition("pass").unwrap(),
            Condition::compare(CmpOp::Eq, Term::Var("passed".into()), Term::Bool(true))
        );
        assert_eq!(
            builtin_condition("fail").unwrap().to_string(),
            "passed == false"
        );
        assert_eq!(builtin_condition("always").unwrap(), Condition::boolean(true));
        assert_eq!(
            builtin_condition("retry_exceeded(3)").unwrap().to_string(),
            "attempts >= 3"
        );
    }

    #[test]
    fn unknown_names() {
        for name in ["perfect", "retry_exceeded", "retry_exceeded(-1)", "retry_exceeded(x)"] {
            assert_eq!(
                builtin_condition(name),
                Err(ConditionError::UnknownBuiltin(name.into()))
            );
        }
    }
}
