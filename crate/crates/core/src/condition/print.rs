use std::fmt::Write;

use super::{Condition, Term};

// Binding strength: higher binds tighter.
const OR: u8 = 1;
const AND: u8 = 2;
const NOT: u8 = 3;
const ATOM: u8 = 4;

fn strength(condition: &Condition) -> u8 {
    match condition {
        Condition::Or(..) => OR,
        Condition::And(..) => AND,
        Condition::Not(_) => NOT,
        Condition::Term(_) | Condition::Compare { .. } => ATOM,
    }
}

/// Renders a condition with the minimum parentheses needed to reparse to the
/// same tree.
///
/// Numbers print in Rust's shortest round-trip form, which never uses an
/// exponent. Negative or non-finite numbers have no source form and are
/// printed as-is.
pub fn print_condition(condition: &Condition) -> String {
    let mut out = String::new();
    write_at(condition, OR, &mut out);
    out
}

fn write_at(condition: &Condition, min: u8, out: &mut String) {
    if strength(condition) < min {
        out.push('(');
        write_bare(condition, out);
        out.push(')');
    } else {
        write_bare(condition, out);
    }
}

fn write_bare(condition: &Condition, out: &mut String) {
    match condition {
        Condition::Or(lhs, rhs) => {
            write_at(lhs, OR, out);
            out.push_str(" || ");
            write_at(rhs, AND, out);
        }
        Condition::And(lhs, rhs) => {
            write_at(lhs, AND, out);
            out.push_str(" && ");
            write_at(rhs, NOT, out);
        }
        Condition::Not(inner) => {
            out.push('!');
            write_at(inner, NOT, out);
        }
        Condition::Compare { op, lhs, rhs } => {
            write_term(lhs, out);
            let _ = write!(out, " {} ", op.symbol());
            write_term(rhs, out);
        }
        Condition::Term(term) => write_term(term, out),
    }
}

fn write_term(term: &Term, out: &mut String) {
    match term {
        Term::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Term::Num(n) => {
            let _ = write!(out, "{n}");
        }
        Term::Var(name) => out.push_str(name),
        Term::Str(s) => {
            out.push('"');
            for c in s.chars() {
                if c == '"' || c == '\\' {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push('"');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_condition, CmpOp};
    use super::*;

    #[test]
    fn precedence_forces_parens() {
        let c = Condition::and(
            Condition::var("passed"),
            Condition::or(Condition::var("passed"), Condition::boolean(false)),
        );
        assert_eq!(print_condition(&c), "passed && (passed || false)");
    }

    #[test]
    fn canonical_numbers() {
        let c = Condition::compare(CmpOp::Ge, Term::Var("score".into()), Term::Num(0.8));
        assert_eq!(print_condition(&c), "score >= 0.8");
        let c = Condition::compare(CmpOp::Ge, Term::Var("attempts".into()), Term::Num(3.0));
        assert_eq!(print_condition(&c), "attempts >= 3");
        let c = Condition::compare(CmpOp::Lt, Term::Var("score".into()), Term::Num(1e-7));
        assert_eq!(parse_condition(&print_condition(&c)).unwrap(), c);
    }

    #[test]
    fn right_nested_same_operator_keeps_parens() {
        let c = Condition::and(
            Condition::var("a"),
            Condition::and(Condition::var("b"), Condition::var("c")),
        );
        assert_eq!(print_condition(&c), "a && (b && c)");
        assert_eq!(parse_condition("a && (b && c)").unwrap(), c);
        let left = parse_condition("a && b && c").unwrap();
        assert_eq!(print_condition(&left), "a && b && c");
    }

    #[test]
    fn negation_forms() {
        let c = Condition::not(Condition::or(Condition::var("a"), Condition::var("b")));
        assert_eq!(print_condition(&c), "!(a || b)");
        let c = Condition::not(Condition::not(Condition::var("a")));
        assert_eq!(print_condition(&c), "!!a");
    }

    #[test]
    fn escapes_strings() {
        let c = Condition::compare(
            CmpOp::Eq,
            Term::Var("answer".into()),
            Term::Str("say \"hi\" \\o/".into()),
        );
        let printed = print_condition(&c);
        assert_eq!(printed, r#"answer == "say \"hi\" \\o/""#);
        assert_eq!(parse_condition(&printed).unwrap(), c);
    }
}
