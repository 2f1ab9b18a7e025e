use std::collections::BTreeSet;

use super::check::check_variables;
use super::{CmpOp, Condition, ConditionError, Term};

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    LParen,
    RParen,
    Bang,
    AndAnd,
    OrOr,
    Op(CmpOp),
    Ident(String),
    Number(f64),
    Str(String),
    True,
    False,
    Eof,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Bang => "`!`".into(),
            Token::AndAnd => "`&&`".into(),
            Token::OrOr => "`||`".into(),
            Token::Op(op) => format!("`{}`", op.symbol()),
            Token::Ident(name) => format!("identifier `{name}`"),
            Token::Number(_) => "number".into(),
            Token::Str(_) => "string".into(),
            Token::True | Token::False => "boolean".into(),
            Token::Eof => "end of input".into(),
        }
    }
}

fn syntax(position: usize, expected: impl Into<String>) -> ConditionError {
    ConditionError::Syntax {
        position,
        expected: expected.into(),
    }
}

fn lex(source: &str) -> Result<Vec<(Token, usize)>, ConditionError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (token, width) = match c {
            '(' => (Token::LParen, 1),
            ')' => (Token::RParen, 1),
            '!' if next == Some('=') => (Token::Op(CmpOp::Ne), 2),
            '!' => (Token::Bang, 1),
            '&' if next == Some('&') => (Token::AndAnd, 2),
            '|' if next == Some('|') => (Token::OrOr, 2),
            '=' if next == Some('=') => (Token::Op(CmpOp::Eq), 2),
            '<' if next == Some('=') => (Token::Op(CmpOp::Le), 2),
            '<' => (Token::Op(CmpOp::Lt), 1),
            '>' if next == Some('=') => (Token::Op(CmpOp::Ge), 2),
            '>' => (Token::Op(CmpOp::Gt), 1),
            '&' => return Err(syntax(pos + 1, "`&&`")),
            '|' => return Err(syntax(pos + 1, "`||`")),
            '=' => return Err(syntax(pos + 1, "`==`")),
            '"' => {
                let mut text = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None => return Err(syntax(j + 1, "closing `\"`")),
                        Some('"') => break,
                        Some('\\') => match chars.get(j + 1) {
                            Some(&e @ ('"' | '\\')) => {
                                text.push(e);
                                j += 2;
                            }
                            _ => return Err(syntax(j + 2, "`\\\"` or `\\\\` escape")),
                        },
                        Some(&other) => {
                            text.push(other);
                            j += 1;
                        }
                    }
                }
                (Token::Str(text), j + 1 - i)
            }
            d if d.is_ascii_digit() => {
                let mut j = i;
                while chars.get(j).is_some_and(char::is_ascii_digit) {
                    j += 1;
                }
                if chars.get(j) == Some(&'.') {
                    j += 1;
                    if !chars.get(j).is_some_and(char::is_ascii_digit) {
                        return Err(syntax(j + 1, "digit after decimal point"));
                    }
                    while chars.get(j).is_some_and(char::is_ascii_digit) {
                        j += 1;
                    }
                }
                let text: String = chars[i..j].iter().collect();
                let value: f64 = text.parse().map_err(|_| syntax(pos, "number"))?;
                if !value.is_finite() {
                    return Err(syntax(pos, "number within range"));
                }
                (Token::Number(value), j - i)
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut j = i;
                while chars
                    .get(j)
                    .is_some_and(|ch| ch.is_ascii_alphanumeric() || *ch == '_')
                {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                let token = match word.as_str() {
                    "true" => Token::True,
                    "false" => Token::False,
                    _ => Token::Ident(word),
                };
                (token, j - i)
            }
            _ => return Err(syntax(pos, "a token")),
        };
        tokens.push((token, pos));
        i += width;
    }
    tokens.push((Token::Eof, chars.len() + 1));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    cursor: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.cursor].0
    }

    fn position(&self) -> usize {
        self.tokens[self.cursor].1
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.cursor].0.clone();
        if self.cursor + 1 < self.tokens.len() {
            self.cursor += 1;
        }
        token
    }

    fn enter(&mut self) -> Result<(), ConditionError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(syntax(self.position(), "shallower nesting"));
        }
        Ok(())
    }

    fn or(&mut self) -> Result<Condition, ConditionError> {
        self.enter()?;
        let mut lhs = self.and()?;
        while *self.peek() == Token::OrOr {
            self.advance();
            let rhs = self.and()?;
            lhs = Condition::or(lhs, rhs);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Condition, ConditionError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Token::AndAnd {
            self.advance();
            let rhs = self.unary()?;
            lhs = Condition::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Condition, ConditionError> {
        if *self.peek() == Token::Bang {
            self.advance();
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Condition::not(inner));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Condition, ConditionError> {
        if *self.peek() == Token::LParen {
            self.advance();
            let inner = self.or()?;
            if *self.peek() != Token::RParen {
                return Err(syntax(self.position(), "`)`"));
            }
            self.advance();
            return Ok(inner);
        }
        let lhs = self.term()?;
        if let Token::Op(op) = *self.peek() {
            self.advance();
            let rhs = self.term()?;
            if let Token::Op(_) = self.peek() {
                return Err(syntax(
                    self.position(),
                    "`&&`, `||`, `)` or end of input (comparisons do not chain)",
                ));
            }
            return Ok(Condition::Compare { op, lhs, rhs });
        }
        Ok(Condition::Term(lhs))
    }

    fn term(&mut self) -> Result<Term, ConditionError> {
        let position = self.position();
        match self.advance() {
            Token::Ident(name) => Ok(Term::Var(name)),
            Token::Number(n) => Ok(Term::Num(n)),
            Token::Str(s) => Ok(Term::Str(s)),
            Token::True => Ok(Term::Bool(true)),
            Token::False => Ok(Term::Bool(false)),
            other => Err(syntax(
                position,
                format!("identifier, number, string or boolean (found {})", other.describe()),
            )),
        }
    }
}

/// Parses condition source text into an AST.
pub fn parse_condition(source: &str) -> Result<Condition, ConditionError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        depth: 0,
    };
    let condition = parser.or()?;
    if *parser.peek() != Token::Eof {
        return Err(syntax(parser.position(), "`&&`, `||` or end of input"));
    }
    Ok(condition)
}

/// Parses and rejects references to variables outside `variables`.
pub fn parse_condition_checked(
    source: &str,
    variables: &BTreeSet<String>,
) -> Result<Condition, ConditionError> {
    let condition = parse_condition(source)?;
    check_variables(&condition, variables)?;
    Ok(condition)
}
