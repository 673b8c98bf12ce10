//! Recursive-descent parser for the expression grammar
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | atom ('^' exponent)?
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! ident  := 'x' | 'u' digits?
//! ```
//!
//! Precedence is `^` > unary `-` > `*` `/` > `+` `-`, left-associative
//! within a level.  An exponent is a signed integer, a decimal, or a
//! parenthesised rational such as `(1/2)`; `u1^2/3` therefore parses as
//! `(u1^2)/3`.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::Num;
use thiserror::Error;

use super::{Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {}", expected.join(" or "))]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown variable `{name}` at byte {offset}: jet coordinates are x, u, u1, u2, ...")]
    UnknownVariable { name: String, offset: usize },
    #[error("unknown function `{name}` at byte {offset}: available are sin, cos, exp, ln, sqrt")]
    UnknownFunction { name: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(_) => "number".into(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                toks.push((i, Tok::Plus));
                i += 1;
            }
            b'-' => {
                toks.push((i, Tok::Minus));
                i += 1;
            }
            b'*' => {
                toks.push((i, Tok::Star));
                i += 1;
            }
            b'/' => {
                toks.push((i, Tok::Slash));
                i += 1;
            }
            b'^' => {
                toks.push((i, Tok::Caret));
                i += 1;
            }
            b'(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let mut frac_digits = 0usize;
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let fs = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    frac_digits = i - fs;
                }
                let lit = &text[start..i];
                if lit == "." || lit.is_empty() {
                    return Err(ParseError::Syntax {
                        offset: start,
                        expected: vec!["number".into()],
                    });
                }
                let digits: String = lit.chars().filter(|c| *c != '.').collect();
                let num = BigInt::from_str_radix(&digits, 10).map_err(|_| ParseError::Syntax {
                    offset: start,
                    expected: vec!["number".into()],
                })?;
                let den = BigInt::from(10).pow(frac_digits as u32);
                toks.push((start, Tok::Num(BigRational::new(num, den))));
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                    i += 1;
                }
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                toks.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: i,
                    expected: vec!["number".into(), "identifier".into(), "operator".into()],
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ParseError::Syntax {
                offset: self.offset(),
                expected: vec![want.describe()],
            }),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Add(lhs.into(), rhs.into());
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Sub(lhs.into(), rhs.into());
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Mul(lhs.into(), rhs.into());
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Div(lhs.into(), rhs.into());
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.pos += 1;
            let inner = self.parse_factor()?;
            return Ok(Expr::Neg(inner.into()));
        }
        let atom = self.parse_atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.pos += 1;
            let exp = self.parse_exponent()?;
            return Ok(Expr::Pow(atom.into(), exp));
        }
        Ok(atom)
    }

    fn parse_exponent(&mut self) -> Result<BigRational, ParseError> {
        let mut neg = false;
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.pos += 1;
            neg = true;
        }
        let r = match self.bump() {
            Some(Tok::Num(r)) => r,
            Some(Tok::LParen) => {
                let mut inner_neg = false;
                if matches!(self.peek(), Some(Tok::Minus)) {
                    self.pos += 1;
                    inner_neg = true;
                }
                let num = match self.bump() {
                    Some(Tok::Num(r)) => r,
                    _ => {
                        return Err(ParseError::Syntax {
                            offset: self.offset(),
                            expected: vec!["number".into()],
                        })
                    }
                };
                let r = if matches!(self.peek(), Some(Tok::Slash)) {
                    self.pos += 1;
                    match self.bump() {
                        Some(Tok::Num(d)) if !num::Zero::is_zero(&d) => num / d,
                        _ => {
                            return Err(ParseError::Syntax {
                                offset: self.offset(),
                                expected: vec!["nonzero number".into()],
                            })
                        }
                    }
                } else {
                    num
                };
                self.expect(&Tok::RParen)?;
                if inner_neg {
                    -r
                } else {
                    r
                }
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: self.offset(),
                    expected: vec!["exponent".into()],
                })
            }
        };
        Ok(if neg { -r } else { r })
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Num(r)) => Ok(Expr::Const(r)),
            Some(Tok::LParen) => {
                let e = self.parse_expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    let f = Func::from_name(&name)
                        .ok_or(ParseError::UnknownFunction { name, offset })?;
                    self.pos += 1;
                    let arg = self.parse_expr()?;
                    self.expect(&Tok::RParen)?;
                    return Ok(Expr::func(f, arg));
                }
                ident_to_var(&name)
                    .map(Expr::Var)
                    .ok_or(ParseError::UnknownVariable { name, offset })
            }
            _ => Err(ParseError::Syntax {
                offset,
                expected: vec![
                    "number".into(),
                    "identifier".into(),
                    "`(`".into(),
                    "`-`".into(),
                ],
            }),
        }
    }
}

fn ident_to_var(name: &str) -> Option<Var> {
    if name == "x" {
        return Some(Var::X);
    }
    if let Some(rest) = name.strip_prefix('u') {
        if rest.is_empty() {
            return Some(Var::U(0));
        }
        if rest.chars().all(|c| c.is_ascii_digit()) && rest.len() <= 3 {
            return rest.parse().ok().map(Var::U);
        }
    }
    None
}

/// Parses an expression in the jet coordinates `x, u, u1, u2, ...`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: text.len(),
    };
    let e = p.parse_expr()?;
    if p.pos != toks.len() {
        return Err(ParseError::Syntax {
            offset: p.offset(),
            expected: vec!["end of input".into(), "operator".into()],
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::rc::Rc;

    #[test]
    fn single_token() {
        assert_eq!(parse("x").unwrap(), Expr::Var(Var::X));
        assert_eq!(parse("u").unwrap(), Expr::Var(Var::U(0)));
        assert_eq!(parse("u0").unwrap(), Expr::Var(Var::U(0)));
        assert_eq!(parse("u3").unwrap(), Expr::Var(Var::U(3)));
    }

    #[test]
    fn precedence_forced_shape() {
        // (u1^2 + x) - 1/4
        let e = parse("u1^2 + x - 1/4").unwrap();
        let inner = Expr::Add(
            Rc::new(Expr::Pow(Rc::new(Expr::u(1)), num::BigRational::from_integer(2.into()))),
            Rc::new(Expr::x()),
        );
        let quarter = Expr::Div(Rc::new(Expr::int(1)), Rc::new(Expr::int(4)));
        assert_eq!(e, Expr::Sub(Rc::new(inner), Rc::new(quarter)));
    }

    #[test]
    fn unary_minus_binds_looser_than_pow() {
        let e = parse("-x^2").unwrap();
        assert!(matches!(e, Expr::Neg(_)));
    }

    #[test]
    fn pow_beats_division() {
        // u1^2/3 is (u1^2)/3
        let e = parse("u1^2/3").unwrap();
        assert!(matches!(e, Expr::Div(..)));
    }

    #[test]
    fn rational_exponent_parenthesised() {
        let e = parse("x^(3/2)").unwrap();
        match e {
            Expr::Pow(_, r) => assert_eq!(r, num::BigRational::new(3.into(), 2.into())),
            other => panic!("expected Pow, got {other:?}"),
        }
    }

    #[test]
    fn error_reporting() {
        match parse("x + ") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(parse("y + 1"), Err(ParseError::UnknownVariable { .. })));
        assert!(matches!(parse("tan(x)"), Err(ParseError::UnknownFunction { .. })));
        assert!(matches!(parse("u12345"), Err(ParseError::UnknownVariable { .. })));
    }

    #[test]
    fn whitespace_insignificant() {
        assert_eq!(parse(" u *( u1 )^2 +x ").unwrap(), parse("u*(u1)^2+x").unwrap());
    }
}
