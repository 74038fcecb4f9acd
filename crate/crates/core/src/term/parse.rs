//! Reader for the s-expression term grammar:
//!
//! ```text
//! ATOM := x<digits> | INT | (/ INT INT)
//! EXPR := ATOM | (+ EXPR EXPR+) | (* EXPR EXPR+) | (- EXPR EXPR) | (- EXPR)
//!       | (^ EXPR NAT) | (<name> EXPR ...)
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{BasicRegistry, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown function `{name}` at byte {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("exponent at byte {pos} is not a natural number")]
    NonNaturalExponent { pos: usize },
    #[error("`{name}` at byte {pos} takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        pos: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok<'_>)>, ParseError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if !c.is_ascii() {
            return Err(ParseError::Syntax {
                pos: i,
                message: "non-ASCII input".into(),
            });
        }
        match c {
            b'(' => {
                out.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                out.push((start, Tok::Atom(&src[start..i])));
            }
        }
    }
    Ok(out)
}

/// Parses with the shipped registry.
pub fn parse(src: &str) -> Result<Term, ParseError> {
    parse_with(&BasicRegistry::standard(), src)
}

pub fn parse_with(registry: &BasicRegistry, src: &str) -> Result<Term, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        at: 0,
        registry,
        end: src.len(),
    };
    let t = p.expr()?;
    if let Some((pos, _)) = p.toks.get(p.at) {
        return Err(ParseError::Syntax {
            pos: *pos,
            message: "trailing input".into(),
        });
    }
    Ok(t)
}

struct Parser<'a, 'r> {
    toks: Vec<(usize, Tok<'a>)>,
    at: usize,
    registry: &'r BasicRegistry,
    end: usize,
}

fn parse_int(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl<'a, 'r> Parser<'a, 'r> {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.0).unwrap_or(self.end)
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Close) => {
                self.at += 1;
                Ok(())
            }
            _ => Err(self.syntax("expected `)`")),
        }
    }

    fn expr(&mut self) -> Result<Term, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            None => Err(self.syntax("unexpected end of input")),
            Some(Tok::Close) => Err(self.syntax("unexpected `)`")),
            Some(Tok::Atom(a)) => {
                self.at += 1;
                atom(a, pos)
            }
            Some(Tok::Open) => {
                self.at += 1;
                let head = match self.peek().cloned() {
                    Some(Tok::Atom(h)) => h,
                    _ => return Err(self.syntax("expected an operator")),
                };
                self.at += 1;
                let t = self.form(head, pos)?;
                self.expect_close()?;
                Ok(t)
            }
        }
    }

    fn args_until_close(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut args = Vec::new();
        while !matches!(self.peek(), Some(Tok::Close) | None) {
            args.push(self.expr()?);
        }
        Ok(args)
    }

    fn form(&mut self, head: &'a str, pos: usize) -> Result<Term, ParseError> {
        match head {
            "/" => {
                let mut ints = Vec::new();
                for _ in 0..2 {
                    match self.peek().cloned() {
                        Some(Tok::Atom(a)) => match parse_int(a) {
                            Some(v) => {
                                ints.push(v);
                                self.at += 1;
                            }
                            None => return Err(self.syntax("`/` takes two integers")),
                        },
                        _ => return Err(self.syntax("`/` takes two integers")),
                    }
                }
                if ints[1].is_zero() {
                    return Err(ParseError::Syntax {
                        pos,
                        message: "zero denominator".into(),
                    });
                }
                let d = ints.pop().unwrap();
                let n = ints.pop().unwrap();
                Ok(Term::constant(BigRational::new(n, d)))
            }
            "+" | "*" => {
                let args = self.args_until_close()?;
                if args.len() < 2 {
                    return Err(self.syntax(&format!("`{head}` takes at least two operands")));
                }
                Ok(if head == "+" {
                    Term::sum(args)
                } else {
                    Term::product(args)
                })
            }
            "-" => {
                let args = self.args_until_close()?;
                match args.len() {
                    1 => Ok(-&args[0]),
                    2 => Ok(&args[0] - &args[1]),
                    _ => Err(self.syntax("`-` takes one or two operands")),
                }
            }
            "^" => {
                let base = self.expr()?;
                let epos = self.pos();
                let e = match self.peek().cloned() {
                    Some(Tok::Atom(a)) if a.bytes().all(|b| b.is_ascii_digit()) => {
                        a.parse::<u32>().map_err(|_| ParseError::NonNaturalExponent { pos: epos })?
                    }
                    Some(Tok::Atom(_)) | Some(Tok::Open) => {
                        return Err(ParseError::NonNaturalExponent { pos: epos })
                    }
                    _ => return Err(self.syntax("`^` takes a base and an exponent")),
                };
                self.at += 1;
                Ok(base.pow(e))
            }
            name => {
                let basic = self
                    .registry
                    .get(name)
                    .cloned()
                    .ok_or_else(|| ParseError::UnknownFunction {
                        name: name.to_string(),
                        pos,
                    })?;
                let args = self.args_until_close()?;
                if args.len() != basic.arity {
                    return Err(ParseError::Arity {
                        name: name.to_string(),
                        pos,
                        expected: basic.arity,
                        got: args.len(),
                    });
                }
                Ok(Term::apply(basic, args))
            }
        }
    }
}

fn atom(a: &str, pos: usize) -> Result<Term, ParseError> {
    if let Some(digits) = a.strip_prefix('x') {
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            return match digits.parse::<usize>() {
                Ok(j) if j >= 1 => Ok(Term::var(j)),
                _ => Err(ParseError::Syntax {
                    pos,
                    message: format!("invalid variable `{a}` (indices start at 1)"),
                }),
            };
        }
    }
    match parse_int(a) {
        Some(v) => Ok(Term::constant(BigRational::from_integer(v))),
        None => Err(ParseError::Syntax {
            pos,
            message: format!("unrecognized atom `{a}`"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        let t = parse("(- x2 (exp x1))").unwrap();
        assert_eq!(t.arity(), 2);
        assert_eq!(parse("(^ x1 3)").unwrap(), Term::var(1).pow(3));
    }

    #[test]
    fn rational_exponent_rejected() {
        assert!(matches!(
            parse("(^ x1 (/ 3 2))"),
            Err(ParseError::NonNaturalExponent { pos: 6 })
        ));
        assert!(matches!(
            parse("(^ x1 -1)"),
            Err(ParseError::NonNaturalExponent { .. })
        ));
    }

    #[test]
    fn unknown_function() {
        assert!(matches!(
            parse("(sin x1)"),
            Err(ParseError::UnknownFunction { pos: 0, .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert!(matches!(parse("(+ x1"), Err(ParseError::Syntax { pos: 5, .. })));
        assert!(matches!(parse("x1 x2"), Err(ParseError::Syntax { pos: 3, .. })));
        assert!(matches!(parse("(+ x1)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("x0"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("(/ 1 0)"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn printing_round_trips() {
        for src in [
            "(- x2 (exp x1))",
            "(+ (* (/ 3 2) x1 x2) (^ (+ x1 1) 3) (/ -1 7))",
            "(exp (- (* 2 x3)))",
        ] {
            let t = parse(src).unwrap();
            assert_eq!(parse(&t.to_string()).unwrap(), t);
        }
    }
}
