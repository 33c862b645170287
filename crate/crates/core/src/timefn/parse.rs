//! Recursive-descent parser for time-function expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ['-'] atom ['^' number]
//! atom   := number | 't' | func '(' expr ')' | 'pow' '(' expr ',' number ')' | '(' expr ')'
//! func   := 'exp' | 'sin' | 'cos'
//! ```

use super::TimeFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize)> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                self.pos += 1;
            }
            let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
            return Ok((Tok::Ident(name), start));
        }
        Err(Error::Syntax {
            position: start,
            message: format!("unexpected character {:?}", char::from(c)),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(Error::Syntax {
                position: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent after all (e.g. "2exp"): leave it to the caller
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let v: f64 = text.parse().map_err(|_| Error::Syntax {
            position: start,
            message: format!("malformed number `{text}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::Syntax {
                position: start,
                message: format!("number `{text}` out of range"),
            });
        }
        Ok((Tok::Num(v), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    pos: usize,
    depth: usize,
}

const MAX_DEPTH: usize = 256;

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (tok, pos) = self.lexer.next()?;
        self.tok = tok;
        self.pos = pos;
        Ok(())
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.tok == tok {
            self.bump()
        } else {
            self.err(format!("expected {what}, found {}", describe(&self.tok)))
        }
    }

    fn finite(&self, f: TimeFunction, at: usize) -> Result<TimeFunction> {
        match f {
            TimeFunction::Constant(c) if !c.is_finite() => Err(Error::Syntax {
                position: at,
                message: "expression folds to a non-finite constant".into(),
            }),
            f => Ok(f),
        }
    }

    fn expr(&mut self) -> Result<TimeFunction> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err("expression nested too deeply");
        }
        let mut lhs = self.term()?;
        loop {
            let at = self.pos;
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    let rhs = self.term()?;
                    lhs = self.finite(TimeFunction::add(lhs, rhs), at)?;
                }
                Tok::Minus => {
                    self.bump()?;
                    let rhs = self.term()?;
                    lhs = self.finite(TimeFunction::sub(lhs, rhs), at)?;
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<TimeFunction> {
        let mut lhs = self.factor()?;
        loop {
            let at = self.pos;
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    let rhs = self.factor()?;
                    lhs = self.finite(TimeFunction::mul(lhs, rhs), at)?;
                }
                Tok::Slash => {
                    self.bump()?;
                    let rhs = self.factor()?;
                    if rhs == TimeFunction::Constant(0.0) {
                        return Err(Error::Syntax {
                            position: at,
                            message: "division by zero".into(),
                        });
                    }
                    lhs = self.finite(TimeFunction::div(lhs, rhs), at)?;
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn signed_number(&mut self) -> Result<f64> {
        let neg = if self.tok == Tok::Minus {
            self.bump()?;
            true
        } else {
            false
        };
        match self.tok {
            Tok::Num(v) => {
                self.bump()?;
                Ok(if neg { -v } else { v })
            }
            _ => self.err(format!("expected number, found {}", describe(&self.tok))),
        }
    }

    fn factor(&mut self) -> Result<TimeFunction> {
        let at = self.pos;
        let neg = if self.tok == Tok::Minus {
            self.bump()?;
            true
        } else {
            false
        };
        let mut f = self.atom()?;
        if self.tok == Tok::Caret {
            let caret = self.pos;
            self.bump()?;
            let n = self.signed_number()?;
            f = self.finite(TimeFunction::pow(f, n), caret)?;
        }
        if neg {
            f = TimeFunction::scale(-1.0, f);
        }
        self.finite(f, at)
    }

    fn atom(&mut self) -> Result<TimeFunction> {
        let at = self.pos;
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.bump()?;
                Ok(TimeFunction::Constant(v))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump()?;
                match name.as_str() {
                    "t" => Ok(TimeFunction::t()),
                    "exp" | "sin" | "cos" => {
                        self.expect(Tok::LParen, "`(`")?;
                        let arg = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        let f = match name.as_str() {
                            "exp" => TimeFunction::exp(arg),
                            "sin" => TimeFunction::sin(arg),
                            _ => TimeFunction::cos(arg),
                        };
                        self.finite(f, at)
                    }
                    "pow" => {
                        self.expect(Tok::LParen, "`(`")?;
                        let base = self.expr()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let n = self.signed_number()?;
                        self.expect(Tok::RParen, "`)`")?;
                        self.finite(TimeFunction::pow(base, n), at)
                    }
                    _ => Err(Error::UnknownIdentifier { name, position: at }),
                }
            }
            other => {
                self.tok = other;
                self.err(format!("expected number, `t`, function or `(`, found {}", describe(&self.tok)))
            }
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parse an expression in the time-function grammar.
pub fn parse(source: &str) -> Result<TimeFunction> {
    let mut p = Parser {
        lexer: Lexer {
            src: source.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        pos: 0,
        depth: 0,
    };
    p.bump()?;
    if p.tok == Tok::End {
        return p.err("empty expression");
    }
    let f = p.expr()?;
    if p.tok != Tok::End {
        return p.err(format!("unexpected {}", describe(&p.tok)));
    }
    Ok(f)
}
