//! Recursive-descent parser for the infix field syntax.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | '+' unary | power
//! power  := atom ('^' exponent)?
//! exponent := ['-'|'+'] integer | '(' ['-'|'+'] integer ')'
//! atom   := number | 'i' | x<k> | z<k> | zb<k> | func '(' expr ')' | '(' expr ')'
//! func   := sqrt | log | exp
//! ```

use num_complex::Complex64;

use super::expr::{FieldExpr, Var};
use crate::error::{Error, Result};

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

pub(crate) fn parse_expr(src: &str) -> Result<FieldExpr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: 1,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<FieldExpr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = FieldExpr::Add(lhs.into(), self.term()?.into());
            } else if self.eat(b'-') {
                lhs = FieldExpr::Sub(lhs.into(), self.term()?.into());
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<FieldExpr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = FieldExpr::Mul(lhs.into(), self.unary()?.into());
            } else if self.eat(b'/') {
                lhs = FieldExpr::Div(lhs.into(), self.unary()?.into());
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<FieldExpr> {
        if self.eat(b'-') {
            return Ok(FieldExpr::Neg(self.unary()?.into()));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<FieldExpr> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let paren = self.eat(b'(');
        let negative = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let mut n: i32 = digits
            .parse()
            .map_err(|_| self.error("exponent out of range"))?;
        if negative {
            n = -n;
        }
        if paren {
            self.expect(b')')?;
        }
        Ok(FieldExpr::Pow(base.into(), n))
    }

    fn atom(&mut self) -> Result<FieldExpr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<FieldExpr> {
        let start = self.pos;
        let mut seen_exp = false;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let sign_after_exp = (c == b'-' || c == b'+')
                && seen_exp
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || sign_after_exp {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && !seen_exp {
                seen_exp = true;
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            line: 1,
            column: start + 1,
            message: format!("invalid number `{text}`"),
        })?;
        Ok(FieldExpr::real(value))
    }

    fn identifier(&mut self) -> Result<FieldExpr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        let bad = |msg: String| Error::Parse {
            line: 1,
            column: start + 1,
            message: msg,
        };
        match name {
            "i" => return Ok(FieldExpr::complex(Complex64::new(0.0, 1.0))),
            "sqrt" | "log" | "exp" => {
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                return Ok(match name {
                    "sqrt" => FieldExpr::Sqrt(arg.into()),
                    "log" => FieldExpr::Log(arg.into()),
                    _ => FieldExpr::Exp(arg.into()),
                });
            }
            _ => {}
        }
        let (prefix, digits) = name
            .find(|c: char| c.is_ascii_digit())
            .map(|i| name.split_at(i))
            .ok_or_else(|| bad(format!("unknown identifier `{name}`")))?;
        let k: usize = digits
            .parse()
            .map_err(|_| bad(format!("unknown identifier `{name}`")))?;
        if k == 0 {
            return Err(bad(format!("indices start at 1 in `{name}`")));
        }
        let var = match prefix {
            "x" => Var::X(k - 1),
            "z" => Var::Z(k - 1),
            "zb" => Var::Zbar(k - 1),
            _ => return Err(bad(format!("unknown identifier `{name}`"))),
        };
        Ok(FieldExpr::Var(var))
    }
}
