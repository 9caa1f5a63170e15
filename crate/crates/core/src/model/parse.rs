//! Recursive-descent parser for the expression grammar
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' number)?
//! base   := number | 'x' | '(' expr ')' | ('exp' | 'log') '(' expr ')' | '-' factor
//! ```
//!
//! Whitespace is insignificant. The exponent after `^` may carry a sign.
//! Positions in errors are byte offsets into the source.

use super::expr::Expr;
use crate::error::{Error, Result};

pub fn parse_expression(source: &str) -> Result<Expr> {
    let mut p = Parser {
        src: source.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn syntax(&self, msg: impl Into<String>) -> Error {
        Error::Syntax {
            pos: self.pos,
            msg: msg.into(),
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = lhs + self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = lhs * self.factor()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = lhs / self.factor()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let negative = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let p = self.number()?;
            return Ok(base.pow(if negative { -p } else { p }));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expr::Const(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
                match name {
                    "x" => Ok(Expr::Var),
                    "exp" | "log" => {
                        self.expect(b'(')?;
                        let arg = self.expr()?;
                        self.expect(b')')?;
                        Ok(if name == "exp" { arg.exp() } else { arg.ln() })
                    }
                    _ => Err(Error::UnknownIdentifier {
                        pos: start,
                        name: name.to_string(),
                    }),
                }
            }
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.syntax("expected a number"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Syntax {
                pos: start,
                msg: format!("malformed number `{text}`"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weibull_exponent() {
        let e = parse_expression("x^2 - log(x)").unwrap();
        assert_eq!(e, Expr::var().pow(2.0) - Expr::var().ln());
    }

    #[test]
    fn zero_constant() {
        assert_eq!(parse_expression("0").unwrap(), Expr::Const(0.0));
    }

    #[test]
    fn shifted_exponential() {
        let e = parse_expression("exp(x-1)").unwrap();
        assert_eq!(e, (Expr::var() - Expr::constant(1.0)).exp());
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expression("1 - 2 - 3 * x / 4").unwrap();
        assert_eq!(e.eval(2.0).unwrap(), 1.0 - 2.0 - 3.0 * 2.0 / 4.0);
        let e = parse_expression("2 * x^3").unwrap();
        assert_eq!(e.eval(2.0).unwrap(), 16.0);
        let e = parse_expression("x^-5").unwrap();
        assert_eq!(e.eval(2.0).unwrap(), 1.0 / 32.0);
        let e = parse_expression("-x^2").unwrap();
        assert_eq!(e.eval(3.0).unwrap(), -9.0);
    }

    #[test]
    fn scientific_literals() {
        let e = parse_expression("1.5e-3 * x").unwrap();
        assert_eq!(e.eval(2.0).unwrap(), 3e-3);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_expression("x + * 2") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        match parse_expression("exp(x") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expression(""), Err(Error::Syntax { pos: 0, .. })));
        assert!(matches!(parse_expression("x x"), Err(Error::Syntax { pos: 2, .. })));
    }

    #[test]
    fn unknown_identifier() {
        match parse_expression("2 * sin(x)") {
            Err(Error::UnknownIdentifier { pos, name }) => {
                assert_eq!(pos, 4);
                assert_eq!(name, "sin");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn printer_round_trip() {
        for src in ["x^2 - log(x)", "exp(x-1)", "0", "-3.25 * x^-1.5 + x / (x + 2)"] {
            let e = parse_expression(src).unwrap();
            let printed = e.to_string();
            assert_eq!(parse_expression(&printed).unwrap(), e, "{printed}");
        }
    }
}
