//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | factor
//! factor := base ('^' uint)?
//! base   := number | ident | '(' expr ')' | func '(' expr ')'
//! ```
//!
//! A rational literal `p/q` is recognized only when the slash directly
//! follows the digits of an integer and is directly followed by digits.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{BinOp, Expr, Func};
use crate::coeff::parse_rational;
use crate::error::{Error, Result};

pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
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
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                self.pos = start;
                return Err(self.error("exponent must be a non-negative integer"));
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
            let n: u32 = text.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: "exponent too large".into(),
            })?;
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Parser| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let int_len = digits(self);
        let mut is_integer = true;
        if self.src.get(self.pos) == Some(&b'.') {
            is_integer = false;
            self.pos += 1;
            let frac_len = digits(self);
            if int_len + frac_len == 0 {
                self.pos = start;
                return Err(self.error("malformed number"));
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E'))
            && self
                .src
                .get(self.pos + 1)
                .is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
        {
            is_integer = false;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'-' | b'+')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = start;
                return Err(self.error("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let mut value = parse_rational(text).ok_or_else(|| Error::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        // p/q literal
        if is_integer
            && self.src.get(self.pos) == Some(&b'/')
            && self.src.get(self.pos + 1).is_some_and(u8::is_ascii_digit)
        {
            self.pos += 1;
            let dstart = self.pos;
            digits(self);
            let den: BigInt = std::str::from_utf8(&self.src[dstart..self.pos])
                .expect("ascii")
                .parse()
                .expect("digits");
            if den == BigInt::from(0) {
                return Err(Error::Syntax {
                    offset: dstart,
                    message: "zero denominator in rational literal".into(),
                });
            }
            value /= BigRational::from_integer(den);
        }
        Ok(Expr::Num(value))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let is_call = self.peek() == Some(b'(');
        if is_call {
            let f = Func::from_name(name).ok_or_else(|| Error::UnknownIdentifier(name.to_string()))?;
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::call(f, arg));
        }
        if Func::from_name(name).is_some() {
            return Err(Error::UnknownIdentifier(format!("{name} (function used without argument)")));
        }
        match name {
            "x1" => Ok(Expr::Var(0)),
            "x2" => Ok(Expr::Var(1)),
            "x3" => Ok(Expr::Var(2)),
            _ if name.len() > 1
                && name.starts_with('x')
                && name[1..].bytes().all(|b| b.is_ascii_digit()) =>
            {
                Err(Error::UnknownIdentifier(name.to_string()))
            }
            _ => Ok(Expr::Param(name.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn cubic_family_has_two_parameters() {
        let e = parse("1 + a*x1 + b*x1^3 + x3").unwrap();
        let want: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(e.params(), want);
    }

    #[test]
    fn zero_literal() {
        assert_eq!(parse("0").unwrap(), Expr::int(0));
    }

    #[test]
    fn rational_literal_vs_division() {
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(parse("1/2").unwrap(), Expr::Num(half));
        assert_eq!(
            parse("1 / 2").unwrap(),
            Expr::binary(BinOp::Div, Expr::int(1), Expr::int(2))
        );
        assert_eq!(parse("x1^2/3").unwrap(), Expr::binary(BinOp::Div, Expr::var(0).pow(2), Expr::int(3)));
        assert_eq!(
            parse("0.25").unwrap(),
            Expr::Num(BigRational::new(1.into(), 4.into()))
        );
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse("-x1^2 + 2*x2").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Add,
                Expr::Neg(Box::new(Expr::var(0).pow(2))),
                Expr::binary(BinOp::Mul, Expr::int(2), Expr::var(1))
            )
        );
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("1 + * x1") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match parse("x1^y") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("(x1"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1 x2"), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse(""), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1^-2"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn unknown_identifiers() {
        assert!(matches!(parse("tan(x1)"), Err(Error::UnknownIdentifier(_))));
        assert!(matches!(parse("x4 + 1"), Err(Error::UnknownIdentifier(_))));
        assert!(matches!(parse("sin + 1"), Err(Error::UnknownIdentifier(_))));
    }

    #[test]
    fn round_trip_examples() {
        for src in [
            "1 + a*x1 + b*x1^3 + x3",
            "sin(x1)^2 + cos(x1)^2",
            "-(x1 - x2) - -x3",
            "x1 / (3/4) * 2/5",
            "(-x1)^2 - (x2^2)^3",
            "a - (b - c) - d",
            "exp(-x1*x2) / sqrt(1 + x3^2)",
        ] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }
}
