//! Infix polynomial expressions such as `3*x1^2 - x1*x2 + 0.5`.
//!
//! Grammar: sums of products of factors; a factor is a number, a variable
//! `x1..xn`, or a parenthesized expression, optionally raised to `^k`.

use crate::error::{Error, Result};
use crate::poly::Polynomial;

impl Polynomial {
    /// Parses an expression in `n` variables named `x1, …, xn`.
    pub fn parse(n: usize, src: &str) -> Result<Polynomial> {
        let mut p = Parser { src: src.as_bytes(), pos: 0, n };
        let out = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(out)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::InvalidProblem(format!("{msg} at column {} in `{}`", self.pos + 1, String::from_utf8_lossy(self.src)))
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

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = Polynomial::zero(self.n);
        let mut sign = 1.0;
        if let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            if c == b'-' {
                sign = -1.0;
            }
        }
        loop {
            let t = self.term()?;
            acc += &t.scale(sign);
            match self.peek() {
                Some(b'+') => sign = 1.0,
                Some(b'-') => sign = -1.0,
                _ => return Ok(acc),
            }
            self.pos += 1;
        }
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.power()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = &acc * &self.power()?;
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.factor()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let e: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| self.error("expected a nonnegative integer exponent"))?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn factor(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'-') => {
                self.pos += 1;
                Ok(-&self.power()?)
            }
            Some(b'x') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let i: usize = std::str::from_utf8(&self.src[start..self.pos])
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| self.error("expected a variable index"))?;
                if i == 0 || i > self.n {
                    return Err(self.error(&format!("variable x{i} outside x1..x{}", self.n)));
                }
                Ok(Polynomial::var(self.n, i - 1))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() {
                    let c = self.src[self.pos];
                    let exp_sign = (c == b'+' || c == b'-') && matches!(self.src[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let v: f64 = std::str::from_utf8(&self.src[start..self.pos])
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| self.error("malformed number"))?;
                Ok(Polynomial::constant(self.n, v))
            }
            _ => Err(self.error("expected a number, variable or `(`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;

    #[test]
    fn parses_mixed_expression() {
        let p = Polynomial::parse(2, "3*x1^2 - x1*x2 + 0.5 - (x2 - 1)^2").unwrap();
        assert_eq!(p.eval(&[2.0, 3.0]), 12.0 - 6.0 + 0.5 - 4.0);
        assert_eq!(p.coeff(&Monomial::new(vec![0, 2])), -1.0);
    }

    #[test]
    fn display_round_trips() {
        let p = Polynomial::parse(3, "-2.5*x1*x3^3 + x2 - 7 + 1e-3*x1").unwrap();
        let q = Polynomial::parse(3, &p.to_string()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn reports_position() {
        let err = Polynomial::parse(2, "x1 + x3").unwrap_err().to_string();
        assert!(err.contains("x3") && err.contains("column"), "{err}");
        assert!(Polynomial::parse(2, "x1 +").is_err());
        assert!(Polynomial::parse(2, "x1 x2").is_err());
    }
}
