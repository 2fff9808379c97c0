//! Expression parser for polynomial entries.
//!
//! ```text
//! expr   = term { ("+" | "-") term } ;
//! term   = unary { ("*" | "/") unary } ;   (division by nonzero constants only)
//! unary  = ("-" | "+") unary | power ;
//! power  = atom [ "^" integer ] ;
//! atom   = number | identifier | "(" expr ")" ;
//! number = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```

use super::{Monomial, PolyError, Polynomial, VarEnv};

pub fn parse_poly(text: &str, env: &VarEnv) -> Result<Polynomial, PolyError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, env };
    p.skip_ws();
    let out = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(PolyError::Syntax { pos: p.pos, msg: format!("unexpected `{}`", p.src[p.pos] as char) });
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    env: &'a VarEnv,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = &acc + &self.term()?;
            } else if self.eat(b'-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = &acc * &self.unary()?;
            } else if self.eat(b'/') {
                let pos = self.pos;
                let d = self.unary()?;
                if !d.is_constant() || d.constant_term() == 0.0 {
                    return Err(PolyError::Syntax { pos, msg: "division only by a nonzero constant".into() });
                }
                acc = acc.scale(1.0 / d.constant_term());
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial, PolyError> {
        if self.eat(b'-') {
            return Ok(-&self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Polynomial, PolyError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        // Reject fractional or signed exponents explicitly.
        if start == self.pos || matches!(self.peek(), Some(b'.') | Some(b'e') | Some(b'E')) {
            return Err(PolyError::BadExponent { pos: start });
        }
        let e: u32 = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| PolyError::BadExponent { pos: start })?;
        let mut out = Polynomial::constant(base.arity(), 1.0);
        for _ in 0..e {
            out = &out * &base;
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Polynomial, PolyError> {
        self.skip_ws();
        let arity = self.env.arity();
        match self.peek() {
            None => Err(PolyError::Syntax { pos: self.pos, msg: "unexpected end of input".into() }),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(PolyError::Syntax { pos: self.pos, msg: "expected `)`".into() });
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                self.number_span();
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = text
                    .parse()
                    .map_err(|_| PolyError::Syntax { pos: start, msg: format!("bad number `{text}`") })?;
                Ok(Polynomial::constant(arity, v))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let id = self
                    .env
                    .lookup(name)
                    .ok_or_else(|| PolyError::UnknownIdentifier { name: name.to_string(), pos: start })?;
                Ok(Polynomial::from_terms(arity, [(Monomial::var(arity, id.index), 1.0)]))
            }
            Some(c) => Err(PolyError::Syntax { pos: self.pos, msg: format!("unexpected `{}`", c as char) }),
        }
    }

    fn number_span(&mut self) {
        let digits = |p: &mut Self| {
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_literal() {
        let env = VarEnv::lpv(1);
        let p = parse_poly("0", &env).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.degree(), 0);
    }

    #[test]
    fn affine_entry() {
        let env = VarEnv::lpv(1);
        let p = parse_poly("-2 - p1", &env).unwrap();
        assert_eq!(p.n_terms(), 2);
        assert_eq!(p.constant_term(), -2.0);
        assert_eq!(p.coeff(&Monomial::var(3, 1)), -1.0);
    }

    #[test]
    fn product_expansion() {
        let env = VarEnv::lpv(1);
        let p = parse_poly("t*(0.5 - t)", &env).unwrap();
        assert_eq!(p.coeff(&Monomial::var(3, 0)), 0.5);
        assert_eq!(p.coeff(&Monomial::new(vec![2, 0, 0])), -1.0);
        assert_eq!(p.n_terms(), 2);
    }

    #[test]
    fn precedence() {
        let env = VarEnv::lpv(1);
        let p = parse_poly("-t^2 + 2*-p1", &env).unwrap();
        assert_eq!(p.eval(&[3.0, 1.0, 0.0]), -11.0);
        assert_eq!(parse_poly("(t+1)^3", &env).unwrap().eval(&[1.0, 0.0, 0.0]), 8.0);
    }

    #[test]
    fn constant_division() {
        let env = VarEnv::lpv(1);
        let p = parse_poly("-3*(15/4)*p1/4", &env).unwrap();
        assert_eq!(p.coeff(&Monomial::var(3, 1)), -45.0 / 16.0);
        assert!(matches!(parse_poly("t/p1", &env).unwrap_err(), PolyError::Syntax { pos: 2, .. }));
        assert!(matches!(parse_poly("t/(1-1)", &env).unwrap_err(), PolyError::Syntax { .. }));
    }

    #[test]
    fn errors_carry_positions() {
        let env = VarEnv::lpv(1);
        assert_eq!(
            parse_poly("t + x", &env).unwrap_err(),
            PolyError::UnknownIdentifier { name: "x".into(), pos: 4 }
        );
        assert_eq!(parse_poly("t^1.5", &env).unwrap_err(), PolyError::BadExponent { pos: 2 });
        assert_eq!(parse_poly("t^-1", &env).unwrap_err(), PolyError::BadExponent { pos: 2 });
        assert!(matches!(parse_poly("(t + 1", &env).unwrap_err(), PolyError::Syntax { pos: 6, .. }));
        assert!(matches!(parse_poly("t + ", &env).unwrap_err(), PolyError::Syntax { pos: 4, .. }));
        assert!(matches!(parse_poly("t p1", &env).unwrap_err(), PolyError::Syntax { pos: 2, .. }));
    }

    #[test]
    fn decimal_literals_are_nearest_double() {
        let env = VarEnv::lpv(0);
        assert_eq!(parse_poly("0.1", &env).unwrap().constant_term(), 0.1);
        assert_eq!(parse_poly("3.75", &env).unwrap().constant_term(), 3.75);
        assert_eq!(parse_poly("2.5e-3", &env).unwrap().constant_term(), 2.5e-3);
    }
}
