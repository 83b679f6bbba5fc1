//! Tiny arithmetic expressions in one variable `y`.
//!
//! Grammar: `+ - * / ^`, parentheses, decimal numbers, `y`, and the
//! functions `cosh sinh cos sin exp`. `^` binds tightest and is right
//! associative.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func {
    Cos,
    Sin,
    Cosh,
    Sinh,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at column {}: {}", self.pos + 1, self.msg)
    }
}

impl Expr {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var => y,
            Expr::Neg(e) => -e.eval(y),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(y), b.eval(y));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Pow if b.fract() == 0.0 && b.abs() < 64.0 => a.powi(b as i32),
                    Op::Pow => a.powf(b),
                }
            }
            Expr::Call(func, e) => {
                let v = e.eval(y);
                match func {
                    Func::Cos => v.cos(),
                    Func::Sin => v.sin(),
                    Func::Cosh => v.cosh(),
                    Func::Sinh => v.sinh(),
                    Func::Exp => v.exp(),
                }
            }
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { s: src.as_bytes(), pos: 0 };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.s.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            let op = if c == b'+' { Op::Add } else { Op::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { Op::Mul } else { Op::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.s.get(self.pos).is_some_and(|c| c.is_ascii_alphabetic()) {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                let func = match name {
                    "y" => return Ok(Expr::Var),
                    "cos" => Func::Cos,
                    "sin" => Func::Sin,
                    "cosh" => Func::Cosh,
                    "sinh" => Func::Sinh,
                    "exp" => Func::Exp,
                    _ => {
                        self.pos = start;
                        return Err(self.err(&format!("unknown name `{name}`")));
                    }
                };
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected `(` after function name"));
                }
                let arg = self.atom()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(_) => Err(self.err("expected a number, `y` or `(`")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.s.get(self.pos).is_some_and(|c| c.is_ascii_digit() || *c == b'.') {
            self.pos += 1;
        }
        // exponent part, e.g. 1e-3
        if matches!(self.s.get(self.pos), Some(b'e' | b'E'))
            && self
                .s
                .get(self.pos + 1)
                .is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
        {
            self.pos += 2;
            while self.s.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        text.parse()
            .map(Expr::Num)
            .map_err(|_| ParseError { pos: start, msg: format!("bad number `{text}`") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, y: f64) -> f64 {
        parse(s).unwrap().eval(y)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("y^2-1/3", 0.5), 0.25 - 1.0 / 3.0);
        assert_eq!(ev("2*y^2", 3.0), 18.0);
        assert_eq!(ev("-y^2", 3.0), -9.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("(1+y)*(1-y)", 0.5), 0.75);
        assert_eq!(ev("1e-1*y", 10.0), 1.0);
        assert!((ev("cosh(2*y) - sinh(2)/2", 0.0) - (1.0 - 2f64.sinh() / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(parse("y +").is_err());
        assert!(parse("x").is_err());
        assert!(parse("(y").is_err());
        assert!(parse("y y").is_err());
        assert!(parse("cos y").is_err());
    }
}
