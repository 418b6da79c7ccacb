//! Closed-form potential expressions.
//!
//! Grammar (usual precedence, `^` right-associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'x' | 'y' | 'z' | 'r' | '|x|' | 'pi' | 'e'
//!        | ('abs' | 'exp' | 'sqrt' | 'log') '(' expr ')' | '(' expr ')'
//! ```
//!
//! `r` and `|x|` denote the Euclidean norm of the position.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Coord(usize),
    Radius,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Func {
    Abs,
    Exp,
    Sqrt,
    Log,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!("trailing input at token {}", p.pos)));
        }
        Ok(e)
    }

    /// Evaluates at position `x` with `radius` standing in for `|x|`.
    pub fn eval(&self, x: &[f64], radius: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Coord(i) => x.get(*i).copied().unwrap_or(0.0),
            Expr::Radius => radius,
            Expr::Neg(a) => -a.eval(x, radius),
            Expr::Add(a, b) => a.eval(x, radius) + b.eval(x, radius),
            Expr::Sub(a, b) => a.eval(x, radius) - b.eval(x, radius),
            Expr::Mul(a, b) => a.eval(x, radius) * b.eval(x, radius),
            Expr::Div(a, b) => a.eval(x, radius) / b.eval(x, radius),
            Expr::Pow(a, b) => {
                let base = a.eval(x, radius);
                let e = b.eval(x, radius);
                if e.fract() == 0.0 && e.abs() < 64.0 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(x, radius);
                match f {
                    Func::Abs => v.abs(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt(),
                    Func::Log => v.ln(),
                }
            }
        }
    }

    pub fn uses_radius(&self) -> bool {
        match self {
            Expr::Radius => true,
            Expr::Num(_) | Expr::Coord(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_radius(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.uses_radius() || b.uses_radius()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::Expression(format!("bad number {s:?}")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c == '|' {
            // Only the literal `|x|` is accepted.
            let rest: String = chars[i..].iter().take(3).collect();
            if rest != "|x|" {
                return Err(Error::Expression("only |x| may appear between bars".into()));
            }
            out.push(Tok::Ident("r".into()));
            i += 3;
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat_op('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Expression("unexpected end of input".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat_op(')') {
                    return Err(Error::Expression("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Coord(0)),
                "y" => Ok(Expr::Coord(1)),
                "z" => Ok(Expr::Coord(2)),
                "r" => Ok(Expr::Radius),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "e" => Ok(Expr::Num(std::f64::consts::E)),
                "abs" | "exp" | "sqrt" | "log" => {
                    let f = match name.as_str() {
                        "abs" => Func::Abs,
                        "exp" => Func::Exp,
                        "sqrt" => Func::Sqrt,
                        _ => Func::Log,
                    };
                    if !self.eat_op('(') {
                        return Err(Error::Expression(format!("{name} needs '('")));
                    }
                    let arg = self.expr()?;
                    if !self.eat_op(')') {
                        return Err(Error::Expression("missing ')'".into()));
                    }
                    Ok(Expr::Call(f, Box::new(arg)))
                }
                other => Err(Error::Expression(format!("unknown identifier {other:?}"))),
            },
            Tok::Op(c) => Err(Error::Expression(format!("unexpected {c:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Expr::parse(s).unwrap().eval(x, r)
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(ev("1 + 2 * 3", &[0.0]), 7.0);
        assert_eq!(ev("-2^2", &[0.0]), -4.0);
        assert_eq!(ev("2^3^2", &[0.0]), 512.0);
        assert_eq!(ev("(x - 1/2) * 4", &[1.0]), 2.0);
        assert_eq!(ev("3 * |x|^-2", &[3.0, 4.0]), 3.0 / 25.0);
        assert_eq!(ev("r", &[3.0, 4.0]), 5.0);
        assert!((ev("exp(-x*x) + sqrt(y) + abs(-z)", &[1.0, 4.0, 2.0]) - ((-1.0f64).exp() + 4.0)).abs() < 1e-15);
        assert_eq!(ev("1.5e2 - 2E-1", &[0.0]), 149.8);
        assert!((ev("pi", &[0.0]) - std::f64::consts::PI).abs() == 0.0);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["1 +", "(1", "foo", "1 $ 2", "|y|", "exp 1", "1 2"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }
}
