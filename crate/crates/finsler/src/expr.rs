//! Arithmetic expressions over named coordinates, evaluated at any dual
//! depth.
//!
//! Grammar: `+ - * /`, `^`, unary minus, parentheses, numeric literals, the
//! constant `pi`, the functions `sin cos sqrt exp` of one argument and
//! `pow(a, b)`. `−` (U+2212) is accepted as a minus sign.

use std::fmt;

use finsler_core::dual::Scalar;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("unexpected character {found:?} at byte {at}")]
    BadChar { at: usize, found: char },
    #[error("unexpected end of expression")]
    Eof,
    #[error("unexpected token {found:?} at byte {at}")]
    Unexpected { at: usize, found: String },
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("{name} takes {expected} argument(s), got {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("bad number {0:?}")]
    BadNumber(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
    Exp,
}

impl Func {
    fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Func::Sin, Func::Cos, Func::Sqrt, Func::Exp].into_iter().find(|f| f.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Index into the variable slice.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

fn powi<S: Scalar>(b: S, n: i32) -> S {
    let mut acc = S::one();
    for _ in 0..n.unsigned_abs() {
        acc = acc * b;
    }
    if n < 0 {
        S::one() / acc
    } else {
        acc
    }
}

impl Expr {
    pub fn eval<S: Scalar>(&self, vars: &[S]) -> S {
        match self {
            Expr::Num(c) => S::cst(*c),
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => {
                let base = a.eval(vars);
                match b.constant() {
                    Some(p) if p == p.trunc() && p.abs() <= 64.0 => powi(base, p as i32),
                    Some(p) => base.powf(p),
                    None => (b.eval(vars) * base.ln()).exp(),
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(vars);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sqrt => x.sqrt(),
                    Func::Exp => x.exp(),
                }
            }
        }
    }

    /// The value when the expression has no variables.
    pub fn constant(&self) -> Option<f64> {
        if self.max_var().is_some() {
            None
        } else {
            Some(self.eval::<f64>(&[]))
        }
    }

    /// Largest variable index used.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    /// Renders with the given variable names; parsing the result with the
    /// same names gives back an identical tree.
    pub fn display<'a>(&'a self, names: &'a [String]) -> Display<'a> {
        Display { expr: self, names }
    }
}

pub struct Display<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl<'a> fmt::Display for Display<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names;
        let d = |e: &'a Expr| Display { expr: e, names };
        match self.expr {
            // `{:?}` prints the shortest representation that parses back
            // to the same bits
            Expr::Num(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => write!(f, "(-{:?})", -c),
            Expr::Num(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "{}", self.names[*i]),
            Expr::Neg(a) => write!(f, "(-{})", d(a)),
            Expr::Add(a, b) => write!(f, "({} + {})", d(a), d(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", d(a), d(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", d(a), d(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", d(a), d(b)),
            Expr::Pow(a, b) => write!(f, "pow({}, {})", d(a), d(b)),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), d(a)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = at;
            let mut j = i;
            while j < chars.len() {
                let ch = chars[j].1;
                let exp_sign = (ch == '+' || ch == '-') && j > i && matches!(chars[j - 1].1, 'e' | 'E');
                if ch.is_ascii_digit() || ch == '.' || ch == 'e' || ch == 'E' || exp_sign {
                    j += 1;
                } else {
                    break;
                }
            }
            let end = if j < chars.len() { chars[j].0 } else { src.len() };
            let text = &src[start..end];
            let v: f64 = text.parse().map_err(|_| ParseError::BadNumber(text.to_string()))?;
            out.push((at, Tok::Num(v)));
            i = j;
        } else if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_') {
                j += 1;
            }
            let end = if j < chars.len() { chars[j].0 } else { src.len() };
            out.push((at, Tok::Ident(src[at..end].to_string())));
            i = j;
        } else if "+-*/^(),".contains(c) {
            out.push((at, Tok::Op(c)));
            i += 1;
        } else if c == '\u{2212}' {
            out.push((at, Tok::Op('-')));
            i += 1;
        } else {
            return Err(ParseError::BadChar { at, found: c });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        let t = self.toks.get(self.pos).cloned().ok_or(ParseError::Eof)?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        match self.next()? {
            (_, Tok::Op(c)) if c == op => Ok(()),
            (at, t) => Err(ParseError::Unexpected { at, found: format!("{t:?}") }),
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = if c == '+' { Expr::Add(lhs.into(), rhs.into()) } else { Expr::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' { Expr::Mul(lhs.into(), rhs.into()) } else { Expr::Div(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(match self.unary()? {
                Expr::Num(c) => Expr::Num(-c),
                e => Expr::Neg(e.into()),
            });
        }
        if let Some(Tok::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(base.into(), exp.into()));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect('(')?;
        let mut out = vec![self.sum()?];
        while let Some(Tok::Op(',')) = self.peek() {
            self.pos += 1;
            out.push(self.sum()?);
        }
        self.expect(')')?;
        Ok(out)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.next()? {
            (_, Tok::Num(v)) => Ok(Expr::Num(v)),
            (_, Tok::Op('(')) => {
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            (_, Tok::Ident(name)) => {
                if let Some(Tok::Op('(')) = self.peek() {
                    let mut args = self.args()?;
                    if name == "pow" {
                        if args.len() != 2 {
                            return Err(ParseError::Arity { name, expected: 2, found: args.len() });
                        }
                        let b = args.pop().unwrap();
                        let a = args.pop().unwrap();
                        return Ok(Expr::Pow(a.into(), b.into()));
                    }
                    let f = Func::parse(&name).ok_or_else(|| ParseError::UnknownFunction(name.clone()))?;
                    if args.len() != 1 {
                        return Err(ParseError::Arity { name, expected: 1, found: args.len() });
                    }
                    return Ok(Expr::Call(f, args.pop().unwrap().into()));
                }
                if let Some(i) = self.names.iter().position(|n| *n == name) {
                    return Ok(Expr::Var(i));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                Err(ParseError::UnknownSymbol(name))
            }
            (at, t) => Err(ParseError::Unexpected { at, found: format!("{t:?}") }),
        }
    }
}

/// Parses `src` with variables named by `names` (index = position).
pub fn parse(src: &str, names: &[String]) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, names };
    let e = p.sum()?;
    if let Some((at, t)) = p.toks.get(p.pos) {
        return Err(ParseError::Unexpected { at: *at, found: format!("{t:?}") });
    }
    Ok(e)
}

/// `prefix1, …, prefixN`.
pub fn symbols(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}
