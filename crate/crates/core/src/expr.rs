//! Arithmetic expressions over named coordinates, evaluated on jets.
//!
//! The accepted grammar is documented in `docs/expression-grammar.md`.

use crate::error::{Error, Result};
use crate::jet::Jet;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "ln" | "log" => Some(Func::Ln),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn apply_f64(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => x.sqrt(),
        }
    }

    fn apply(self, x: &Jet) -> Jet {
        match self {
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

/// A parsed expression whose variables are bound to argument positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    /// Parses `source`; identifiers must be one of `variables` or a key of
    /// `constants` (`pi` and `e` are always available).
    pub fn parse(
        source: &str,
        variables: &[&str],
        constants: &BTreeMap<String, f64>,
    ) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            variables,
            constants,
            len: source.len(),
        };
        let root = parser.expr()?;
        if parser.pos != tokens.len() {
            return Err(Error::Parse {
                position: tokens[parser.pos].1,
                message: "unexpected trailing input".into(),
            });
        }
        Ok(Expr {
            root: fold(root),
            source: source.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value when the expression references no variables.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Evaluates on jets; `args` must be non-empty and cover every bound variable.
    pub fn eval(&self, args: &[Jet]) -> Jet {
        eval(&self.root, args)
    }

    /// Evaluates with plain numbers.
    pub fn eval_f64(&self, args: &[f64]) -> f64 {
        eval_f64(&self.root, args)
    }
}

fn eval(node: &Node, args: &[Jet]) -> Jet {
    match node {
        Node::Const(c) => args[0].lift(*c),
        Node::Var(i) => args[*i].clone(),
        Node::Neg(a) => -eval(a, args),
        Node::Add(a, b) => eval(a, args) + eval(b, args),
        Node::Sub(a, b) => eval(a, args) - eval(b, args),
        Node::Mul(a, b) => eval(a, args) * eval(b, args),
        Node::Div(a, b) => eval(a, args) / eval(b, args),
        Node::Pow(a, b) => {
            let base = eval(a, args);
            match **b {
                Node::Const(p) => base.powf(p),
                _ => (eval(b, args) * base.ln()).exp(),
            }
        }
        Node::Call(f, a) => f.apply(&eval(a, args)),
    }
}

fn eval_f64(node: &Node, args: &[f64]) -> f64 {
    match node {
        Node::Const(c) => *c,
        Node::Var(i) => args[*i],
        Node::Neg(a) => -eval_f64(a, args),
        Node::Add(a, b) => eval_f64(a, args) + eval_f64(b, args),
        Node::Sub(a, b) => eval_f64(a, args) - eval_f64(b, args),
        Node::Mul(a, b) => eval_f64(a, args) * eval_f64(b, args),
        Node::Div(a, b) => eval_f64(a, args) / eval_f64(b, args),
        Node::Pow(a, b) => {
            let base = eval_f64(a, args);
            let p = eval_f64(b, args);
            if p.fract() == 0.0 {
                base.powi(p as i32)
            } else {
                base.powf(p)
            }
        }
        Node::Call(f, a) => f.apply_f64(eval_f64(a, args)),
    }
}

fn fold(node: Node) -> Node {
    use Node::*;
    let folded = match node {
        Neg(a) => Neg(Box::new(fold(*a))),
        Add(a, b) => Add(Box::new(fold(*a)), Box::new(fold(*b))),
        Sub(a, b) => Sub(Box::new(fold(*a)), Box::new(fold(*b))),
        Mul(a, b) => Mul(Box::new(fold(*a)), Box::new(fold(*b))),
        Div(a, b) => Div(Box::new(fold(*a)), Box::new(fold(*b))),
        Pow(a, b) => Pow(Box::new(fold(*a)), Box::new(fold(*b))),
        Call(f, a) => Call(f, Box::new(fold(*a))),
        other => other,
    };
    if has_vars(&folded) {
        folded
    } else {
        Const(eval_f64(&folded, &[]))
    }
}

fn has_vars(node: &Node) -> bool {
    use Node::*;
    match node {
        Const(_) => false,
        Var(_) => true,
        Neg(a) | Call(_, a) => has_vars(a),
        Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => has_vars(a) || has_vars(b),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| Error::Parse {
                position: start,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(Error::Parse {
                position: i,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(Tok, usize)],
    pos: usize,
    variables: &'a [&'a str],
    constants: &'a BTreeMap<String, f64>,
    len: usize,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((Tok::Op(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.1).unwrap_or(self.len)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.here(),
            message: message.into(),
        })
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected '{op}'"))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let Some((tok, _)) = self.tokens.get(self.pos).cloned() else {
            return self.error("unexpected end of expression");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.pos += 1;
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                if let Some(i) = self.variables.iter().position(|v| *v == name) {
                    self.pos += 1;
                    return Ok(Node::Var(i));
                }
                if let Some(c) = self.constants.get(&name) {
                    self.pos += 1;
                    return Ok(Node::Const(*c));
                }
                let value = match name.as_str() {
                    "pi" => std::f64::consts::PI,
                    "e" => std::f64::consts::E,
                    _ => return self.error(format!("unknown identifier '{name}'")),
                };
                self.pos += 1;
                Ok(Node::Const(value))
            }
            Tok::Op(c) => self.error(format!("unexpected '{c}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn parse(src: &str) -> Expr {
        Expr::parse(src, &["x", "y"], &BTreeMap::new()).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_relative_eq!(parse("1 + 2*3^2").eval_f64(&[]), 19.0);
        assert_relative_eq!(parse("2^3^2").eval_f64(&[]), 512.0);
        assert_relative_eq!(parse("-x^2").eval_f64(&[3.0, 0.0]), -9.0);
        assert_relative_eq!(parse("(x - y)/2").eval_f64(&[3.0, 1.0]), 1.0);
        assert_relative_eq!(parse("1.5e-1 * 2").eval_f64(&[]), 0.3);
    }

    #[test]
    fn constants_fold() {
        assert_eq!(parse("2*pi/pi").as_constant(), Some(2.0));
        assert!(parse("x + 1").as_constant().is_none());
    }

    #[test]
    fn jets_match_f64() {
        let e = parse("exp(x)*y^2 + sin(x*y) - cos(y)/x + sqrt(x) + ln(y)");
        let args = Jet::seed(&[0.7, 1.3], 3);
        let jet = e.eval(&args);
        assert_relative_eq!(jet.value(), e.eval_f64(&[0.7, 1.3]), max_relative = 1e-14);
        let h = 1e-6;
        let fd = (e.eval_f64(&[0.7 + h, 1.3]) - e.eval_f64(&[0.7 - h, 1.3])) / (2.0 * h);
        assert_relative_eq!(jet.partial(&[1, 0]), fd, max_relative = 1e-8);
    }

    #[test]
    fn variable_exponent() {
        let e = parse("x^y");
        let jet = e.eval(&Jet::seed(&[2.0, 3.0], 1));
        assert_relative_eq!(jet.value(), 8.0, max_relative = 1e-14);
        assert_relative_eq!(jet.partial(&[0, 1]), 8.0 * 2f64.ln(), max_relative = 1e-13);
    }

    #[test]
    fn errors_carry_positions() {
        let err = Expr::parse("x + q", &["x"], &BTreeMap::new()).unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                position: 4,
                message: "unknown identifier 'q'".into()
            }
        );
        assert!(Expr::parse("(x", &["x"], &BTreeMap::new()).is_err());
        assert!(Expr::parse("x $ 2", &["x"], &BTreeMap::new()).is_err());
    }
}
