//! Arithmetic expressions for coefficient functions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?          right associative
//! atom  := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `min`, `max` (two or more arguments), `abs`, `sin`, `cos`,
//! `exp`, `sqrt`. The constant `pi` is predefined. Names are resolved at
//! parse time against a [`Symbols`] table, so evaluation never looks up
//! strings.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("column {column}: unexpected character `{found}`")]
    UnexpectedChar { column: usize, found: char },
    #[error("column {column}: expected {expected}, found {found}")]
    Unexpected {
        column: usize,
        expected: &'static str,
        found: String,
    },
    #[error("column {column}: unknown identifier `{name}`")]
    UnknownIdentifier { column: usize, name: String },
    #[error("column {column}: `{function}` takes {expected} argument(s), got {got}")]
    Arity {
        column: usize,
        function: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("column {column}: invalid number `{text}`")]
    InvalidNumber { column: usize, text: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    NegativeSqrt(f64),
    #[error("{base} ^ {exponent} is not a real number")]
    InvalidPower { base: f64, exponent: f64 },
    #[error("`{0}` produced a non-finite value")]
    NonFinite(&'static str),
}

/// What a name in an expression refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Spatial coordinate `x_{i+1}`.
    Space(usize),
    /// Component of the control tuple.
    Control(usize),
    /// Time, only available where explicitly enabled.
    Time,
}

/// Names visible to an expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbols {
    names: Vec<(String, Var)>,
}

impl Symbols {
    /// `x1..x{dim}` plus the given control component names.
    pub fn new(dim: usize, control_names: &[String]) -> Self {
        let mut names: Vec<(String, Var)> = (0..dim).map(|i| (format!("x{}", i + 1), Var::Space(i))).collect();
        names.extend(
            control_names
                .iter()
                .enumerate()
                .map(|(j, n)| (n.clone(), Var::Control(j))),
        );
        Self { names }
    }

    pub fn with_time(mut self) -> Self {
        self.names.push(("t".to_string(), Var::Time));
        self
    }

    fn lookup(&self, name: &str) -> Option<Var> {
        self.names.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    fn name(&self, var: Var) -> &str {
        self.names
            .iter()
            .find(|(_, v)| *v == var)
            .map(|(n, _)| n.as_str())
            .unwrap_or("?")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Min,
    Max,
    Abs,
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed coefficient function of `(x, α)` (and `t` where enabled).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientExpr {
    root: Node,
    symbols: Symbols,
}

impl CoefficientExpr {
    pub fn parse(text: &str, symbols: &Symbols) -> Result<Self, ParseError> {
        let tokens = lex(text)?;
        if tokens.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            symbols,
            end_column: text.chars().count() + 1,
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError::Unexpected {
                column: tok.column,
                expected: "operator or end of input",
                found: tok.kind.describe(),
            });
        }
        Ok(Self {
            root,
            symbols: symbols.clone(),
        })
    }

    pub fn constant(value: f64, symbols: &Symbols) -> Self {
        Self {
            root: Node::Num(value),
            symbols: symbols.clone(),
        }
    }

    /// `self - other`, sharing `self`'s symbol table.
    pub fn minus(&self, other: &CoefficientExpr) -> Self {
        Self {
            root: Node::Bin(BinOp::Sub, Box::new(self.root.clone()), Box::new(other.root.clone())),
            symbols: self.symbols.clone(),
        }
    }

    /// `self + other`, sharing `self`'s symbol table.
    pub fn plus(&self, other: &CoefficientExpr) -> Self {
        Self {
            root: Node::Bin(BinOp::Add, Box::new(self.root.clone()), Box::new(other.root.clone())),
            symbols: self.symbols.clone(),
        }
    }

    /// True when the expression is the literal `0`.
    pub fn is_zero(&self) -> bool {
        matches!(self.root, Node::Num(v) if v == 0.0)
    }

    pub fn eval(&self, x: &[f64], control: &[f64]) -> Result<f64, EvalError> {
        eval(&self.root, x, control, 0.0)
    }

    pub fn eval_at_time(&self, t: f64, x: &[f64], control: &[f64]) -> Result<f64, EvalError> {
        eval(&self.root, x, control, t)
    }
}

impl fmt::Display for CoefficientExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.symbols, f)
    }
}

fn write_node(node: &Node, sym: &Symbols, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Num(v) if *v < 0.0 => write!(f, "(-{:?})", -v),
        Node::Num(v) => write!(f, "{v:?}"),
        Node::Pi => f.write_str("pi"),
        Node::Var(v) => f.write_str(sym.name(*v)),
        Node::Neg(inner) => {
            f.write_str("(-")?;
            write_node(inner, sym, f)?;
            f.write_str(")")
        }
        Node::Bin(op, a, b) => {
            let op = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            };
            f.write_str("(")?;
            write_node(a, sym, f)?;
            write!(f, " {op} ")?;
            write_node(b, sym, f)?;
            f.write_str(")")
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_node(a, sym, f)?;
            }
            f.write_str(")")
        }
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite(what))
    }
}

fn eval(node: &Node, x: &[f64], control: &[f64], t: f64) -> Result<f64, EvalError> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Pi => Ok(std::f64::consts::PI),
        Node::Var(Var::Space(i)) => Ok(x[*i]),
        Node::Var(Var::Control(j)) => Ok(control[*j]),
        Node::Var(Var::Time) => Ok(t),
        Node::Neg(a) => Ok(-eval(a, x, control, t)?),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, control, t)?, eval(b, x, control, t)?);
            match op {
                BinOp::Add => finite(a + b, "+"),
                BinOp::Sub => finite(a - b, "-"),
                BinOp::Mul => finite(a * b, "*"),
                BinOp::Div if b == 0.0 => Err(EvalError::DivisionByZero),
                BinOp::Div => finite(a / b, "/"),
                BinOp::Pow => {
                    if a == 0.0 && b < 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    if a < 0.0 && b.fract() != 0.0 {
                        return Err(EvalError::InvalidPower { base: a, exponent: b });
                    }
                    finite(a.powf(b), "^")
                }
            }
        }
        Node::Call(func, args) => {
            let vals = args
                .iter()
                .map(|a| eval(a, x, control, t))
                .collect::<Result<Vec<_>, _>>()?;
            match func {
                Func::Min => Ok(vals.iter().copied().fold(f64::INFINITY, f64::min)),
                Func::Max => Ok(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                Func::Abs => Ok(vals[0].abs()),
                Func::Sin => Ok(vals[0].sin()),
                Func::Cos => Ok(vals[0].cos()),
                Func::Exp => finite(vals[0].exp(), "exp"),
                Func::Sqrt if vals[0] < 0.0 => Err(EvalError::NegativeSqrt(vals[0])),
                Func::Sqrt => Ok(vals[0].sqrt()),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Op(c) => format!("`{c}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let kind = if c.is_ascii_digit() || c == '.' {
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
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<f64>()
                .map_err(|_| ParseError::InvalidNumber { column, text: text.clone() })?;
            tokens.push(Token {
                kind: TokenKind::Num(value),
                column,
            });
            continue;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(chars[start..i].iter().collect()),
                column,
            });
            continue;
        } else {
            match c {
                '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                ',' => TokenKind::Comma,
                _ => return Err(ParseError::UnexpectedChar { column, found: c }),
            }
        };
        tokens.push(Token { kind, column });
        i += 1;
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    symbols: &'a Symbols,
    end_column: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        match self.peek() {
            Some(tok) => ParseError::Unexpected {
                column: tok.column,
                expected,
                found: tok.kind.describe(),
            },
            None => ParseError::Unexpected {
                column: self.end_column,
                expected,
                found: "end of input".into(),
            },
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
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

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek() else {
            return Err(self.unexpected("a value"));
        };
        match &tok.kind {
            TokenKind::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(*v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                let is_call = matches!(self.peek().map(|t| &t.kind), Some(TokenKind::LParen));
                if is_call {
                    let Some(func) = Func::from_name(name) else {
                        return Err(ParseError::UnknownIdentifier {
                            column: tok.column,
                            name: name.clone(),
                        });
                    };
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect_rparen()?;
                    let ok = match func {
                        Func::Min | Func::Max => args.len() >= 2,
                        _ => args.len() == 1,
                    };
                    if !ok {
                        return Err(ParseError::Arity {
                            column: tok.column,
                            function: func.name(),
                            expected: if matches!(func, Func::Min | Func::Max) { "at least 2" } else { "1" },
                            got: args.len(),
                        });
                    }
                    Ok(Node::Call(func, args))
                } else if name == "pi" {
                    Ok(Node::Pi)
                } else if let Some(var) = self.symbols.lookup(name) {
                    Ok(Node::Var(var))
                } else {
                    Err(ParseError::UnknownIdentifier {
                        column: tok.column,
                        name: name.clone(),
                    })
                }
            }
            _ => Err(self.unexpected("a value")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected("`)`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym() -> Symbols {
        Symbols::new(2, &["alpha".to_string()])
    }

    fn eval_str(text: &str, x: &[f64]) -> Result<f64, EvalError> {
        CoefficientExpr::parse(text, &sym()).unwrap().eval(x, &[0.5])
    }

    #[test]
    fn literals_and_arithmetic() {
        let zero = CoefficientExpr::parse("0", &sym()).unwrap();
        assert!(zero.is_zero());
        assert_eq!(zero.eval(&[1.0, 2.0], &[0.0]), Ok(0.0));
        assert_eq!(eval_str("x1*x1 + 2*x2", &[3.0, 1.0]), Ok(11.0));
        assert_eq!(eval_str("max(0, 1 - x1)", &[2.0, 0.0]), Ok(0.0));
        assert_eq!(eval_str("-2^2", &[0.0, 0.0]), Ok(-4.0));
        assert_eq!(eval_str("2^3^2", &[0.0, 0.0]), Ok(512.0));
        assert_eq!(eval_str("2^-1", &[0.0, 0.0]), Ok(0.5));
        assert_eq!(eval_str("10 - 4 - 3", &[0.0, 0.0]), Ok(3.0));
        assert_eq!(eval_str("alpha * 4 / 2", &[0.0, 0.0]), Ok(1.0));
        assert_eq!(eval_str("min(3, x2, 7)", &[0.0, -1.0]), Ok(-1.0));
        assert_eq!(eval_str("1.5e1 + 2E-1", &[0.0, 0.0]), Ok(15.2));
        assert!((eval_str("sin(pi*x1)", &[0.5, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(eval_str("abs(-3) + sqrt(4) + exp(0) + cos(0)", &[0.0, 0.0]), Ok(7.0));
    }

    #[test]
    fn evaluation_errors_instead_of_non_finite_values() {
        assert_eq!(eval_str("1 / (x1 - 1)", &[1.0, 0.0]), Err(EvalError::DivisionByZero));
        assert_eq!(eval_str("sqrt(x1)", &[-1.0, 0.0]), Err(EvalError::NegativeSqrt(-1.0)));
        assert!(matches!(eval_str("x1 ^ 0.5", &[-4.0, 0.0]), Err(EvalError::InvalidPower { .. })));
        assert_eq!(eval_str("0 ^ -1", &[0.0, 0.0]), Err(EvalError::DivisionByZero));
        assert_eq!(eval_str("exp(1000)", &[0.0, 0.0]), Err(EvalError::NonFinite("exp")));
        assert_eq!(eval_str("(-8) ^ 3", &[0.0, 0.0]), Ok(-512.0));
    }

    #[test]
    fn parse_errors_report_columns() {
        let s = sym();
        assert_eq!(CoefficientExpr::parse("   ", &s), Err(ParseError::Empty));
        assert!(matches!(
            CoefficientExpr::parse("x1 + y", &s),
            Err(ParseError::UnknownIdentifier { column: 6, .. })
        ));
        assert!(matches!(
            CoefficientExpr::parse("x1 $ 2", &s),
            Err(ParseError::UnexpectedChar { column: 4, found: '$' })
        ));
        assert!(matches!(
            CoefficientExpr::parse("sin(x1, x2)", &s),
            Err(ParseError::Arity { function: "sin", got: 2, .. })
        ));
        assert!(matches!(CoefficientExpr::parse("max(x1)", &s), Err(ParseError::Arity { .. })));
        assert!(matches!(
            CoefficientExpr::parse("(x1 + 1", &s),
            Err(ParseError::Unexpected { column: 8, .. })
        ));
        assert!(matches!(
            CoefficientExpr::parse("foo(1)", &s),
            Err(ParseError::UnknownIdentifier { column: 1, .. })
        ));
        assert!(matches!(CoefficientExpr::parse("x1 x2", &s), Err(ParseError::Unexpected { column: 4, .. })));
        assert!(CoefficientExpr::parse("t", &s).is_err());
        assert!(CoefficientExpr::parse("t", &s.clone().with_time()).is_ok());
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (0u32..100).prop_map(|n| format!("{}", n as f64 / 4.0)),
            Just("x1".to_string()),
            Just("x2".to_string()),
            Just("alpha".to_string()),
            Just("pi".to_string()),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "^"]))
                    .prop_map(|(a, b, op)| format!("{a} {op} {b}")),
                inner.clone().prop_map(|a| format!("-{a}")),
                inner.clone().prop_map(|a| format!("({a})")),
                (inner.clone(), prop::sample::select(vec!["abs", "sin", "cos", "exp", "sqrt"]))
                    .prop_map(|(a, f)| format!("{f}({a})")),
                (inner.clone(), inner).prop_map(|(a, b)| format!("max({a}, {b})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trip_is_stable(text in arb_expr(), x1 in -2.0..2.0f64, x2 in -2.0..2.0f64) {
            let s = sym();
            let e = CoefficientExpr::parse(&text, &s).unwrap();
            let printed = e.to_string();
            let again = CoefficientExpr::parse(&printed, &s).unwrap();
            prop_assert_eq!(&again, &e);
            prop_assert_eq!(again.to_string(), printed);
            // evaluation is pure: same inputs, same outcome
            let a = e.eval(&[x1, x2], &[0.3]);
            let b = again.eval(&[x1, x2], &[0.3]);
            match (a, b) {
                (Ok(u), Ok(v)) => prop_assert_eq!(u.to_bits(), v.to_bits()),
                (Err(u), Err(v)) => prop_assert_eq!(u, v),
                (u, v) => prop_assert!(false, "{:?} vs {:?}", u, v),
            }
        }
    }
}
