//! A small arithmetic language in one variable `x`.
//!
//! Coefficient functions, initial conditions and manufactured solutions are
//! all written as strings in run configurations and parsed into [`Expr`]
//! trees here. Grammar, loosest to tightest binding:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          (right associative)
//! atom    := number | 'x' | func '(' sum ')' | '(' sum ')'
//! func    := exp | sin | cos | tanh | sqrt | abs
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("non-finite result {value} from `{subexpr}` at x = {x}")]
    NonFinite { subexpr: String, x: f64, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Tanh,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tanh => v.tanh(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Expression tree. Immutable once built; `Send + Sync`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ExprError> {
        parse(source)
    }

    /// Evaluates at `x`; every intermediate value must be finite.
    pub fn eval(&self, x: f64) -> Result<f64, ExprError> {
        let value = match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(x)?;
                let b = r.eval(x)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expr::Call(f, arg) => f.apply(arg.eval(x)?),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(ExprError::NonFinite {
                subexpr: self.to_string(),
                x,
                value,
            })
        }
    }

    /// True when the tree does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Binary(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }
}

// Integer exponents go through powi so that (-2)^3 is -8 rather than NaN.
fn pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

/// Canonical, fully parenthesised form. Parsing it gives back the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::X => write!(f, "x"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("number {v}"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Op(c) => format!("`{c}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Token::Op(c as char), start));
                i += 1;
            }
            b'(' => {
                out.push((Token::LParen, start));
                i += 1;
            }
            b')' => {
                out.push((Token::RParen, start));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    expected: "a numeric literal".into(),
                })?;
                if !value.is_finite() {
                    return Err(ExprError::Syntax {
                        offset: start,
                        expected: "a finite numeric literal".into(),
                    });
                }
                out.push((Token::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(ExprError::Syntax {
                    offset: start,
                    expected: "an operator, number, identifier or parenthesis".into(),
                })
            }
        }
    }
    out.push((Token::End, src.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            expected: format!("{expected}, found {}", self.peek().describe()),
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Token::Op('+') => BinOp::Add,
                Token::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Op('*') => BinOp::Mul,
                Token::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Token::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Token::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.peek().clone() {
            Token::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Token::Ident(name) => {
                if name == "x" {
                    self.bump();
                    return Ok(Expr::X);
                }
                let func = Func::from_name(&name)
                    .ok_or(ExprError::UnknownIdentifier { name, offset })?;
                self.bump();
                if *self.peek() != Token::LParen {
                    return Err(self.error("`(` after function name"));
                }
                self.bump();
                let arg = self.sum()?;
                self.expect_rparen()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Token::LParen => {
                self.bump();
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if *self.peek() == Token::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.error("`)`"))
        }
    }
}

pub fn parse(source: &str) -> Result<Expr, ExprError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.sum()?;
    if *parser.peek() != Token::End {
        return Err(parser.error("an operator or end of input"));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: f64) -> f64 {
        parse(s).unwrap().eval(x).unwrap()
    }

    #[test]
    fn evaluates_basic_examples() {
        assert_eq!(ev("0.5*exp(-x^2)", 0.0), 0.5);
        assert_eq!(ev("x^2", 3.0), 9.0);
        assert_eq!(ev("sin(x)", 0.0), 0.0);
        assert!((ev("tanh(x)", 20.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("-x^2", 3.0), -9.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        assert_eq!(ev("1-2-3", 0.0), -4.0);
        assert_eq!(ev("2*3+4*5", 0.0), 26.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("(-2)^3", 0.0), -8.0);
        assert_eq!(ev("abs(x) + sqrt(4) + cos(0)", -1.5), 4.5);
        assert_eq!(ev("1.5e2 + 2E-1", 0.0), 150.2);
    }

    #[test]
    fn unbalanced_paren_reports_offset() {
        match parse("exp(") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("(x"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x x"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(parse("1e999"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn unknown_identifiers_rejected() {
        assert_eq!(
            parse("2*y"),
            Err(ExprError::UnknownIdentifier { name: "y".into(), offset: 2 })
        );
        assert!(matches!(parse("log(x)"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("exp x"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn non_finite_results_are_errors() {
        let e = parse("1/x").unwrap();
        match e.eval(0.0) {
            Err(ExprError::NonFinite { subexpr, .. }) => assert_eq!(subexpr, "(1.0 / x)"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("sqrt(x)").unwrap().eval(-1.0).is_err());
        assert!(parse("exp(x)").unwrap().eval(1000.0).is_err());
    }

    #[test]
    fn constant_detection() {
        assert!(parse("2*exp(1)").unwrap().is_constant());
        assert!(!parse("1 + 0*x").unwrap().is_constant());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Num),
            Just(Expr::X),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
                (
                    prop_oneof![
                        Just(Func::Exp),
                        Just(Func::Sin),
                        Just(Func::Cos),
                        Just(Func::Tanh),
                        Just(Func::Sqrt),
                        Just(Func::Abs)
                    ],
                    inner
                )
                    .prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e);
            prop_assert_eq!(reparsed.to_string(), printed);
        }

        #[test]
        fn evaluation_is_deterministic(e in arb_expr(), x in -10.0f64..10.0) {
            let a = e.eval(x).map(f64::to_bits);
            let b = e.eval(x).map(f64::to_bits);
            prop_assert_eq!(a.ok(), b.ok());
        }
    }
}
