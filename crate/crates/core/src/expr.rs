//! Rate-expression parsing and evaluation.
//!
//! Rates are user-supplied expression strings over the simplex coordinates
//! `xi[label]`, so model files stay self-contained and serialisable. The
//! grammar (documented in the README) is:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := '-' factor | primary
//! primary := number | xi '[' label ']' | exp '(' expr ')' | log '(' expr ')'
//!          | min '(' expr ',' expr ')' | max '(' expr ',' expr ')'
//!          | ident | '(' expr ')'
//! ```
//!
//! A bare identifier refers to a model parameter and is substituted by its
//! numeric value while parsing. Expressions compile to a flat postfix
//! program evaluated on a fixed-size stack; evaluation is pure, allocation
//! free, and safe to run concurrently.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;

const MAX_STACK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Instr {
    Const(f64),
    Xi(usize),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
enum Ast {
    Const(f64),
    Xi(usize),
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Exp(Box<Ast>),
    Log(Box<Ast>),
    Min(Box<Ast>, Box<Ast>),
    Max(Box<Ast>, Box<Ast>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// A compiled rate expression.
#[derive(Debug, Clone)]
pub struct RateExpr {
    source: String,
    ast: Ast,
    program: Vec<Instr>,
    labels: Vec<String>,
}

impl RateExpr {
    /// Parse `text` against the given state labels and parameter map.
    pub fn parse(text: &str, labels: &[String], params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            labels,
            params,
        };
        p.skip_ws();
        let ast = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        let mut program = Vec::new();
        let depth = compile(&ast, &mut program);
        if depth > MAX_STACK {
            return Err(Error::Syntax {
                position: 0,
                message: format!("expression nests deeper than {MAX_STACK}"),
            });
        }
        Ok(RateExpr {
            source: text.to_string(),
            ast,
            program,
            labels: labels.to_vec(),
        })
    }

    /// The original expression text.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Canonical text form; reparsing it yields an equivalent expression.
    pub fn pretty(&self) -> String {
        let mut s = String::new();
        print_ast(&self.ast, 0, &self.labels, &mut s);
        s
    }

    /// Evaluate at the simplex coordinates `xi` (indexed like the labels).
    #[inline]
    pub fn eval(&self, xi: &[f64]) -> f64 {
        let mut stack = [0.0f64; MAX_STACK];
        let mut top = 0usize;
        for ins in &self.program {
            match *ins {
                Instr::Const(c) => {
                    stack[top] = c;
                    top += 1;
                }
                Instr::Xi(i) => {
                    stack[top] = xi[i];
                    top += 1;
                }
                Instr::Neg => stack[top - 1] = -stack[top - 1],
                Instr::Exp => stack[top - 1] = stack[top - 1].exp(),
                Instr::Log => stack[top - 1] = stack[top - 1].ln(),
                Instr::Add => {
                    top -= 1;
                    stack[top - 1] += stack[top];
                }
                Instr::Sub => {
                    top -= 1;
                    stack[top - 1] -= stack[top];
                }
                Instr::Mul => {
                    top -= 1;
                    stack[top - 1] *= stack[top];
                }
                Instr::Div => {
                    top -= 1;
                    stack[top - 1] /= stack[top];
                }
                Instr::Min => {
                    top -= 1;
                    stack[top - 1] = stack[top - 1].min(stack[top]);
                }
                Instr::Max => {
                    top -= 1;
                    stack[top - 1] = stack[top - 1].max(stack[top]);
                }
            }
        }
        stack[0]
    }
}

impl fmt::Display for RateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

fn compile(ast: &Ast, out: &mut Vec<Instr>) -> usize {
    match ast {
        Ast::Const(c) => {
            out.push(Instr::Const(*c));
            1
        }
        Ast::Xi(i) => {
            out.push(Instr::Xi(*i));
            1
        }
        Ast::Neg(a) => {
            let d = compile(a, out);
            out.push(Instr::Neg);
            d
        }
        Ast::Exp(a) => {
            let d = compile(a, out);
            out.push(Instr::Exp);
            d
        }
        Ast::Log(a) => {
            let d = compile(a, out);
            out.push(Instr::Log);
            d
        }
        Ast::Bin(op, a, b) => {
            let da = compile(a, out);
            let db = compile(b, out);
            out.push(match op {
                BinOp::Add => Instr::Add,
                BinOp::Sub => Instr::Sub,
                BinOp::Mul => Instr::Mul,
                BinOp::Div => Instr::Div,
            });
            da.max(db + 1)
        }
        Ast::Min(a, b) => {
            let da = compile(a, out);
            let db = compile(b, out);
            out.push(Instr::Min);
            da.max(db + 1)
        }
        Ast::Max(a, b) => {
            let da = compile(a, out);
            let db = compile(b, out);
            out.push(Instr::Max);
            da.max(db + 1)
        }
    }
}

fn print_ast(ast: &Ast, parent_prec: u8, labels: &[String], out: &mut String) {
    // precedence: 1 add/sub, 2 mul/div, 3 unary
    match ast {
        Ast::Const(c) => {
            if *c < 0.0 {
                out.push_str(&format!("({c})"));
            } else {
                out.push_str(&format!("{c}"));
            }
        }
        Ast::Xi(i) => out.push_str(&format!("xi[{}]", labels[*i])),
        Ast::Neg(a) => {
            let need = parent_prec > 1;
            if need {
                out.push('(');
            }
            out.push('-');
            print_ast(a, 3, labels, out);
            if need {
                out.push(')');
            }
        }
        Ast::Exp(a) => {
            out.push_str("exp(");
            print_ast(a, 0, labels, out);
            out.push(')');
        }
        Ast::Log(a) => {
            out.push_str("log(");
            print_ast(a, 0, labels, out);
            out.push(')');
        }
        Ast::Min(a, b) | Ast::Max(a, b) => {
            out.push_str(if matches!(ast, Ast::Min(..)) {
                "min("
            } else {
                "max("
            });
            print_ast(a, 0, labels, out);
            out.push_str(", ");
            print_ast(b, 0, labels, out);
            out.push(')');
        }
        Ast::Bin(op, a, b) => {
            let prec = match op {
                BinOp::Add | BinOp::Sub => 1,
                BinOp::Mul | BinOp::Div => 2,
            };
            let need = parent_prec > prec;
            if need {
                out.push('(');
            }
            print_ast(a, prec, labels, out);
            out.push_str(match op {
                BinOp::Add => " + ",
                BinOp::Sub => " - ",
                BinOp::Mul => "*",
                BinOp::Div => "/",
            });
            // Right operand of - and / needs stricter parenthesisation.
            print_ast(b, prec + 1, labels, out);
            if need {
                out.push(')');
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    labels: &'a [String],
    params: &'a BTreeMap<String, f64>,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> Error {
        Error::Syntax {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Ast::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Ast::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.factor()?;
                lhs = Ast::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                lhs = Ast::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Ast> {
        if self.eat(b'-') {
            return Ok(Ast::Neg(Box::new(self.factor()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Ast> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.err("expected a number, identifier, or `(`")),
        }
    }

    fn number(&mut self) -> Result<Ast> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            position: start,
            message: format!("malformed number `{text}`"),
        })?;
        self.skip_ws();
        Ok(Ast::Const(value))
    }

    fn ident(&mut self) -> Result<Ast> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string();
        self.skip_ws();
        match name.as_str() {
            "xi" => {
                self.expect(b'[')?;
                let lstart = self.pos;
                while let Some(c) = self.peek() {
                    if c == b']' {
                        break;
                    }
                    self.pos += 1;
                }
                let label = std::str::from_utf8(&self.src[lstart..self.pos])
                    .unwrap()
                    .trim()
                    .to_string();
                self.expect(b']')?;
                let idx = self
                    .labels
                    .iter()
                    .position(|l| *l == label)
                    .ok_or(Error::UnknownState(label))?;
                Ok(Ast::Xi(idx))
            }
            "exp" | "log" => {
                self.expect(b'(')?;
                let a = self.expr()?;
                self.expect(b')')?;
                Ok(if name == "exp" {
                    Ast::Exp(Box::new(a))
                } else {
                    Ast::Log(Box::new(a))
                })
            }
            "min" | "max" => {
                self.expect(b'(')?;
                let a = self.expr()?;
                self.expect(b',')?;
                let b = self.expr()?;
                self.expect(b')')?;
                Ok(if name == "min" {
                    Ast::Min(Box::new(a), Box::new(b))
                } else {
                    Ast::Max(Box::new(a), Box::new(b))
                })
            }
            _ => match self.params.get(&name) {
                Some(v) => Ok(Ast::Const(*v)),
                None => Err(Error::UnknownIdentifier(name)),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels2() -> Vec<String> {
        vec!["down".to_string(), "up".to_string()]
    }

    fn parse(text: &str) -> RateExpr {
        RateExpr::parse(text, &labels2(), &BTreeMap::new()).unwrap()
    }

    #[test]
    fn constant_evaluates_everywhere() {
        let e = parse("1.0");
        assert_eq!(e.eval(&[0.3, 0.7]), 1.0);
        assert_eq!(e.eval(&[1.0, 0.0]), 1.0);
    }

    #[test]
    fn cw_rate_is_one_at_symmetric_point() {
        let e = parse("exp(1.5*(2*xi[up]-1))");
        assert!((e.eval(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
        assert!((e.eval(&[0.0, 1.0]) - 1.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn parameters_substitute_as_constants() {
        let mut params = BTreeMap::new();
        params.insert("beta".to_string(), 2.0);
        let e = RateExpr::parse("beta*xi[up]", &labels2(), &params).unwrap();
        assert!((e.eval(&[0.75, 0.25]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_state_label_is_reported() {
        let err = RateExpr::parse("xi[sideways]", &labels2(), &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::UnknownState(_)));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = RateExpr::parse("1.0 + ", &labels2(), &BTreeMap::new()).unwrap_err();
        match err {
            Error::Syntax { position, .. } => assert_eq!(position, 6),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse("2 + 3*4");
        assert_eq!(e.eval(&[0.5, 0.5]), 14.0);
        let e = parse("-2*3 - 4");
        assert_eq!(e.eval(&[0.5, 0.5]), -10.0);
        let e = parse("2 - 3 - 4");
        assert_eq!(e.eval(&[0.5, 0.5]), -5.0);
        let e = parse("min(3, max(1, 2))");
        assert_eq!(e.eval(&[0.5, 0.5]), 2.0);
    }

    #[test]
    fn pretty_print_round_trips() {
        let sources = [
            "exp(1.5*(2*xi[up]-1))",
            "1 - xi[down]/(2 + xi[up])",
            "min(1, max(xi[up], 0.5)) + log(xi[down] + 1)",
            "-(xi[up] - xi[down])*2",
            "2 - (3 - 4)",
            "1/(2/(3/4))",
        ];
        let mut pts = Vec::new();
        for i in 0..100 {
            let x = i as f64 / 99.0;
            pts.push([1.0 - x, x]);
        }
        for src in sources {
            let a = parse(src);
            let b = parse(&a.pretty());
            for p in &pts {
                let (va, vb) = (a.eval(p), b.eval(p));
                assert!(
                    (va - vb).abs() <= 1e-15 * va.abs().max(1.0),
                    "{src} -> {} differs at {p:?}",
                    a.pretty()
                );
            }
        }
    }
}
