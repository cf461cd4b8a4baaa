//! Feasibility predicates over parameter values.
//!
//! Grammar (whitespace-insensitive, keywords lowercase):
//!
//! ```text
//! expr    := and ( "or" and )*
//! and     := cmp ( "and" cmp )*
//! cmp     := sum ( ( "<" | "<=" | ">" | ">=" | "==" | "!=" ) sum )?
//! sum     := term ( ( "+" | "-" ) term )*
//! term    := unary ( ( "*" | "/" ) unary )*
//! unary   := "-" unary | atom
//! atom    := NUMBER | STRING | IDENT | "(" expr ")"
//! ```
//!
//! Identifiers name parameters and evaluate to the parameter's level.
//! Labels only support `==` and `!=` against strings; `and`/`or` need
//! boolean operands; the whole expression must be boolean.

use std::fmt;

use super::domain::{Level, ParamDomain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Arith {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Str(String),
    Var(usize),
    Neg(Box<Node>),
    Arith(Arith, Box<Node>, Box<Node>),
    Cmp(Cmp, Box<Node>, Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Num,
    Str,
    Bool,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Num => "number",
            Ty::Str => "label",
            Ty::Bool => "boolean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Str(String),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}`")))?;
            out.push(Token::Num(v));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push(match word.as_str() {
                "and" => Token::Op("and"),
                "or" => Token::Op("or"),
                _ => Token::Ident(word),
            });
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            i += 1;
            let start = i;
            while i < chars.len() && chars[i] != quote {
                i += 1;
            }
            if i == chars.len() {
                return Err(Error::Expression("unterminated string".into()));
            }
            out.push(Token::Str(chars[start..i].iter().collect()));
            i += 1;
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op2 = ["<=", ">=", "==", "!="].into_iter().find(|op| *op == two);
        if let Some(op) = op2 {
            out.push(Token::Op(op));
            i += 2;
            continue;
        }
        let tok = match c {
            '(' => Token::LParen,
            ')' => Token::RParen,
            '+' => Token::Op("+"),
            '-' => Token::Op("-"),
            '*' => Token::Op("*"),
            '/' => Token::Op("/"),
            '<' => Token::Op("<"),
            '>' => Token::Op(">"),
            _ => return Err(Error::Expression(format!("unexpected character `{c}`"))),
        };
        out.push(tok);
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    domains: &'a [ParamDomain],
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<&'static str> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(op)) => Some(op),
            _ => None,
        }
    }

    fn expect_ty(node: &(Node, Ty), want: Ty, ctx: &str) -> Result<()> {
        if node.1 != want {
            return Err(Error::Expression(format!(
                "`{ctx}` expects {want} operands, found {}",
                node.1
            )));
        }
        Ok(())
    }

    fn or(&mut self) -> Result<(Node, Ty)> {
        let mut lhs = self.and()?;
        while self.peek_op() == Some("or") {
            self.pos += 1;
            let rhs = self.and()?;
            Self::expect_ty(&lhs, Ty::Bool, "or")?;
            Self::expect_ty(&rhs, Ty::Bool, "or")?;
            lhs = (Node::Or(Box::new(lhs.0), Box::new(rhs.0)), Ty::Bool);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<(Node, Ty)> {
        let mut lhs = self.cmp()?;
        while self.peek_op() == Some("and") {
            self.pos += 1;
            let rhs = self.cmp()?;
            Self::expect_ty(&lhs, Ty::Bool, "and")?;
            Self::expect_ty(&rhs, Ty::Bool, "and")?;
            lhs = (Node::And(Box::new(lhs.0), Box::new(rhs.0)), Ty::Bool);
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<(Node, Ty)> {
        let lhs = self.sum()?;
        let op = match self.peek_op() {
            Some("<") => Cmp::Lt,
            Some("<=") => Cmp::Le,
            Some(">") => Cmp::Gt,
            Some(">=") => Cmp::Ge,
            Some("==") => Cmp::Eq,
            Some("!=") => Cmp::Ne,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.sum()?;
        match (lhs.1, rhs.1) {
            (Ty::Num, Ty::Num) => {}
            (Ty::Str, Ty::Str) if matches!(op, Cmp::Eq | Cmp::Ne) => {}
            (a, b) => {
                return Err(Error::Expression(format!(
                    "cannot compare {a} with {b} using this operator"
                )))
            }
        }
        Ok((Node::Cmp(op, Box::new(lhs.0), Box::new(rhs.0)), Ty::Bool))
    }

    fn sum(&mut self) -> Result<(Node, Ty)> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_op() {
                Some("+") => Arith::Add,
                Some("-") => Arith::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            Self::expect_ty(&lhs, Ty::Num, "+/-")?;
            Self::expect_ty(&rhs, Ty::Num, "+/-")?;
            lhs = (Node::Arith(op, Box::new(lhs.0), Box::new(rhs.0)), Ty::Num);
        }
    }

    fn term(&mut self) -> Result<(Node, Ty)> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_op() {
                Some("*") => Arith::Mul,
                Some("/") => Arith::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            Self::expect_ty(&lhs, Ty::Num, "*//")?;
            Self::expect_ty(&rhs, Ty::Num, "*//")?;
            lhs = (Node::Arith(op, Box::new(lhs.0), Box::new(rhs.0)), Ty::Num);
        }
    }

    fn unary(&mut self) -> Result<(Node, Ty)> {
        if self.peek_op() == Some("-") {
            self.pos += 1;
            let inner = self.unary()?;
            Self::expect_ty(&inner, Ty::Num, "-")?;
            return Ok((Node::Neg(Box::new(inner.0)), Ty::Num));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<(Node, Ty)> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok((Node::Num(v), Ty::Num)),
            Token::Str(s) => Ok((Node::Str(s), Ty::Str)),
            Token::Ident(name) => {
                let idx = self
                    .domains
                    .iter()
                    .position(|d| d.name() == name)
                    .ok_or_else(|| Error::Expression(format!("unknown parameter `{name}`")))?;
                let ty = if self.domains[idx].is_numeric() {
                    Ty::Num
                } else {
                    Ty::Str
                };
                Ok((Node::Var(idx), ty))
            }
            Token::LParen => {
                let inner = self.or()?;
                match self.tokens.get(self.pos) {
                    Some(Token::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(Error::Expression("expected `)`".into())),
                }
            }
            other => Err(Error::Expression(format!("unexpected token {other:?}"))),
        }
    }
}

/// A parsed, type-checked feasibility predicate.
#[derive(Debug, Clone)]
pub struct Feasibility {
    source: String,
    root: Node,
}

impl PartialEq for Feasibility {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Feasibility {
    pub fn parse(source: &str, domains: &[ParamDomain]) -> Result<Self> {
        let tokens = tokenize(source)?;
        if tokens.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let mut parser = Parser {
            tokens,
            pos: 0,
            domains,
        };
        let (root, ty) = parser.or()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expression(format!(
                "trailing input at token {}",
                parser.pos
            )));
        }
        if ty != Ty::Bool {
            return Err(Error::Expression(format!(
                "expression must be boolean, found {ty}"
            )));
        }
        Ok(Self {
            source: source.to_owned(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates the predicate at a point given as per-parameter indices.
    /// Indices must be in range.
    pub fn accepts(&self, domains: &[ParamDomain], coords: &[usize]) -> bool {
        let level = |i: usize| &domains[i].values()[coords[i]];
        eval_bool(&self.root, &level)
    }
}

fn eval_num<'a>(node: &Node, level: &impl Fn(usize) -> &'a Level) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(i) => level(*i).as_num().unwrap_or(f64::NAN),
        Node::Neg(inner) => -eval_num(inner, level),
        Node::Arith(op, a, b) => {
            let (x, y) = (eval_num(a, level), eval_num(b, level));
            match op {
                Arith::Add => x + y,
                Arith::Sub => x - y,
                Arith::Mul => x * y,
                Arith::Div => x / y,
            }
        }
        _ => f64::NAN,
    }
}

fn eval_str<'a>(node: &'a Node, level: &impl Fn(usize) -> &'a Level) -> &'a str {
    match node {
        Node::Str(s) => s,
        Node::Var(i) => level(*i).as_label().unwrap_or(""),
        _ => "",
    }
}

fn eval_bool<'a>(node: &'a Node, level: &impl Fn(usize) -> &'a Level) -> bool {
    match node {
        Node::And(a, b) => eval_bool(a, level) && eval_bool(b, level),
        Node::Or(a, b) => eval_bool(a, level) || eval_bool(b, level),
        Node::Cmp(op, a, b) => {
            if is_label(a, level) {
                let (x, y) = (eval_str(a, level), eval_str(b, level));
                match op {
                    Cmp::Eq => x == y,
                    Cmp::Ne => x != y,
                    _ => false,
                }
            } else {
                let (x, y) = (eval_num(a, level), eval_num(b, level));
                match op {
                    Cmp::Lt => x < y,
                    Cmp::Le => x <= y,
                    Cmp::Gt => x > y,
                    Cmp::Ge => x >= y,
                    Cmp::Eq => x == y,
                    Cmp::Ne => x != y,
                }
            }
        }
        _ => false,
    }
}

fn is_label<'a>(node: &Node, level: &impl Fn(usize) -> &'a Level) -> bool {
    match node {
        Node::Str(_) => true,
        Node::Var(i) => level(*i).as_label().is_some(),
        _ => false,
    }
}
