//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr := NAME | OP '(' arg (',' arg)* ')'
//! arg  := expr | number | predicate | fn-name
//! ```

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Expr;
use crate::algebra::{JoinFn, MapFn, Predicate, WindowFn};
use crate::indicators::{check_alpha, MacdParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Pred(String),
    Open,
    Close,
    Comma,
}

fn syntax(pos: usize, msg: impl Into<String>) -> Error {
    Error::Syntax {
        pos,
        msg: msg.into(),
    }
}

fn is_number_char(c: u8) -> bool {
    c.is_ascii_digit() || matches!(c, b'.' | b'e' | b'E' | b'+' | b'-')
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                out.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::Close));
                i += 1;
            }
            b',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            b'>' | b'<' | b'=' => {
                i += 1;
                if c != b'=' && i < bytes.len() && bytes[i] == b'=' {
                    i += 1;
                }
                while i < bytes.len() && bytes[i] == b' ' {
                    i += 1;
                }
                while i < bytes.len() && is_number_char(bytes[i]) {
                    i += 1;
                }
                let tok: String = text[start..i].chars().filter(|c| *c != ' ').collect();
                out.push((start, Tok::Pred(tok)));
            }
            b'0'..=b'9' | b'-' | b'+' | b'.' => {
                i += 1;
                while i < bytes.len() && is_number_char(bytes[i]) {
                    i += 1;
                }
                out.push((start, Tok::Number(text[start..i].to_string())));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character {ch:?}")));
            }
        }
    }
    Ok(out)
}

/// Untyped parse tree.
#[derive(Debug)]
enum Node {
    Name(usize, String),
    Call(usize, String, Vec<Node>),
    Number(usize, String),
    Pred(usize, String),
}

impl Node {
    fn pos(&self) -> usize {
        match self {
            Node::Name(p, _) | Node::Call(p, _, _) | Node::Number(p, _) | Node::Pred(p, _) => *p,
        }
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn node(&mut self) -> Result<Node> {
        let pos = self.pos();
        let Some((_, tok)) = self.toks.get(self.at).cloned() else {
            return Err(syntax(pos, "unexpected end of input"));
        };
        self.at += 1;
        match tok {
            Tok::Ident(name) => {
                if self.peek() != Some(&Tok::Open) {
                    return Ok(Node::Name(pos, name));
                }
                self.at += 1;
                let mut args = Vec::new();
                loop {
                    args.push(self.node()?);
                    let p = self.pos();
                    match self.toks.get(self.at).map(|(_, t)| t) {
                        Some(Tok::Comma) => self.at += 1,
                        Some(Tok::Close) => {
                            self.at += 1;
                            break;
                        }
                        _ => return Err(syntax(p, "expected ',' or ')'")),
                    }
                }
                Ok(Node::Call(pos, name, args))
            }
            Tok::Number(text) => Ok(Node::Number(pos, text)),
            Tok::Pred(text) => Ok(Node::Pred(pos, text)),
            Tok::Open | Tok::Close | Tok::Comma => Err(syntax(pos, "expected an expression")),
        }
    }
}

/// Parses an expression. Operator names and arities are checked against the
/// catalog; the result is not canonicalized.
pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        end: text.len(),
    };
    let node = p.node()?;
    if p.at != p.toks.len() {
        return Err(syntax(p.pos(), "trailing input"));
    }
    to_expr(node)
}

fn arity(op: &str, expected: &str, got: usize) -> Error {
    Error::Arity {
        op: op.to_string(),
        expected: expected.to_string(),
        got,
    }
}

fn series(node: Node) -> Result<Box<Expr>> {
    match node {
        Node::Name(..) | Node::Call(..) => Ok(Box::new(to_expr(node)?)),
        other => Err(syntax(other.pos(), "expected a series expression")),
    }
}

fn number(node: &Node) -> Result<f64> {
    match node {
        Node::Number(pos, text) => match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(syntax(*pos, format!("bad number {text:?}"))),
        },
        other => Err(syntax(other.pos(), "expected a number")),
    }
}

fn window(node: &Node) -> Result<usize> {
    let v = number(node)?;
    if v % 1.0 != 0.0 || v > u32::MAX as f64 {
        return Err(syntax(node.pos(), "window size must be an integer"));
    }
    if v < 1.0 {
        return Err(Error::BadWindow(0));
    }
    Ok(v as usize)
}

fn fn_name<T: core::str::FromStr<Err = Error>>(node: &Node) -> Result<T> {
    match node {
        Node::Name(_, name) => name.parse(),
        other => Err(syntax(other.pos(), "expected a function name")),
    }
}

fn to_expr(node: Node) -> Result<Expr> {
    let (op, args) = match node {
        Node::Name(_, name) => return Ok(Expr::Base(name)),
        Node::Call(_, op, args) => (op, args),
        other => return Err(syntax(other.pos(), "expected a series expression")),
    };
    let n = args.len();
    let fixed = |k: usize| -> Result<()> {
        if n == k {
            Ok(())
        } else {
            Err(arity(&op, &k.to_string(), n))
        }
    };
    match op.as_str() {
        "MAVG" | "MOM" | "SCALE" | "SEL" | "PROJ" => fixed(2)?,
        "EMA" | "WIN" => fixed(3)?,
        "MACD" => fixed(4)?,
        "MSUB" | "UNION" | "INTERSECT" => fixed(2)?,
        "JOIN" if n < 2 => return Err(arity(&op, "at least 2", n)),
        "JOIN" => {}
        _ => return Err(Error::UnknownOperator(op)),
    }
    let mut it = args.into_iter();
    let mut next = || it.next().expect("arity checked");
    let expr = match op.as_str() {
        "MAVG" => {
            let s = series(next())?;
            Expr::Mavg(s, window(&next())?)
        }
        "MOM" => {
            let s = series(next())?;
            Expr::Mom(s, window(&next())?)
        }
        "EMA" => {
            let s = series(next())?;
            let alpha = number(&next())?;
            check_alpha(alpha)?;
            Expr::Ema(s, alpha, window(&next())?)
        }
        "SCALE" => {
            let s = series(next())?;
            Expr::Scale(s, number(&next())?)
        }
        "MACD" => {
            let s = series(next())?;
            let fast = window(&next())?;
            let slow = window(&next())?;
            let signal = window(&next())?;
            let p = MacdParams { fast, slow, signal };
            p.validate()?;
            Expr::Macd(s, p)
        }
        "SEL" => {
            let s = series(next())?;
            let pred = match next() {
                Node::Pred(_, text) => text.parse::<Predicate>()?,
                Node::Name(_, name) if name == "TRUE" => Predicate::Always,
                other => return Err(syntax(other.pos(), "expected a predicate such as >0")),
            };
            Expr::Sel(s, pred)
        }
        "PROJ" => {
            let s = series(next())?;
            Expr::Proj(s, fn_name::<MapFn>(&next())?)
        }
        "WIN" => {
            let s = series(next())?;
            let w = window(&next())?;
            Expr::Win(s, w, fn_name::<WindowFn>(&next())?)
        }
        "MSUB" => Expr::Msub(series(next())?, series(next())?),
        "UNION" => Expr::Union(series(next())?, series(next())?),
        "INTERSECT" => Expr::Intersect(series(next())?, series(next())?),
        "JOIN" => {
            let mut nodes: Vec<Node> = (0..n).map(|_| next()).collect();
            let fun = fn_name::<JoinFn>(&nodes.pop().expect("n >= 2"))?;
            let args = nodes
                .into_iter()
                .map(|n| series(n).map(|b| *b))
                .collect::<Result<Vec<_>>>()?;
            Expr::Join(args, fun)
        }
        _ => unreachable!("operator checked above"),
    };
    Ok(expr)
}
