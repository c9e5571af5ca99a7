//! Proposition syntax: labels, the AST, parsing and printing, and the
//! structural queries used by the compiler and the operator oracle.
//!
//! Surface grammar:
//!
//! ```text
//! expr    := unary (op unary)*        -- one operator kind per bracket level
//! op      := '&' | '^'                -- sequential AND / sequential XOR
//! unary   := '!' unary | primary
//! primary := ident | '(' expr ')'
//! ident   := [A-Za-z][A-Za-z0-9_]*
//! ```
//!
//! Binary operators are left-associative. Mixing `&` and `^` without
//! parentheses is a syntax error.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ElementaryLabel(String);

impl ElementaryLabel {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let mut chars = name.chars();
        let ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if ok {
            Ok(Self(name))
        } else {
            Err(Error::InvalidLabel(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ElementaryLabel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<ElementaryLabel> for String {
    fn from(l: ElementaryLabel) -> String {
        l.0
    }
}

impl fmt::Display for ElementaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Proposition {
    Elementary(ElementaryLabel),
    Not(Box<Proposition>),
    SeqAnd(Box<Proposition>, Box<Proposition>),
    SeqXor(Box<Proposition>, Box<Proposition>),
}

/// Position of a node in the post-order traversal (children before parents,
/// left before right) of a proposition tree, leaves included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepKind {
    Not { operand: NodeId },
    SeqAnd { left: NodeId, right: NodeId },
}

/// One internal node of the reduction protocol, in execution order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionStep {
    pub id: NodeId,
    pub kind: StepKind,
    pub node: Proposition,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Leaf {
    pub id: NodeId,
    pub label: ElementaryLabel,
}

impl Proposition {
    pub fn elementary(name: &str) -> Result<Self> {
        Ok(Self::Elementary(ElementaryLabel::new(name)?))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Self) -> Self {
        Self::Not(Box::new(p))
    }

    pub fn and(l: Self, r: Self) -> Self {
        Self::SeqAnd(Box::new(l), Box::new(r))
    }

    pub fn xor(l: Self, r: Self) -> Self {
        Self::SeqXor(Box::new(l), Box::new(r))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).parse()
    }

    /// Re-associates chains of the same binary operator to left-nested form.
    pub fn canonicalize(&self) -> Self {
        match self {
            Self::Elementary(_) => self.clone(),
            Self::Not(c) => Self::not(c.canonicalize()),
            Self::SeqAnd(..) | Self::SeqXor(..) => {
                let mut operands = Vec::new();
                self.flatten_chain(self.is_and(), &mut operands);
                let mut it = operands.into_iter().map(|p| p.canonicalize());
                let first = it.next().expect("binary chain has operands");
                it.fold(first, |acc, p| {
                    if self.is_and() {
                        Self::and(acc, p)
                    } else {
                        Self::xor(acc, p)
                    }
                })
            }
        }
    }

    fn is_and(&self) -> bool {
        matches!(self, Self::SeqAnd(..))
    }

    fn flatten_chain<'a>(&'a self, and: bool, out: &mut Vec<&'a Proposition>) {
        match self {
            Self::SeqAnd(l, r) if and => {
                l.flatten_chain(and, out);
                r.flatten_chain(and, out);
            }
            Self::SeqXor(l, r) if !and => {
                l.flatten_chain(and, out);
                r.flatten_chain(and, out);
            }
            _ => out.push(self),
        }
    }

    pub fn count_seq_ands(&self) -> usize {
        match self {
            Self::Elementary(_) => 0,
            Self::Not(c) => c.count_seq_ands(),
            Self::SeqAnd(l, r) => 1 + l.count_seq_ands() + r.count_seq_ands(),
            Self::SeqXor(l, r) => l.count_seq_ands() + r.count_seq_ands(),
        }
    }

    pub fn count_nots(&self) -> usize {
        match self {
            Self::Elementary(_) => 0,
            Self::Not(c) => 1 + c.count_nots(),
            Self::SeqAnd(l, r) | Self::SeqXor(l, r) => l.count_nots() + r.count_nots(),
        }
    }

    pub fn contains_xor(&self) -> bool {
        match self {
            Self::Elementary(_) => false,
            Self::Not(c) => c.contains_xor(),
            Self::SeqAnd(l, r) => l.contains_xor() || r.contains_xor(),
            Self::SeqXor(..) => true,
        }
    }

    /// Leaf labels in left-to-right order, repeats included.
    pub fn leaf_labels(&self) -> Vec<ElementaryLabel> {
        self.leaves().into_iter().map(|l| l.label).collect()
    }

    pub fn leaves(&self) -> Vec<Leaf> {
        let mut out = Vec::new();
        self.walk(&mut 0, &mut |id, node| {
            if let Self::Elementary(label) = node {
                out.push(Leaf {
                    id,
                    label: label.clone(),
                });
            }
        });
        out
    }

    /// Post-order id of the root.
    pub fn root_id(&self) -> NodeId {
        let mut last = NodeId(0);
        self.walk(&mut 0, &mut |id, _| last = id);
        last
    }

    /// Post-order list of the `Not` and `SeqAnd` nodes; the order in which the
    /// second protocol stage reduces them.
    pub fn reduction_schedule(&self) -> Result<Vec<ReductionStep>> {
        if self.contains_xor() {
            return Err(Error::UnsupportedXor);
        }
        let mut steps = Vec::new();
        self.schedule_into(&mut 0, &mut steps);
        Ok(steps)
    }

    fn schedule_into(&self, next: &mut usize, steps: &mut Vec<ReductionStep>) -> NodeId {
        let kind = match self {
            Self::Elementary(_) => None,
            Self::Not(c) => Some(StepKind::Not {
                operand: c.schedule_into(next, steps),
            }),
            Self::SeqAnd(l, r) => {
                let left = l.schedule_into(next, steps);
                let right = r.schedule_into(next, steps);
                Some(StepKind::SeqAnd { left, right })
            }
            Self::SeqXor(..) => unreachable!("checked by caller"),
        };
        let id = NodeId(*next);
        *next += 1;
        if let Some(kind) = kind {
            steps.push(ReductionStep {
                id,
                kind,
                node: self.clone(),
            });
        }
        id
    }

    fn walk(&self, next: &mut usize, f: &mut impl FnMut(NodeId, &Proposition)) {
        match self {
            Self::Elementary(_) => {}
            Self::Not(c) => c.walk(next, f),
            Self::SeqAnd(l, r) | Self::SeqXor(l, r) => {
                l.walk(next, f);
                r.walk(next, f);
            }
        }
        f(NodeId(*next), self);
        *next += 1;
    }

    /// Boolean reduction: ⊓ as AND, ¬ as NOT, ⊕_seq as XOR.
    pub fn classical_eval(&self, truth: &HashMap<ElementaryLabel, bool>) -> Result<bool> {
        Ok(match self {
            Self::Elementary(l) => *truth
                .get(l)
                .ok_or_else(|| Error::MissingLabel(l.to_string()))?,
            Self::Not(c) => !c.classical_eval(truth)?,
            Self::SeqAnd(l, r) => l.classical_eval(truth)? & r.classical_eval(truth)?,
            Self::SeqXor(l, r) => l.classical_eval(truth)? ^ r.classical_eval(truth)?,
        })
    }

    fn fmt_operand(&self, parent_and: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SeqAnd(..) if parent_and => write!(f, "{self}"),
            Self::SeqXor(..) if !parent_and => write!(f, "{self}"),
            Self::SeqAnd(..) | Self::SeqXor(..) => write!(f, "({self})"),
            _ => write!(f, "{self}"),
        }
    }
}

/// Minimal-parentheses rendering. Same-operator chains print flat, so the
/// output always parses back to the canonical (left-nested) tree.
impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Elementary(l) => write!(f, "{l}"),
            Self::Not(c) => match **c {
                Self::SeqAnd(..) | Self::SeqXor(..) => write!(f, "!({c})"),
                _ => write!(f, "!{c}"),
            },
            Self::SeqAnd(l, r) => {
                l.fmt_operand(true, f)?;
                f.write_str("&")?;
                r.fmt_operand(true, f)
            }
            Self::SeqXor(l, r) => {
                l.fmt_operand(false, f)?;
                f.write_str("^")?;
                r.fmt_operand(false, f)
            }
        }
    }
}

impl FromStr for Proposition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tok<'a> {
    Ident(&'a str),
    Bang,
    Amp,
    Caret,
    LParen,
    RParen,
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<(usize, Tok<'a>)>,
    pos: usize,
}

fn syntax(pos: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        pos,
        message: message.into(),
    }
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text,
            tokens: Vec::new(),
            pos: 0,
        }
    }

    fn lex(&mut self) -> Result<()> {
        let bytes = self.text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let b = bytes[i];
            let tok = match b {
                b if b.is_ascii_whitespace() => {
                    i += 1;
                    continue;
                }
                b'!' => Tok::Bang,
                b'&' => Tok::Amp,
                b'^' => Tok::Caret,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b if b.is_ascii_alphabetic() => {
                    let start = i;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                        i += 1;
                    }
                    self.tokens.push((start, Tok::Ident(&self.text[start..i])));
                    continue;
                }
                _ => {
                    let ch = self.text[i..].chars().next().unwrap_or('?');
                    return Err(syntax(i, format!("unexpected character {ch:?}")));
                }
            };
            self.tokens.push((i, tok));
            i += 1;
        }
        Ok(())
    }

    fn parse(mut self) -> Result<Proposition> {
        self.lex()?;
        if self.tokens.is_empty() {
            return Err(syntax(0, "empty proposition"));
        }
        let p = self.expr()?;
        match self.peek() {
            None => Ok(p),
            Some((at, Tok::RParen)) => Err(syntax(at, "unmatched `)`")),
            Some((at, _)) => Err(syntax(at, "expected operator or end of input")),
        }
    }

    fn peek(&self) -> Option<(usize, Tok<'a>)> {
        self.tokens.get(self.pos).copied()
    }

    fn end(&self) -> usize {
        self.text.len()
    }

    fn expr(&mut self) -> Result<Proposition> {
        let mut lhs = self.unary()?;
        let mut chain_op: Option<Tok> = None;
        while let Some((at, tok @ (Tok::Amp | Tok::Caret))) = self.peek() {
            match chain_op {
                Some(prev) if prev != tok => {
                    return Err(syntax(
                        at,
                        "mixing `&` and `^` at one level requires parentheses",
                    ))
                }
                _ => chain_op = Some(tok),
            }
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if tok == Tok::Amp {
                Proposition::and(lhs, rhs)
            } else {
                Proposition::xor(lhs, rhs)
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Proposition> {
        match self.peek() {
            Some((_, Tok::Bang)) => {
                self.pos += 1;
                Ok(Proposition::not(self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Proposition> {
        match self.peek() {
            Some((_, Tok::Ident(name))) => {
                self.pos += 1;
                Proposition::elementary(name)
            }
            Some((open, Tok::LParen)) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some((_, Tok::RParen)) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    Some((at, _)) => Err(syntax(at, "expected `)`")),
                    None => Err(syntax(
                        self.end(),
                        format!("unclosed `(` opened at position {open}"),
                    )),
                }
            }
            Some((at, Tok::RParen)) => Err(syntax(at, "expected operand, found `)`")),
            Some((at, Tok::Amp | Tok::Caret)) => {
                Err(syntax(at, "expected operand before binary operator"))
            }
            Some((_, Tok::Bang)) => unreachable!("handled in unary"),
            None => Err(syntax(self.end(), "expected operand at end of input")),
        }
    }
}
