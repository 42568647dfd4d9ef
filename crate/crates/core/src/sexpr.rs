//! S-expression form of terms: `(| (& x y) (& x z))`.
//!
//! Operators are `&`, `|`, `!` and `concat`; atoms are identifiers or the
//! constants `0` and `1`. Parsing never simplifies.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::expr::{Op, StructureError, TermId, TermStore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SexprError {
    #[error("unbalanced parentheses at byte {0}")]
    Unbalanced(usize),
    #[error("unknown operator `{op}` at byte {at}")]
    UnknownOperator { op: String, at: usize },
    #[error("empty list at byte {0}")]
    EmptyList(usize),
    #[error("invalid atom `{atom}` at byte {at}")]
    InvalidAtom { atom: String, at: usize },
    #[error("trailing input at byte {0}")]
    Trailing(usize),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Renders the tree expansion of `root`.
pub fn term_to_sexpr(store: &TermStore, root: TermId) -> String {
    enum Step {
        Enter(TermId),
        Close,
    }
    let mut out = String::new();
    let mut stack = alloc::vec![Step::Enter(root)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Close => out.push(')'),
            Step::Enter(id) => {
                if !out.is_empty() && !out.ends_with('(') {
                    out.push(' ');
                }
                let node = store.node(id);
                if node.op.is_leaf() {
                    out.push_str(node.op.symbol());
                } else {
                    out.push('(');
                    out.push_str(node.op.symbol());
                    stack.push(Step::Close);
                    for &c in node.children.iter().rev() {
                        stack.push(Step::Enter(c));
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug)]
enum Token<'a> {
    Open(usize),
    Close(usize),
    Atom(&'a str, usize),
}

fn tokenize(s: &str) -> Vec<Token<'_>> {
    let mut toks = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                toks.push(Token::Open(i));
                i += 1;
            }
            b')' => {
                toks.push(Token::Close(i));
                i += 1;
            }
            b if b.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                    i += 1;
                }
                toks.push(Token::Atom(&s[start..i], start));
            }
        }
    }
    toks
}

fn is_identifier(atom: &str) -> bool {
    let mut chars = atom.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '[' | ']' | '.'))
}

fn leaf(store: &mut TermStore, atom: &str, at: usize) -> Result<TermId, SexprError> {
    match atom {
        "0" => Ok(store.constant(false)),
        "1" => Ok(store.constant(true)),
        a if is_identifier(a) => Ok(store.var(a)),
        a => Err(SexprError::InvalidAtom { atom: a.to_string(), at }),
    }
}

/// Parses one term into `store`.
pub fn sexpr_to_term(store: &mut TermStore, s: &str) -> Result<TermId, SexprError> {
    let toks = tokenize(s);
    // Open frames: (operator, children so far).
    let mut frames: Vec<(Op, Vec<TermId>)> = Vec::new();
    let mut result: Option<TermId> = None;
    let mut i = 0;
    while i < toks.len() {
        if result.is_some() {
            let at = match toks[i] {
                Token::Open(a) | Token::Close(a) | Token::Atom(_, a) => a,
            };
            return Err(SexprError::Trailing(at));
        }
        let finished = match toks[i] {
            Token::Open(at) => {
                let op = match toks.get(i + 1) {
                    Some(Token::Atom(op, op_at)) => match *op {
                        "&" => Op::And,
                        "|" => Op::Or,
                        "!" => Op::Not,
                        "concat" => Op::Concat,
                        other => return Err(SexprError::UnknownOperator { op: other.to_string(), at: *op_at }),
                    },
                    Some(Token::Close(_)) => return Err(SexprError::EmptyList(at)),
                    Some(Token::Open(a)) => {
                        return Err(SexprError::UnknownOperator { op: "(".to_string(), at: *a })
                    }
                    None => return Err(SexprError::Unbalanced(at)),
                };
                frames.push((op, Vec::new()));
                i += 2;
                continue;
            }
            Token::Close(at) => {
                let (op, children) = frames.pop().ok_or(SexprError::Unbalanced(at))?;
                store.intern(op, &children)?
            }
            Token::Atom(atom, at) => leaf(store, atom, at)?,
        };
        i += 1;
        match frames.last_mut() {
            Some((_, children)) => children.push(finished),
            None => result = Some(finished),
        }
    }
    if !frames.is_empty() {
        return Err(SexprError::Unbalanced(s.len()));
    }
    result.ok_or(SexprError::Empty)
}
