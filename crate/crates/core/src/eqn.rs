//! Reader and writer for the equation (`.eqn`) circuit format.
//!
//! ```text
//! INORDER = x y z;
//! OUTORDER = f;
//! f = x * y + x * z;
//! ```
//!
//! Precedence is `!` over `*` over `+`, binary operators associate to the
//! left, `0`/`1` are constants and lines starting with `#` are comments.
//! Intermediate names are inlined while parsing, so a parsed [`Circuit`]
//! only refers to its inputs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::expr::{Name, Op, TermId, TermStore};
use crate::HashMap;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EqnErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undefined identifier `{0}`")]
    Undefined(String),
    #[error("duplicate definition of `{0}`")]
    Duplicate(String),
    #[error("output `{0}` is never assigned")]
    MissingOutput(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct EqnError {
    pub line: usize,
    pub col: usize,
    pub kind: EqnErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Const(bool),
    Inorder,
    Outorder,
    Eq,
    Semi,
    Star,
    Plus,
    Bang,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Const(b) => format!("constant `{}`", *b as u8),
            Tok::Inorder => "INORDER".to_string(),
            Tok::Outorder => "OUTORDER".to_string(),
            Tok::Eq => "`=`".to_string(),
            Tok::Semi => "`;`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::Plus => "`+`".to_string(),
            Tok::Bang => "`!`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '[' | ']' | '.')
}

fn lex(text: &str) -> Result<Vec<Spanned>, EqnError> {
    let mut out = Vec::new();
    for (lno, line) in text.lines().enumerate() {
        let line_no = lno + 1;
        if line.trim_start().starts_with('#') {
            continue;
        }
        let mut chars = line.char_indices().peekable();
        while let Some(&(i, c)) = chars.peek() {
            let col = line[..i].chars().count() + 1;
            let single = match c {
                '=' => Some(Tok::Eq),
                ';' => Some(Tok::Semi),
                '*' => Some(Tok::Star),
                '+' => Some(Tok::Plus),
                '!' => Some(Tok::Bang),
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                _ => None,
            };
            if let Some(tok) = single {
                chars.next();
                out.push(Spanned { tok, line: line_no, col });
                continue;
            }
            if c.is_whitespace() {
                chars.next();
                continue;
            }
            let word_end = |chars: &mut core::iter::Peekable<core::str::CharIndices<'_>>| {
                while let Some(&(_, c)) = chars.peek() {
                    if is_ident_continue(c) {
                        chars.next();
                    } else {
                        break;
                    }
                }
                chars.peek().map_or(line.len(), |&(j, _)| j)
            };
            if is_ident_start(c) {
                let end = word_end(&mut chars);
                let word = &line[i..end];
                let tok = match word {
                    "INORDER" => Tok::Inorder,
                    "OUTORDER" => Tok::Outorder,
                    _ => Tok::Ident(word.to_string()),
                };
                out.push(Spanned { tok, line: line_no, col });
            } else if c.is_ascii_digit() {
                let end = word_end(&mut chars);
                let tok = match &line[i..end] {
                    "0" => Tok::Const(false),
                    "1" => Tok::Const(true),
                    other => {
                        return Err(EqnError {
                            line: line_no,
                            col,
                            kind: EqnErrorKind::Syntax(format!("invalid token `{other}`")),
                        })
                    }
                };
                out.push(Spanned { tok, line: line_no, col });
            } else {
                return Err(EqnError {
                    line: line_no,
                    col,
                    kind: EqnErrorKind::Syntax(format!("unexpected character `{c}`")),
                });
            }
        }
    }
    let (line, col) = match text.lines().enumerate().last() {
        Some((i, l)) => (i + 1, l.chars().count() + 1),
        None => (1, 1),
    };
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    store: TermStore,
    env: HashMap<String, TermId>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, at: &Spanned, kind: EqnErrorKind) -> EqnError {
        EqnError { line: at.line, col: at.col, kind }
    }

    fn unexpected(&self, expected: &str) -> EqnError {
        let at = &self.toks[self.pos];
        self.error_at(at, EqnErrorKind::Syntax(format!("expected {expected}, found {}", at.tok.describe())))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Spanned, EqnError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn ident(&mut self) -> Result<(String, Spanned), EqnError> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump())),
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn decl(&mut self) -> Result<Vec<(String, Spanned)>, EqnError> {
        self.bump();
        self.expect(Tok::Eq, "`=`")?;
        let mut names = vec![self.ident()?];
        while matches!(self.peek(), Tok::Ident(_)) {
            names.push(self.ident()?);
        }
        self.expect(Tok::Semi, "`;`")?;
        Ok(names)
    }

    fn expr(&mut self) -> Result<TermId, EqnError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Plus {
            self.bump();
            let rhs = self.and()?;
            lhs = self.store.or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<TermId, EqnError> {
        let mut lhs = self.not()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.not()?;
            lhs = self.store.and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<TermId, EqnError> {
        let mut bangs = 0usize;
        while *self.peek() == Tok::Bang {
            self.bump();
            bangs += 1;
        }
        let mut t = self.atom()?;
        for _ in 0..bangs {
            t = self.store.not(t);
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<TermId, EqnError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let at = self.bump();
                self.env
                    .get(&name)
                    .copied()
                    .ok_or_else(|| self.error_at(&at, EqnErrorKind::Undefined(name)))
            }
            Tok::Const(b) => {
                self.bump();
                Ok(self.store.constant(b))
            }
            Tok::LParen => {
                self.bump();
                let t = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

/// Parses equation text into a circuit with fully inlined output roots.
pub fn parse_eqn(text: &str) -> Result<Circuit, EqnError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, store: TermStore::new(), env: HashMap::default() };

    let mut inputs: Vec<Name> = Vec::new();
    let mut outorder: Vec<(String, Spanned)> = Vec::new();
    let mut defined: BTreeSet<String> = BTreeSet::new();
    loop {
        match p.peek() {
            Tok::Inorder => {
                for (name, at) in p.decl()? {
                    if !defined.insert(name.clone()) {
                        return Err(p.error_at(&at, EqnErrorKind::Duplicate(name)));
                    }
                    let id = p.store.var(&name);
                    p.env.insert(name.clone(), id);
                    inputs.push(Name::new(&name));
                }
            }
            Tok::Outorder => {
                for (name, at) in p.decl()? {
                    if outorder.iter().any(|(n, _)| *n == name) {
                        return Err(p.error_at(&at, EqnErrorKind::Duplicate(name)));
                    }
                    outorder.push((name, at));
                }
            }
            _ => break,
        }
    }

    let mut assigned: BTreeSet<String> = BTreeSet::new();
    while *p.peek() != Tok::Eof {
        let (lhs, at) = p.ident()?;
        if defined.contains(&lhs) {
            return Err(p.error_at(&at, EqnErrorKind::Duplicate(lhs)));
        }
        p.expect(Tok::Eq, "`=`")?;
        let rhs = p.expr()?;
        p.expect(Tok::Semi, "`;`")?;
        defined.insert(lhs.clone());
        assigned.insert(lhs.clone());
        p.env.insert(lhs, rhs);
    }

    let mut outputs = Vec::with_capacity(outorder.len());
    for (name, at) in &outorder {
        if !assigned.contains(name) {
            return Err(p.error_at(at, EqnErrorKind::MissingOutput(name.clone())));
        }
        outputs.push((Name::new(name), p.env[name]));
    }
    let eof = p.toks.last().cloned().expect("token stream ends with EOF");
    Circuit::new(p.store, inputs, outputs)
        .map_err(|e| EqnError { line: eof.line, col: eof.col, kind: e.into() })
}

const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_ATOM: u8 = 3;

/// Prints a circuit in equation format.
///
/// Subterms referenced more than once get a fresh intermediate name
/// (`t0`, `t1`, ...); everything else is inlined.
pub fn write_eqn(circuit: &Circuit) -> String {
    let store = &circuit.store;
    let roots: Vec<TermId> = circuit.outputs().iter().map(|(_, r)| *r).collect();
    let order = store.reachable_from(&roots);

    let mut refs = vec![0usize; store.len()];
    for &id in &order {
        for c in store.children(id) {
            refs[c.index()] += 1;
        }
    }
    for r in &roots {
        refs[r.index()] += 1;
    }

    let taken: BTreeSet<&str> = circuit
        .inputs()
        .iter()
        .map(|n| n.as_str())
        .chain(circuit.outputs().iter().map(|(n, _)| n.as_str()))
        .collect();
    let mut fresh = 0usize;
    let mut next_name = || loop {
        let candidate = format!("t{fresh}");
        fresh += 1;
        if !taken.contains(candidate.as_str()) {
            return candidate;
        }
    };

    let mut rendered: Vec<Option<(String, u8)>> = vec![None; store.len()];
    let mut body = String::new();
    for &id in &order {
        let node = store.node(id);
        let (text, prec) = match &node.op {
            Op::Var(name) => (name.to_string(), PREC_ATOM),
            Op::Const(b) => ((*b as u8).to_string(), PREC_ATOM),
            Op::Not => {
                let (c, p) = take(&mut rendered, &refs, node.children[0]);
                (format!("!{}", paren(c, p < PREC_ATOM)), PREC_ATOM)
            }
            Op::And | Op::Or => {
                let (prec, sym) = if node.op == Op::And { (PREC_AND, " * ") } else { (PREC_OR, " + ") };
                let (l, lp) = take(&mut rendered, &refs, node.children[0]);
                let (r, rp) = take(&mut rendered, &refs, node.children[1]);
                (format!("{}{sym}{}", paren(l, lp < prec), paren(r, rp <= prec)), prec)
            }
            Op::Concat => unreachable!("circuit outputs are never CONCAT"),
        };
        if !node.op.is_leaf() && refs[id.index()] >= 2 {
            let name = next_name();
            let _ = writeln!(body, "{name} = {text};");
            rendered[id.index()] = Some((name, PREC_ATOM));
        } else {
            rendered[id.index()] = Some((text, prec));
        }
    }

    let mut out = String::new();
    if !circuit.inputs().is_empty() {
        out.push_str("INORDER =");
        for i in circuit.inputs() {
            out.push(' ');
            out.push_str(i);
        }
        out.push_str(";\n");
    }
    if !circuit.outputs().is_empty() {
        out.push_str("OUTORDER =");
        for (o, _) in circuit.outputs() {
            out.push(' ');
            out.push_str(o);
        }
        out.push_str(";\n");
    }
    out.push_str(&body);
    for (name, root) in circuit.outputs() {
        let text = match &rendered[root.index()] {
            Some((t, _)) => t.clone(),
            None => unreachable!("output roots are rendered"),
        };
        let _ = writeln!(out, "{name} = {text};");
    }
    out
}

// Leaves and named nodes can be referenced many times; everything else is
// used exactly once and can be moved out.
fn take(rendered: &mut [Option<(String, u8)>], refs: &[usize], id: TermId) -> (String, u8) {
    let slot = &mut rendered[id.index()];
    if refs[id.index()] >= 2 {
        slot.clone().expect("children are rendered first")
    } else {
        slot.take().expect("children are rendered first")
    }
}

fn paren(s: String, wrap: bool) -> String {
    if wrap {
        format!("({s})")
    } else {
        s
    }
}
