use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use smallvec::SmallVec;

use super::{EClassId, EGraph, ENode};
use crate::HashMap;
use crate::expr::{Op, TermId, TermStore};

pub const MAX_PATTERN_VARS: usize = 4;

/// Why a search was cut short.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Halt {
    /// `stop` fired.
    Time,
    /// A result list outgrew the cap.
    Full,
}

/// Work counter for e-matching; `stop` is polled every few hundred steps.
/// No list of partial or final matches may exceed `cap`.
pub(crate) struct Budget<'a> {
    steps: usize,
    cap: usize,
    stop: &'a mut dyn FnMut() -> bool,
}

/// E-matcher over a frozen graph. Matches of sub-patterns reached with
/// nothing bound yet are cached per class, so shared subterms are matched
/// once per search.
pub(crate) struct Matcher<'g, 'b> {
    g: &'g EGraph,
    budget: Budget<'b>,
    memo: HashMap<(*const Pattern, EClassId), Vec<Subst>>,
    root: *const Pattern,
}

impl<'g, 'b> Matcher<'g, 'b> {
    pub(crate) fn new(g: &'g EGraph, budget: Budget<'b>) -> Self {
        Matcher { g, budget, memo: HashMap::default(), root: core::ptr::null() }
    }

    /// Matches of `p` rooted at `class`, sorted. On [`Halt::Full`] `out`
    /// still holds the matches found before the cap was reached.
    pub(crate) fn match_class(&mut self, p: &Pattern, class: EClassId, out: &mut Vec<Subst>) -> Result<(), Halt> {
        self.root = p;
        let r = self.match_into(p, self.g.find(class), Subst::default(), out);
        out.sort_unstable();
        out.dedup();
        r
    }

    fn match_into(&mut self, p: &Pattern, class: EClassId, subst: Subst, out: &mut Vec<Subst>) -> Result<(), Halt> {
        self.budget.tick(out.len())?;
        let g = self.g;
        let (op, kids) = match p {
            Pattern::Var(v) => {
                match subst.get(*v) {
                    None => {
                        let mut s = subst;
                        s.set(*v, class);
                        out.push(s);
                    }
                    Some(bound) if g.find(bound) == class => out.push(subst),
                    Some(_) => {}
                }
                return Ok(());
            }
            Pattern::Node(op, kids) => (op, kids),
        };
        // Fully bound: a hashcons probe replaces the scan.
        if let Some(found) = p.ground_class(g, &subst) {
            if found == Some(class) {
                out.push(subst);
            }
            return Ok(());
        }
        let key = (p as *const Pattern, class);
        let fresh = subst == Subst::default() && key.0 != self.root;
        if fresh {
            if let Some(hit) = self.memo.get(&key) {
                self.budget.room(out.len() + hit.len())?;
                out.extend_from_slice(hit);
                return Ok(());
            }
        }
        let start = out.len();

        // A ground child pins candidates to the parents of its class.
        let mut anchor = None;
        for (j, k) in kids.iter().enumerate() {
            match k.ground_class(g, &subst) {
                Some(Some(c)) => {
                    anchor = Some((j, c));
                    break;
                }
                Some(None) => return Ok(()),
                None => {}
            }
        }
        let own = &g.class(class).nodes;
        let via_parents = anchor.filter(|(_, c)| g.class(*c).parents.len() < own.len());
        let candidates: Vec<&ENode> = match via_parents {
            Some((j, c)) => g
                .class(c)
                .parents
                .iter()
                .filter(|(n, at)| n.op == *op && n.children[j] == c && g.find(*at) == class)
                .map(|(n, _)| n)
                .collect(),
            None => {
                // Rebuilt classes keep their nodes sorted, hence grouped by op.
                let lo = if g.is_clean() { own.partition_point(|n| n.op < *op) } else { 0 };
                own[lo..].iter().filter(|n| n.op == *op).collect()
            }
        };

        for node in candidates {
            let mut partial: SmallVec<[Subst; 4]> = SmallVec::new();
            partial.push(subst);
            for (kid, &child) in kids.iter().zip(&node.children) {
                let mut next = Vec::new();
                for s in partial.drain(..) {
                    self.match_into(kid, g.find(child), s, &mut next)?;
                }
                partial.extend(next);
                if partial.is_empty() {
                    break;
                }
            }
            self.budget.room(out.len() + partial.len())?;
            out.extend(partial);
        }
        if fresh {
            self.memo.insert(key, out[start..].to_vec());
        }
        Ok(())
    }
}

impl<'a> Budget<'a> {
    pub(crate) fn new(cap: usize, stop: &'a mut dyn FnMut() -> bool) -> Self {
        Budget { steps: 0, cap, stop }
    }

    fn tick(&mut self, len: usize) -> Result<(), Halt> {
        self.room(len)?;
        self.steps += 1;
        if self.steps.is_multiple_of(512) && (self.stop)() {
            return Err(Halt::Time);
        }
        Ok(())
    }

    fn room(&self, len: usize) -> Result<(), Halt> {
        if len > self.cap {
            return Err(Halt::Full);
        }
        Ok(())
    }
}

/// Pattern variable; `PatVar(0)` prints as `a`, `PatVar(1)` as `b`, ...
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PatVar(pub u8);

impl fmt::Display for PatVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", (b'a' + self.0) as char)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Pattern {
    Var(PatVar),
    Node(Op, Box<[Pattern]>),
}

/// Bindings of pattern variables to classes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Subst([Option<EClassId>; MAX_PATTERN_VARS]);

impl Subst {
    pub fn get(&self, v: PatVar) -> Option<EClassId> {
        self.0[v.0 as usize]
    }

    pub fn set(&mut self, v: PatVar, id: EClassId) {
        self.0[v.0 as usize] = Some(id);
    }

    pub fn canonical(&self, g: &EGraph) -> Subst {
        Subst(self.0.map(|slot| slot.map(|id| g.find(id))))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(v) => write!(f, "{v}"),
            Pattern::Node(op, kids) if kids.is_empty() => write!(f, "{op}"),
            Pattern::Node(op, kids) => {
                write!(f, "({op}")?;
                for k in kids.iter() {
                    write!(f, " {k}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Pattern {
    /// Tree pattern from a term; variables `a`, `b`, `c`, `d` become pattern
    /// variables, any other variable name is rejected.
    pub(crate) fn from_term(store: &TermStore, root: TermId) -> Option<Pattern> {
        let node = store.node(root);
        match &node.op {
            Op::Var(name) => {
                let bytes = name.as_bytes();
                match bytes {
                    [c] if (b'a'..b'a' + MAX_PATTERN_VARS as u8).contains(c) => {
                        Some(Pattern::Var(PatVar(c - b'a')))
                    }
                    _ => None,
                }
            }
            op => {
                let kids = node
                    .children
                    .iter()
                    .map(|&c| Pattern::from_term(store, c))
                    .collect::<Option<Vec<_>>>()?;
                Some(Pattern::Node(op.clone(), kids.into_boxed_slice()))
            }
        }
    }

    pub fn vars(&self) -> Vec<PatVar> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<PatVar>) {
        match self {
            Pattern::Var(v) => out.push(*v),
            Pattern::Node(_, kids) => kids.iter().for_each(|k| k.collect_vars(out)),
        }
    }

    /// Evaluates the pattern as a Boolean function of its variables.
    pub fn eval(&self, env: &[bool; MAX_PATTERN_VARS]) -> bool {
        match self {
            Pattern::Var(v) => env[v.0 as usize],
            Pattern::Node(Op::Const(b), _) => *b,
            Pattern::Node(Op::Not, k) => !k[0].eval(env),
            Pattern::Node(Op::And, k) => k[0].eval(env) & k[1].eval(env),
            Pattern::Node(Op::Or, k) => k[0].eval(env) | k[1].eval(env),
            Pattern::Node(op, _) => unreachable!("operator {op} has no pattern semantics"),
        }
    }

    /// Every substitution under which this pattern is represented in `class`.
    pub fn match_class(&self, g: &EGraph, class: EClassId) -> Vec<Subst> {
        let mut never = || false;
        let mut out = Vec::new();
        let done = Matcher::new(g, Budget::new(usize::MAX, &mut never)).match_class(self, class, &mut out);
        debug_assert!(done.is_ok());
        out
    }

    /// Class of this pattern under `subst` if every variable is bound:
    /// `Some(None)` when the instantiation is absent from the graph.
    fn ground_class(&self, g: &EGraph, subst: &Subst) -> Option<Option<EClassId>> {
        match self {
            Pattern::Var(v) => subst.get(*v).map(|id| Some(g.find(id))),
            Pattern::Node(op, kids) => {
                let mut children: SmallVec<[EClassId; 2]> = SmallVec::new();
                let mut present = true;
                for k in kids.iter() {
                    match k.ground_class(g, subst)? {
                        Some(id) => children.push(id),
                        None => present = false,
                    }
                }
                if !present {
                    return Some(None);
                }
                Some(g.lookup(&ENode { op: op.clone(), children }))
            }
        }
    }

    /// Adds the instantiation of this pattern under `subst`.
    /// Returns the class and the number of new e-nodes.
    pub(crate) fn instantiate(&self, g: &mut EGraph, subst: &Subst) -> (EClassId, usize) {
        match self {
            Pattern::Var(v) => (subst.get(*v).expect("rule variables are bound by the lhs"), 0),
            Pattern::Node(op, kids) => {
                let mut fresh = 0;
                let children: SmallVec<[EClassId; 2]> = kids
                    .iter()
                    .map(|k| {
                        let (id, n) = k.instantiate(g, subst);
                        fresh += n;
                        id
                    })
                    .collect();
                let (id, new) = g.add(ENode { op: op.clone(), children });
                (id, fresh + new as usize)
            }
        }
    }
}

impl EGraph {
    /// All (class, substitution) pairs where `pattern` is represented,
    /// in ascending class order.
    pub fn ematch(&self, pattern: &Pattern) -> Vec<(EClassId, Subst)> {
        let mut out = Vec::new();
        let mut never = || false;
        let mut m = Matcher::new(self, Budget::new(usize::MAX, &mut never));
        let mut found = Vec::new();
        for class in self.classes() {
            found.clear();
            let done = m.match_class(pattern, class.id, &mut found);
            debug_assert!(done.is_ok());
            out.extend(found.iter().map(|&s| (class.id, s)));
        }
        out
    }
}

#[cfg(test)]
pub(crate) fn var(i: u8) -> Pattern {
    Pattern::Var(PatVar(i))
}

#[cfg(test)]
pub(crate) fn node(op: Op, kids: &[Pattern]) -> Pattern {
    Pattern::Node(op, kids.to_vec().into_boxed_slice())
}

#[cfg(test)]
pub(crate) fn leaf(op: Op) -> Pattern {
    Pattern::Node(op, Box::default())
}
