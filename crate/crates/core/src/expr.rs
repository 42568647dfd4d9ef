//! Hashconsed Boolean terms.
//!
//! A [`TermStore`] owns every node it has interned. Children are always
//! interned before their parents, so [`TermId`] order is a topological order
//! of the DAG: walking a reachable set by ascending id visits children first.
//! All traversals below rely on that and never recurse.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;

use smallvec::SmallVec;
use thiserror::Error;

use crate::HashMap;

/// An interned identifier (input, output or intermediate name).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Deref for Name {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

/// Operator tag shared by terms, e-nodes and patterns.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Op {
    Var(Name),
    Const(bool),
    Not,
    And,
    Or,
    /// Multi-output bundle. Only ever a root.
    Concat,
}

impl Op {
    pub fn arity_ok(&self, n: usize) -> bool {
        match self {
            Op::Var(_) | Op::Const(_) => n == 0,
            Op::Not => n == 1,
            Op::And | Op::Or => n == 2,
            Op::Concat => n >= 1,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Op::Var(_) | Op::Const(_))
    }

    /// Short symbol used by the S-expression format.
    pub fn symbol(&self) -> &str {
        match self {
            Op::Var(name) => name.as_str(),
            Op::Const(false) => "0",
            Op::Const(true) => "1",
            Op::Not => "!",
            Op::And => "&",
            Op::Or => "|",
            Op::Concat => "concat",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Handle to a node inside a [`TermStore`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TermId(u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Node {
    pub op: Op,
    pub children: SmallVec<[TermId; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("operator {op} does not take {got} children")]
    Arity { op: Op, got: usize },
    #[error("concat may only appear at the root of a term")]
    NestedConcat,
    #[error("child {0:?} does not belong to this store")]
    DanglingChild(TermId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound by the assignment")]
    Unbound(Name),
}

/// Result of evaluating a term: one bit, or one bit per CONCAT child.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Value {
    Bit(bool),
    Bits(Vec<bool>),
}

/// Size and shape statistics of a shared DAG.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct DagStats {
    pub node_count: usize,
    pub edge_sum: usize,
    pub depth: usize,
    pub density: f64,
}

/// Interner for Boolean terms.
#[derive(Clone, Default)]
pub struct TermStore {
    nodes: Vec<Node>,
    index: HashMap<Node, TermId>,
}

impl fmt::Debug for TermStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TermStore").field("nodes", &self.nodes.len()).finish()
    }
}

impl TermStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: TermId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn op(&self, id: TermId) -> &Op {
        &self.nodes[id.index()].op
    }

    pub fn children(&self, id: TermId) -> &[TermId] {
        &self.nodes[id.index()].children
    }

    /// Returns the canonical node for `op` applied to `children`.
    pub fn intern(&mut self, op: Op, children: &[TermId]) -> Result<TermId, StructureError> {
        if !op.arity_ok(children.len()) {
            return Err(StructureError::Arity { op, got: children.len() });
        }
        for &c in children {
            if c.index() >= self.nodes.len() {
                return Err(StructureError::DanglingChild(c));
            }
            if self.nodes[c.index()].op == Op::Concat {
                return Err(StructureError::NestedConcat);
            }
        }
        Ok(self.insert(Node { op, children: SmallVec::from_slice(children) }))
    }

    fn insert(&mut self, node: Node) -> TermId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = TermId(u32::try_from(self.nodes.len()).expect("term store overflow"));
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    pub fn var(&mut self, name: &str) -> TermId {
        self.insert(Node { op: Op::Var(Name::new(name)), children: SmallVec::new() })
    }

    pub fn var_name(&mut self, name: Name) -> TermId {
        self.insert(Node { op: Op::Var(name), children: SmallVec::new() })
    }

    pub fn constant(&mut self, value: bool) -> TermId {
        self.insert(Node { op: Op::Const(value), children: SmallVec::new() })
    }

    pub fn not(&mut self, a: TermId) -> TermId {
        self.insert(Node { op: Op::Not, children: smallvec::smallvec![a] })
    }

    pub fn and(&mut self, a: TermId, b: TermId) -> TermId {
        self.insert(Node { op: Op::And, children: smallvec::smallvec![a, b] })
    }

    pub fn or(&mut self, a: TermId, b: TermId) -> TermId {
        self.insert(Node { op: Op::Or, children: smallvec::smallvec![a, b] })
    }

    pub fn concat(&mut self, children: &[TermId]) -> Result<TermId, StructureError> {
        self.intern(Op::Concat, children)
    }

    /// Every node reachable from `root`, children before parents.
    pub fn reachable(&self, root: TermId) -> Vec<TermId> {
        self.reachable_from(&[root])
    }

    pub fn reachable_from(&self, roots: &[TermId]) -> Vec<TermId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<TermId> = roots.to_vec();
        let mut out = Vec::new();
        while let Some(id) = stack.pop() {
            if core::mem::replace(&mut seen[id.index()], true) {
                continue;
            }
            out.push(id);
            stack.extend_from_slice(self.children(id));
        }
        out.sort_unstable();
        out
    }

    /// Evaluates `root`, looking variables up through `lookup`.
    pub fn evaluate<F>(&self, root: TermId, mut lookup: F) -> Result<Value, EvalError>
    where
        F: FnMut(&Name) -> Option<bool>,
    {
        let order = self.reachable(root);
        let mut vals = vec![false; self.nodes.len()];
        for &id in &order {
            let node = self.node(id);
            let c = &node.children;
            vals[id.index()] = match &node.op {
                Op::Var(name) => lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?,
                Op::Const(b) => *b,
                Op::Not => !vals[c[0].index()],
                Op::And => vals[c[0].index()] & vals[c[1].index()],
                Op::Or => vals[c[0].index()] | vals[c[1].index()],
                Op::Concat => false,
            };
        }
        Ok(match self.op(root) {
            Op::Concat => Value::Bits(self.children(root).iter().map(|c| vals[c.index()]).collect()),
            _ => Value::Bit(vals[root.index()]),
        })
    }

    /// Node count, edge sum, depth and density of the shared DAG under `root`.
    ///
    /// Edges are distinct (parent, child) pairs, so `a * a` contributes one
    /// edge. Depth counts nodes; a leaf has depth 1.
    pub fn dag_stats(&self, root: TermId) -> DagStats {
        let order = self.reachable(root);
        let mut depth = vec![0usize; self.nodes.len()];
        let mut edge_sum = 0;
        for &id in &order {
            let children = self.children(id);
            let mut d = 0;
            for (i, c) in children.iter().enumerate() {
                d = d.max(depth[c.index()]);
                if !children[..i].contains(c) {
                    edge_sum += 1;
                }
            }
            depth[id.index()] = d + 1;
        }
        let n = order.len();
        let density = if n > 1 { edge_sum as f64 / (n * (n - 1)) as f64 } else { 0.0 };
        DagStats { node_count: n, edge_sum, depth: depth[root.index()], density }
    }

    /// Copies the DAG under `root` from `other` into this store.
    pub fn import(&mut self, other: &TermStore, root: TermId) -> TermId {
        let order = other.reachable(root);
        let mut map: HashMap<TermId, TermId> = HashMap::default();
        for &id in &order {
            let node = other.node(id);
            let children = node.children.iter().map(|c| map[c]).collect();
            let new = self.insert(Node { op: node.op.clone(), children });
            map.insert(id, new);
        }
        map[&root]
    }
}
