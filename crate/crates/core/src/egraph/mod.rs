//! E-graph over Boolean operators.
//!
//! Union-find over [`EClassId`]s, a hashcons from canonical [`ENode`] shapes
//! to classes, and deferred congruence repair in [`EGraph::rebuild`].

mod pattern;
mod rules;
mod saturate;

pub use pattern::{PatVar, Pattern, Subst, MAX_PATTERN_VARS};
pub use rules::{default_ruleset, ruleset, table_rules, RewriteRule, RuleError};
pub use saturate::{saturate, Clock, NoClock, SaturationLimits, SaturationReport, StopReason};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use smallvec::SmallVec;
use thiserror::Error;

use crate::expr::{Op, TermId, TermStore};
use crate::HashMap;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct EClassId(u32);

impl EClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Ids are dense: the i-th class ever created has index i, and every
    /// index below [`EGraph::id_bound`] is valid for [`EGraph::find`].
    pub fn from_index(i: usize) -> Self {
        EClassId(u32::try_from(i).expect("e-class id overflow"))
    }
}

impl fmt::Display for EClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ENode {
    pub op: Op,
    pub children: SmallVec<[EClassId; 2]>,
}

impl ENode {
    pub fn new(op: Op, children: &[EClassId]) -> Self {
        ENode { op, children: SmallVec::from_slice(children) }
    }

    pub fn leaf(op: Op) -> Self {
        ENode { op, children: SmallVec::new() }
    }
}

#[derive(Clone, Debug)]
pub struct EClass {
    pub id: EClassId,
    /// Canonical e-nodes, sorted and deduplicated after every rebuild.
    pub nodes: Vec<ENode>,
    parents: Vec<(ENode, EClassId)>,
}

impl EClass {
    pub fn parents(&self) -> impl Iterator<Item = &(ENode, EClassId)> {
        self.parents.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("e-graph node limit of {limit} reached")]
pub struct CapacityError {
    pub limit: usize,
}

#[derive(Clone, Default)]
pub struct EGraph {
    uf: Vec<EClassId>,
    classes: Vec<Option<EClass>>,
    memo: HashMap<ENode, EClassId>,
    pending: Vec<(ENode, EClassId)>,
    live_classes: usize,
    node_limit: Option<usize>,
}

impl fmt::Debug for EGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EGraph")
            .field("classes", &self.live_classes)
            .field("nodes", &self.memo.len())
            .finish()
    }
}

impl EGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes [`EGraph::add_term`] fail once the hashcons holds `limit` nodes.
    pub fn with_node_limit(limit: usize) -> Self {
        EGraph { node_limit: Some(limit), ..Self::default() }
    }

    /// Number of hashconsed e-nodes. Exact after [`EGraph::rebuild`].
    pub fn total_nodes(&self) -> usize {
        self.memo.len()
    }

    pub fn class_count(&self) -> usize {
        self.live_classes
    }

    /// Upper bound (exclusive) on class id indices ever handed out.
    pub fn id_bound(&self) -> usize {
        self.uf.len()
    }

    pub fn is_clean(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn find(&self, mut id: EClassId) -> EClassId {
        while self.uf[id.index()] != id {
            id = self.uf[id.index()];
        }
        id
    }

    fn find_mut(&mut self, mut id: EClassId) -> EClassId {
        while self.uf[id.index()] != id {
            let grand = self.uf[self.uf[id.index()].index()];
            self.uf[id.index()] = grand;
            id = grand;
        }
        id
    }

    pub fn class(&self, id: EClassId) -> &EClass {
        let id = self.find(id);
        self.classes[id.index()].as_ref().expect("canonical ids name live classes")
    }

    /// Live classes in ascending id order.
    pub fn classes(&self) -> impl Iterator<Item = &EClass> {
        self.classes.iter().filter_map(Option::as_ref)
    }

    pub fn canonicalize(&self, node: &ENode) -> ENode {
        ENode { op: node.op.clone(), children: node.children.iter().map(|&c| self.find(c)).collect() }
    }

    /// Class currently holding `node`, if its canonical shape is present.
    pub fn lookup(&self, node: &ENode) -> Option<EClassId> {
        let node = self.canonicalize(node);
        self.memo.get(&node).map(|&id| self.find(id))
    }

    /// Adds an e-node, returning its class and whether it was new.
    pub fn add(&mut self, node: ENode) -> (EClassId, bool) {
        let node = self.canonicalize(&node);
        if let Some(&id) = self.memo.get(&node) {
            return (self.find(id), false);
        }
        let id = EClassId(u32::try_from(self.uf.len()).expect("e-class id overflow"));
        self.uf.push(id);
        let mut seen: SmallVec<[EClassId; 2]> = SmallVec::new();
        for &c in &node.children {
            if !seen.contains(&c) {
                seen.push(c);
                self.classes[c.index()]
                    .as_mut()
                    .expect("canonical child")
                    .parents
                    .push((node.clone(), id));
            }
        }
        self.classes.push(Some(EClass { id, nodes: alloc::vec![node.clone()], parents: Vec::new() }));
        self.memo.insert(node, id);
        self.live_classes += 1;
        (id, true)
    }

    /// Adds every subterm of `root`. Equal terms land in equal classes.
    pub fn add_term(&mut self, store: &TermStore, root: TermId) -> Result<EClassId, CapacityError> {
        let order = store.reachable(root);
        let mut map: HashMap<TermId, EClassId> = HashMap::default();
        for &tid in &order {
            let node = store.node(tid);
            let children: SmallVec<[EClassId; 2]> = node.children.iter().map(|c| map[c]).collect();
            let enode = ENode { op: node.op.clone(), children };
            if let Some(limit) = self.node_limit {
                if self.lookup(&enode).is_none() && self.memo.len() >= limit {
                    return Err(CapacityError { limit });
                }
            }
            let (id, _) = self.add(enode);
            map.insert(tid, id);
        }
        Ok(map[&root])
    }

    /// Unifies two classes. Congruence is restored lazily by `rebuild`.
    /// Returns the surviving canonical id.
    pub fn merge(&mut self, a: EClassId, b: EClassId) -> EClassId {
        self.union(a, b).0
    }

    pub(crate) fn union(&mut self, a: EClassId, b: EClassId) -> (EClassId, bool) {
        let a = self.find_mut(a);
        let b = self.find_mut(b);
        if a == b {
            return (a, false);
        }
        let size = |g: &Self, x: EClassId| g.classes[x.index()].as_ref().map_or(0, |c| c.parents.len());
        let (root, other) = match size(self, a).cmp(&size(self, b)) {
            core::cmp::Ordering::Less => (b, a),
            core::cmp::Ordering::Greater => (a, b),
            core::cmp::Ordering::Equal => (a.min(b), a.max(b)),
        };
        self.uf[other.index()] = root;
        let absorbed = self.classes[other.index()].take().expect("live class");
        self.live_classes -= 1;
        self.pending.extend(absorbed.parents.iter().cloned());
        let keep = self.classes[root.index()].as_mut().expect("live class");
        keep.nodes.extend(absorbed.nodes);
        keep.parents.extend(absorbed.parents);
        (root, true)
    }

    /// Restores congruence closure and hashcons consistency.
    /// Returns the number of unions it performed.
    pub fn rebuild(&mut self) -> usize {
        let mut unions = 0;
        while let Some((node, class)) = self.pending.pop() {
            let node = self.canonicalize(&node);
            let class = self.find_mut(class);
            if let Some(old) = self.memo.insert(node, class) {
                if self.union(old, class).1 {
                    unions += 1;
                }
            }
        }
        self.repair();
        unions
    }

    fn repair(&mut self) {
        let mut classes = core::mem::take(&mut self.classes);
        for class in classes.iter_mut().flatten() {
            for node in class.nodes.iter_mut() {
                *node = self.canonicalize(node);
            }
            class.nodes.sort_unstable();
            class.nodes.dedup();
            for (node, parent) in class.parents.iter_mut() {
                *node = self.canonicalize(node);
                *parent = self.find(*parent);
            }
            class.parents.sort_unstable();
            class.parents.dedup();
        }
        self.classes = classes;
        self.memo.clear();
        for class in self.classes.iter().flatten() {
            for node in &class.nodes {
                let prev = self.memo.insert(node.clone(), class.id);
                debug_assert!(prev.is_none(), "congruent nodes left in different classes");
            }
        }
    }

    /// Plain-text listing of classes and their e-nodes, for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for class in self.classes() {
            let _ = write!(out, "class {}:", class.id);
            for node in &class.nodes {
                let _ = write!(out, " ({}", node.op);
                for c in &node.children {
                    let _ = write!(out, " {c}");
                }
                out.push(')');
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factoring() -> (EGraph, [EClassId; 6]) {
        let mut s = TermStore::new();
        let x = s.var("x");
        let y = s.var("y");
        let z = s.var("z");
        let xy = s.and(x, y);
        let xz = s.and(x, z);
        let root = s.or(xy, xz);
        let mut g = EGraph::new();
        let ids = [x, y, z, xy, xz, root].map(|t| g.add_term(&s, t).unwrap());
        (g, ids)
    }

    #[test]
    fn add_is_hashconsed() {
        let mut s = TermStore::new();
        let a = s.var("a");
        let mut g = EGraph::new();
        let c1 = g.add_term(&s, a).unwrap();
        let c2 = g.add_term(&s, a).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(g.total_nodes(), 1);

        let (g, _) = factoring();
        assert_eq!(g.total_nodes(), 6);
        assert_eq!(g.class_count(), 6);
    }

    #[test]
    fn parent_back_references() {
        let mut s = TermStore::new();
        let a = s.var("a");
        let na = s.not(a);
        let mut g = EGraph::new();
        let ca = g.add_term(&s, a).unwrap();
        let cna = g.add_term(&s, na).unwrap();
        assert_eq!(g.class_count(), 2);
        let parents: Vec<_> = g.class(ca).parents().cloned().collect();
        assert_eq!(parents, alloc::vec![(ENode::new(Op::Not, &[ca]), cna)]);
    }

    #[test]
    fn capacity_error() {
        let mut s = TermStore::new();
        let a = s.var("a");
        let b = s.var("b");
        let ab = s.and(a, b);
        let mut g = EGraph::with_node_limit(2);
        assert_eq!(g.add_term(&s, ab), Err(CapacityError { limit: 2 }));
        let mut g = EGraph::with_node_limit(3);
        assert!(g.add_term(&s, ab).is_ok());
        assert!(g.add_term(&s, ab).is_ok());
    }

    #[test]
    fn merge_is_idempotent() {
        let (mut g, [x, ..]) = factoring();
        assert_eq!(g.merge(x, x), x);
        assert_eq!(g.rebuild(), 0);
        assert_eq!(g.class_count(), 6);
    }

    #[test]
    fn congruence_after_merge() {
        let (mut g, [_, y, z, xy, xz, root]) = factoring();
        g.merge(y, z);
        assert_eq!(g.rebuild(), 1);
        assert_eq!(g.class_count(), 4);
        assert_eq!(g.find(xy), g.find(xz));
        assert_eq!(g.total_nodes(), 5);
        // The OR node now has two equal children.
        let r = g.class(root);
        assert_eq!(r.nodes.len(), 1);
        assert_eq!(r.nodes[0].children[0], r.nodes[0].children[1]);
        // Rebuilding again changes nothing.
        let before = g.dump();
        assert_eq!(g.rebuild(), 0);
        assert_eq!(g.dump(), before);
        // Every stored shape maps back to its class.
        for class in g.classes() {
            for node in &class.nodes {
                assert_eq!(g.lookup(node), Some(class.id));
            }
        }
    }

    #[test]
    fn merge_order_does_not_matter() {
        let partition = |pairs: &[(usize, usize)]| {
            let (mut g, ids) = factoring();
            for &(a, b) in pairs {
                g.merge(ids[a], ids[b]);
            }
            g.rebuild();
            ids.map(|i| ids.iter().position(|&j| g.find(j) == g.find(i)).unwrap())
        };
        assert_eq!(partition(&[(0, 1), (1, 2)]), partition(&[(1, 2), (0, 1)]));
    }

    #[test]
    fn dump_lists_classes() {
        let (g, _) = factoring();
        let d = g.dump();
        assert!(d.contains("class 5: (| 3 4)"), "{d}");
        assert_eq!(d.lines().count(), 6);
    }
}
