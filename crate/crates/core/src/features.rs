//! Term features and cost models.
//!
//! A [`TreeEnsembleModel`] is an additive ensemble of binary regression
//! trees over the seven [`FeatureVector`] fields. Trees are validated when
//! built, so prediction cannot fail.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::expr::{Op, TermId, TermStore};
use crate::extract::{LocalCost, TermCost};

pub const FEATURE_COUNT: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] =
    ["and_count", "or_count", "not_count", "node_count", "depth", "density", "edge_sum"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector {
    pub and_count: usize,
    pub or_count: usize,
    pub not_count: usize,
    pub node_count: usize,
    pub depth: usize,
    pub density: f64,
    pub edge_sum: usize,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.and_count as f64,
            self.or_count as f64,
            self.not_count as f64,
            self.node_count as f64,
            self.depth as f64,
            self.density,
            self.edge_sum as f64,
        ]
    }
}

impl fmt::Display for FeatureVector {
    /// Comma-separated, in [`FEATURE_NAMES`] order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{}",
            self.and_count, self.or_count, self.not_count, self.node_count, self.depth, self.density, self.edge_sum
        )
    }
}

/// Features of the shared DAG under `root`.
pub fn extract_features(store: &TermStore, root: TermId) -> FeatureVector {
    let (mut and_count, mut or_count, mut not_count) = (0, 0, 0);
    for id in store.reachable(root) {
        match store.op(id) {
            Op::And => and_count += 1,
            Op::Or => or_count += 1,
            Op::Not => not_count += 1,
            _ => {}
        }
    }
    let stats = store.dag_stats(root);
    FeatureVector {
        and_count,
        or_count,
        not_count,
        node_count: stats.node_count,
        depth: stats.depth,
        density: stats.density,
        edge_sum: stats.edge_sum,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Objective {
    Delay,
    Area,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Delay => "delay",
            Objective::Area => "area",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{path}: unknown feature index {index}")]
    UnknownFeature { path: String, index: usize },
    #[error("{path}: non-finite number")]
    NonFinite { path: String },
    #[error("model has no trees")]
    NoTrees,
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
}

/// Tree node as read from or written to a model file.
#[derive(Clone, Debug, PartialEq)]
pub enum DecisionNode {
    Split { feature: usize, threshold: f64, default_left: bool, left: Box<DecisionNode>, right: Box<DecisionNode> },
    Leaf(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Flat {
    // Children are indices into the same tree's node list.
    Split { feature: u8, threshold: f64, default_left: bool, left: u32, right: u32 },
    Leaf(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeEnsembleModel {
    objective: Objective,
    base_score: f64,
    trees: Vec<Vec<Flat>>,
    provenance: String,
}

fn finite(v: f64, path: &str) -> Result<f64, ModelError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::NonFinite { path: path.into() })
    }
}

// Node, its path, and the parent slot (index, is-left) to patch.
type Pending<'a> = (&'a DecisionNode, String, Option<(usize, bool)>);

fn flatten(root: &DecisionNode, tree: usize) -> Result<Vec<Flat>, ModelError> {
    let mut out = Vec::new();
    let mut stack: Vec<Pending> = vec![(root, alloc::format!("trees[{tree}]"), None)];
    while let Some((node, path, slot)) = stack.pop() {
        let at = out.len() as u32;
        if let Some((parent, is_left)) = slot {
            if let Flat::Split { left, right, .. } = &mut out[parent] {
                *if is_left { left } else { right } = at;
            }
        }
        match node {
            DecisionNode::Leaf(v) => out.push(Flat::Leaf(finite(*v, &path)?)),
            DecisionNode::Split { feature, threshold, default_left, left, right } => {
                if *feature >= FEATURE_COUNT {
                    return Err(ModelError::UnknownFeature { path, index: *feature });
                }
                let threshold = finite(*threshold, &path)?;
                out.push(Flat::Split {
                    feature: *feature as u8,
                    threshold,
                    default_left: *default_left,
                    left: 0,
                    right: 0,
                });
                let me = at as usize;
                stack.push((right, alloc::format!("{path}.right"), Some((me, false))));
                stack.push((left, alloc::format!("{path}.left"), Some((me, true))));
            }
        }
    }
    Ok(out)
}

impl TreeEnsembleModel {
    pub fn new(
        objective: Objective,
        base_score: f64,
        trees: &[DecisionNode],
        provenance: impl Into<String>,
    ) -> Result<Self, ModelError> {
        finite(base_score, "base_score")?;
        if trees.is_empty() {
            return Err(ModelError::NoTrees);
        }
        let trees = trees.iter().enumerate().map(|(i, t)| flatten(t, i)).collect::<Result<_, _>>()?;
        Ok(TreeEnsembleModel { objective, base_score, trees, provenance: provenance.into() })
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Nested form of tree `i`, for serialization.
    pub fn tree(&self, i: usize) -> DecisionNode {
        fn go(t: &[Flat], at: usize) -> DecisionNode {
            match t[at] {
                Flat::Leaf(v) => DecisionNode::Leaf(v),
                Flat::Split { feature, threshold, default_left, left, right } => DecisionNode::Split {
                    feature: feature as usize,
                    threshold,
                    default_left,
                    left: Box::new(go(t, left as usize)),
                    right: Box::new(go(t, right as usize)),
                },
            }
        }
        go(&self.trees[i], 0)
    }

    /// Base score plus the leaf reached in each tree; `x < threshold` goes
    /// left. NaN features follow the default branch.
    pub fn predict(&self, features: &FeatureVector) -> f64 {
        let x = features.to_array();
        let mut sum = self.base_score;
        for tree in &self.trees {
            let mut at = 0;
            loop {
                match tree[at] {
                    Flat::Leaf(v) => {
                        sum += v;
                        break;
                    }
                    Flat::Split { feature, threshold, default_left, left, right } => {
                        let v = x[feature as usize];
                        let go_left = if v.is_nan() { default_left } else { v < threshold };
                        at = if go_left { left } else { right } as usize;
                    }
                }
            }
        }
        sum
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("balanced cost needs positive finite reference scales, got delay {delay} and area {area}")]
    BadReference { delay: f64, area: f64 },
    #[error("balanced cost needs positive predictions, got delay {delay} and area {area}")]
    NonPositivePrediction { delay: f64, area: f64 },
    #[error("model objective is {got}, expected {expected}")]
    WrongObjective { expected: &'static str, got: &'static str },
}

/// Geometric mean of delay and area predictions, each divided by a
/// reference scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Balanced {
    delay: TreeEnsembleModel,
    area: TreeEnsembleModel,
    delay_ref: f64,
    area_ref: f64,
}

impl Balanced {
    pub fn new(delay: TreeEnsembleModel, area: TreeEnsembleModel, delay_ref: f64, area_ref: f64) -> Result<Self, CostError> {
        if delay.objective != Objective::Delay {
            return Err(CostError::WrongObjective { expected: "delay", got: delay.objective.as_str() });
        }
        if area.objective != Objective::Area {
            return Err(CostError::WrongObjective { expected: "area", got: area.objective.as_str() });
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(delay_ref) || !ok(area_ref) {
            return Err(CostError::BadReference { delay: delay_ref, area: area_ref });
        }
        Ok(Balanced { delay, area, delay_ref, area_ref })
    }

    /// References taken from the predictions for `reference`.
    pub fn normalized_to(
        delay: TreeEnsembleModel,
        area: TreeEnsembleModel,
        store: &TermStore,
        reference: TermId,
    ) -> Result<Self, CostError> {
        let f = extract_features(store, reference);
        let (d, a) = (delay.predict(&f), area.predict(&f));
        Balanced::new(delay, area, d, a)
    }

    pub fn references(&self) -> (f64, f64) {
        (self.delay_ref, self.area_ref)
    }

    fn cost(&self, f: &FeatureVector) -> Result<f64, CostError> {
        let (d, a) = (self.delay.predict(f), self.area.predict(f));
        if !(d > 0.0 && a > 0.0) {
            return Err(CostError::NonPositivePrediction { delay: d, area: a });
        }
        Ok(libm::sqrt((d / self.delay_ref) * (a / self.area_ref)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CostModel {
    Analytic(LocalCost),
    Ensemble(TreeEnsembleModel),
    Balanced(Balanced),
}

impl CostModel {
    pub fn cost(&self, store: &TermStore, term: TermId) -> Result<f64, CostError> {
        match self {
            CostModel::Analytic(kind) => Ok(kind.of_term(store, term)),
            CostModel::Ensemble(m) => Ok(m.predict(&extract_features(store, term))),
            CostModel::Balanced(b) => b.cost(&extract_features(store, term)),
        }
    }
}

impl TermCost for CostModel {
    type Error = CostError;
    fn cost(&self, store: &TermStore, term: TermId) -> Result<f64, CostError> {
        CostModel::cost(self, store, term)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factoring(s: &mut TermStore) -> TermId {
        let x = s.var("x");
        let y = s.var("y");
        let z = s.var("z");
        let xy = s.and(x, y);
        let xz = s.and(x, z);
        s.or(xy, xz)
    }

    fn fv(store: &TermStore, t: TermId) -> (usize, usize, usize, usize, usize, f64, usize) {
        let f = extract_features(store, t);
        (f.and_count, f.or_count, f.not_count, f.node_count, f.depth, f.density, f.edge_sum)
    }

    fn split(feature: usize, threshold: f64, l: DecisionNode, r: DecisionNode) -> DecisionNode {
        DecisionNode::Split { feature, threshold, default_left: true, left: Box::new(l), right: Box::new(r) }
    }

    #[test]
    fn feature_examples() {
        let mut s = TermStore::new();
        let a = s.var("a");
        assert_eq!(fv(&s, a), (0, 0, 0, 1, 1, 0.0, 0));
        let na = s.not(a);
        assert_eq!(fv(&s, na), (0, 0, 1, 2, 2, 0.5, 1));
        let r = factoring(&mut s);
        assert_eq!(fv(&s, r), (2, 1, 0, 6, 3, 0.2, 6));
        assert_eq!(extract_features(&s, r).to_string(), "2,1,0,6,3,0.2,6");
    }

    #[test]
    fn concat_counts_as_node_not_operator() {
        let mut s = TermStore::new();
        let a = s.var("a");
        let b = s.var("b");
        let c = s.concat(&[a, b]).unwrap();
        let f = extract_features(&s, c);
        assert_eq!((f.and_count + f.or_count + f.not_count, f.node_count), (0, 3));
    }

    #[test]
    fn prediction_examples() {
        let mut s = TermStore::new();
        let r = factoring(&mut s);
        let f = extract_features(&s, r);
        let constant = TreeEnsembleModel::new(Objective::Delay, 0.0, &[DecisionNode::Leaf(3.5)], "").unwrap();
        assert_eq!(constant.predict(&f), 3.5);

        let stump = split(3, 4.0, DecisionNode::Leaf(1.0), DecisionNode::Leaf(2.0));
        let one = TreeEnsembleModel::new(Objective::Delay, 0.0, core::slice::from_ref(&stump), "").unwrap();
        assert_eq!(one.predict(&f), 2.0);
        let two = TreeEnsembleModel::new(Objective::Delay, 0.0, &[stump.clone(), stump], "").unwrap();
        assert_eq!(two.predict(&f), 4.0);
    }

    #[test]
    fn threshold_is_strict() {
        let mut s = TermStore::new();
        let r = factoring(&mut s);
        let f = extract_features(&s, r);
        let at_six = split(3, 6.0, DecisionNode::Leaf(1.0), DecisionNode::Leaf(2.0));
        let m = TreeEnsembleModel::new(Objective::Area, 0.5, &[at_six], "").unwrap();
        assert_eq!(m.predict(&f), 2.5);
    }

    #[test]
    fn validation_reports_paths() {
        let bad = split(0, 1.0, DecisionNode::Leaf(0.0), split(9, 1.0, DecisionNode::Leaf(0.0), DecisionNode::Leaf(0.0)));
        let err = TreeEnsembleModel::new(Objective::Delay, 0.0, &[DecisionNode::Leaf(1.0), bad], "").unwrap_err();
        assert_eq!(err, ModelError::UnknownFeature { path: "trees[1].right".into(), index: 9 });
        let err = TreeEnsembleModel::new(Objective::Delay, 0.0, &[split(0, f64::NAN, DecisionNode::Leaf(0.0), DecisionNode::Leaf(0.0))], "")
            .unwrap_err();
        assert_eq!(err, ModelError::NonFinite { path: "trees[0]".into() });
        assert!(TreeEnsembleModel::new(Objective::Delay, f64::INFINITY, &[DecisionNode::Leaf(0.0)], "").is_err());
        assert_eq!(TreeEnsembleModel::new(Objective::Delay, 0.0, &[], ""), Err(ModelError::NoTrees));
    }

    #[test]
    fn nested_form_round_trips() {
        let t = split(2, 0.5, split(6, 3.0, DecisionNode::Leaf(-1.0), DecisionNode::Leaf(1.0)), DecisionNode::Leaf(7.0));
        let m = TreeEnsembleModel::new(Objective::Delay, 0.0, core::slice::from_ref(&t), "").unwrap();
        assert_eq!(m.tree(0), t);
    }

    #[test]
    fn balanced_normalizes_to_reference() {
        let mut s = TermStore::new();
        let r = factoring(&mut s);
        let d = TreeEnsembleModel::new(Objective::Delay, 1.0, &[split(3, 4.0, DecisionNode::Leaf(1.0), DecisionNode::Leaf(2.0))], "")
            .unwrap();
        let a = TreeEnsembleModel::new(Objective::Area, 5.0, &[DecisionNode::Leaf(0.0)], "").unwrap();
        let b = Balanced::normalized_to(d.clone(), a.clone(), &s, r).unwrap();
        assert_eq!(b.references(), (3.0, 5.0));
        assert_eq!(CostModel::Balanced(b).cost(&s, r).unwrap(), 1.0);

        let x = s.var("x");
        let b = Balanced::new(d.clone(), a.clone(), 3.0, 5.0).unwrap();
        // delay 2 / 3, area 5 / 5.
        let got = CostModel::Balanced(b).cost(&s, x).unwrap();
        assert!((got - libm::sqrt(2.0 / 3.0)).abs() < 1e-15);

        assert!(Balanced::new(d.clone(), a.clone(), 0.0, 1.0).is_err());
        assert!(Balanced::new(a.clone(), d.clone(), 1.0, 1.0).is_err());
    }

    #[test]
    fn analytic_size_of_factored_form() {
        let mut s = TermStore::new();
        let x = s.var("x");
        let y = s.var("y");
        let z = s.var("z");
        let yz = s.or(y, z);
        let t = s.and(x, yz);
        assert_eq!(CostModel::Analytic(LocalCost::AstSize).cost(&s, t).unwrap(), 5.0);
    }
}
