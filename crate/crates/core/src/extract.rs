//! Term extraction from a saturated e-graph.
//!
//! [`FeasibleCostTable`] holds the least local cost of every class reachable
//! from a root. Greedy extraction follows its arg-min e-nodes; the samplers
//! draw among the e-nodes it marks as choosable, which are the feasible
//! e-nodes whose children all have a strictly smaller least cost than their
//! own class. Every path through such choices strictly decreases in cost, so
//! any mix of choices yields a finite term.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;
use thiserror::Error;

use crate::egraph::{EClassId, EGraph, ENode};
use crate::expr::{Op, TermId, TermStore};
use crate::HashMap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("class {0} has no acyclic extraction")]
    Infeasible(EClassId),
    #[error("extraction revisited class {0}")]
    Cycle(EClassId),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}

/// Per-operator weights for [`LocalCost::WeightedOps`]. Leaves and CONCAT
/// weigh nothing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpWeights {
    not: f64,
    and: f64,
    or: f64,
}

impl OpWeights {
    /// NOT must be strictly positive and strictly below AND, and AND must
    /// equal OR.
    pub fn new(not: f64, and: f64, or: f64) -> Result<Self, ExtractError> {
        let ok = not.is_finite() && and.is_finite() && not > 0.0 && not < and && and == or;
        if !ok {
            return Err(ExtractError::Config("weights need 0 < NOT < AND = OR"));
        }
        Ok(OpWeights { not, and, or })
    }

    pub fn not(&self) -> f64 {
        self.not
    }

    pub fn and(&self) -> f64 {
        self.and
    }

    pub fn or(&self) -> f64 {
        self.or
    }

    fn of(&self, op: &Op) -> f64 {
        match op {
            Op::Not => self.not,
            Op::And => self.and,
            Op::Or => self.or,
            Op::Var(_) | Op::Const(_) | Op::Concat => 0.0,
        }
    }
}

impl Default for OpWeights {
    fn default() -> Self {
        OpWeights { not: 1.0, and: 2.0, or: 2.0 }
    }
}

/// Local cost functions used by greedy extraction and the samplers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LocalCost {
    AstSize,
    AstDepth,
    WeightedOps(OpWeights),
}

impl LocalCost {
    /// Cost of applying `op` to children of the given costs.
    pub fn combine(&self, op: &Op, children: impl Iterator<Item = f64>) -> f64 {
        match self {
            LocalCost::AstSize => 1.0 + children.sum::<f64>(),
            LocalCost::AstDepth => 1.0 + children.fold(0.0, f64::max),
            LocalCost::WeightedOps(w) => w.of(op) + children.sum::<f64>(),
        }
    }

    /// Cost of the tree expansion of `root`.
    pub fn of_term(&self, store: &TermStore, root: TermId) -> f64 {
        let order = store.reachable(root);
        let mut cost = vec![0.0; store.len()];
        for &id in &order {
            let node = store.node(id);
            cost[id.index()] = self.combine(&node.op, node.children.iter().map(|c| cost[c.index()]));
        }
        cost[root.index()]
    }

    pub fn name(&self) -> &'static str {
        match self {
            LocalCost::AstSize => "ast-size",
            LocalCost::AstDepth => "ast-depth",
            LocalCost::WeightedOps(_) => "weighted-ops",
        }
    }
}

impl fmt::Display for LocalCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Least local cost per class, reached by fixpoint iteration.
#[derive(Clone, Debug)]
pub struct FeasibleCostTable {
    kind: LocalCost,
    root: EClassId,
    cost: Vec<f64>,
    best: Vec<Option<u32>>,
    choosable: Vec<SmallVec<[u32; 4]>>,
    tied: Vec<SmallVec<[u32; 2]>>,
}

impl FeasibleCostTable {
    pub fn kind(&self) -> LocalCost {
        self.kind
    }

    pub fn root(&self) -> EClassId {
        self.root
    }

    /// Least cost of `class`, `None` if nothing acyclic is extractable.
    pub fn cost(&self, g: &EGraph, class: EClassId) -> Option<f64> {
        let c = self.cost[g.find(class).index()];
        c.is_finite().then_some(c)
    }

    /// Index (into the class's e-node list) of the lowest-ordered arg-min.
    pub fn best(&self, g: &EGraph, class: EClassId) -> Option<usize> {
        self.best[g.find(class).index()].map(|i| i as usize)
    }

    /// E-nodes the samplers may pick for `class`.
    pub fn choosable(&self, g: &EGraph, class: EClassId) -> impl Iterator<Item = usize> + '_ {
        self.choosable[g.find(class).index()].iter().map(|&i| i as usize)
    }
}

fn node_cost(kind: &LocalCost, node: &ENode, cost: &[f64]) -> f64 {
    kind.combine(&node.op, node.children.iter().map(|c| cost[c.index()]))
}

fn reachable_classes(g: &EGraph, root: EClassId) -> Vec<EClassId> {
    let mut seen = vec![false; g.id_bound()];
    let mut stack = vec![g.find(root)];
    let mut out = Vec::new();
    while let Some(id) = stack.pop() {
        if core::mem::replace(&mut seen[id.index()], true) {
            continue;
        }
        out.push(id);
        for node in &g.class(id).nodes {
            stack.extend(node.children.iter().map(|&c| g.find(c)));
        }
    }
    out.sort_unstable();
    out
}

/// Computes least costs for every class reachable from `root`.
pub fn compute_feasible(g: &EGraph, root: EClassId, kind: LocalCost) -> Result<FeasibleCostTable, ExtractError> {
    debug_assert!(g.is_clean(), "compute_feasible needs a rebuilt e-graph");
    let classes = reachable_classes(g, root);
    let n = g.id_bound();
    let mut cost = vec![f64::INFINITY; n];
    loop {
        let mut changed = false;
        for &id in &classes {
            for node in &g.class(id).nodes {
                let c = node_cost(&kind, node, &cost);
                if c < cost[id.index()] {
                    cost[id.index()] = c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut best = vec![None; n];
    let mut choosable = vec![SmallVec::new(); n];
    let mut tied = vec![SmallVec::new(); n];
    for &id in &classes {
        let own = cost[id.index()];
        if !own.is_finite() {
            continue;
        }
        for (i, node) in g.class(id).nodes.iter().enumerate() {
            let c = node_cost(&kind, node, &cost);
            let descends = node.op == Op::Concat || node.children.iter().all(|ch| cost[ch.index()] < own);
            if !c.is_finite() || !descends {
                continue;
            }
            choosable[id.index()].push(i as u32);
            if c == own {
                tied[id.index()].push(i as u32);
                best[id.index()].get_or_insert(i as u32);
            }
        }
    }
    let root = g.find(root);
    if best[root.index()].is_none() {
        return Err(ExtractError::Infeasible(root));
    }
    Ok(FeasibleCostTable { kind, root, cost, best, choosable, tied })
}

/// Builds the term selected by `choose` (one e-node index per class) into
/// `store`. Each class is decided once, so shared classes become shared
/// subterms.
fn build<F>(g: &EGraph, root: EClassId, store: &mut TermStore, mut choose: F) -> Result<TermId, ExtractError>
where
    F: FnMut(EClassId) -> Result<usize, ExtractError>,
{
    enum Step {
        Visit(EClassId),
        Finish(EClassId, usize),
    }
    let mut done: HashMap<EClassId, TermId> = HashMap::default();
    let mut open: HashMap<EClassId, ()> = HashMap::default();
    let mut stack = vec![Step::Visit(g.find(root))];
    while let Some(step) = stack.pop() {
        match step {
            Step::Visit(id) => {
                if done.contains_key(&id) {
                    continue;
                }
                if open.insert(id, ()).is_some() {
                    return Err(ExtractError::Cycle(id));
                }
                let pick = choose(id)?;
                stack.push(Step::Finish(id, pick));
                for &c in g.class(id).nodes[pick].children.iter().rev() {
                    stack.push(Step::Visit(g.find(c)));
                }
            }
            Step::Finish(id, pick) => {
                let node = &g.class(id).nodes[pick];
                let kids: SmallVec<[TermId; 2]> = node.children.iter().map(|c| done[&g.find(*c)]).collect();
                let term = store.intern(node.op.clone(), &kids).expect("e-nodes have valid arity");
                open.remove(&id);
                done.insert(id, term);
            }
        }
    }
    Ok(done[&g.find(root)])
}

/// Greedy extraction: every class takes its lowest-ordered arg-min e-node.
pub fn extract_greedy(g: &EGraph, table: &FeasibleCostTable, store: &mut TermStore) -> Result<TermId, ExtractError> {
    build(g, table.root, store, |id| table.best(g, id).ok_or(ExtractError::Infeasible(id)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Uniform among the e-nodes tied at the least local cost.
    Tied,
    /// Like [`Strategy::Tied`], except that with probability `p` the pick is
    /// uniform among all choosable e-nodes.
    Explore,
}

/// Draws one candidate term.
pub fn sample_candidate<R: Rng + ?Sized>(
    g: &EGraph,
    table: &FeasibleCostTable,
    strategy: Strategy,
    p_suboptimal: f64,
    rng: &mut R,
    store: &mut TermStore,
) -> Result<TermId, ExtractError> {
    build(g, table.root, store, |id| {
        let i = id.index();
        let pool: &[u32] = if strategy == Strategy::Explore && rng.gen_bool(p_suboptimal) {
            &table.choosable[i]
        } else {
            &table.tied[i]
        };
        if pool.is_empty() {
            return Err(ExtractError::Infeasible(id));
        }
        Ok(pool[rng.gen_range(0..pool.len())] as usize)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    MinSize,
    MinDepth,
    StrategyA,
    StrategyB,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::MinSize => "min_size",
            Provenance::MinDepth => "min_depth",
            Provenance::StrategyA => "strategy_a",
            Provenance::StrategyB => "strategy_b",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolConfig {
    pub pool_size: usize,
    pub p_suboptimal: f64,
    /// Draws of strategy a to draws of strategy b.
    pub strategy_ratio: (u32, u32),
    pub seed: u64,
    /// Local costs the sampled draws rotate through.
    pub cost_kinds: Vec<LocalCost>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            pool_size: 122,
            p_suboptimal: 0.2,
            strategy_ratio: (1, 3),
            seed: 0,
            cost_kinds: vec![LocalCost::AstSize, LocalCost::AstDepth, LocalCost::WeightedOps(OpWeights::default())],
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<(), ExtractError> {
        if self.pool_size < 2 {
            return Err(ExtractError::Config("pool size must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.p_suboptimal) {
            return Err(ExtractError::Config("sub-optimal probability must lie in [0, 1]"));
        }
        if self.strategy_ratio.0 == 0 && self.strategy_ratio.1 == 0 {
            return Err(ExtractError::Config("strategy ratio cannot be 0:0"));
        }
        if self.cost_kinds.is_empty() {
            return Err(ExtractError::Config("at least one local cost is required"));
        }
        Ok(())
    }

    /// Strategy and local cost of sampled draw `i`. Independent of the pool
    /// size, so a larger pool extends a smaller one.
    pub fn draw_plan(&self, i: usize) -> (Strategy, LocalCost) {
        let (a, b) = self.strategy_ratio;
        let period = (a + b) as usize;
        let strategy = if i % period < a as usize { Strategy::Tied } else { Strategy::Explore };
        (strategy, self.cost_kinds[i % self.cost_kinds.len()])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub term: TermId,
    pub provenance: Provenance,
    /// Sample index for drawn candidates.
    pub draw: Option<usize>,
    pub local_cost: LocalCost,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DrawCounts {
    pub strategy_a: usize,
    pub strategy_b: usize,
}

/// Deduplicated candidates for one root class, all interned in `store`.
#[derive(Clone, Debug)]
pub struct CandidatePool {
    pub store: TermStore,
    pub candidates: Vec<Candidate>,
    /// Positions of the two greedy seeds in `candidates`. They coincide when
    /// both seeds are the same term.
    pub min_size: usize,
    pub min_depth: usize,
    /// Draws made per strategy before deduplication.
    pub draws: DrawCounts,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.candidates.iter().filter(|c| c.provenance == provenance).count()
    }
}

/// Random stream for sampled draw `i`; streams are independent of each other
/// and of how many draws are made.
pub fn draw_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Greedy size and depth seeds plus `pool_size - 2` sampled draws.
pub fn build_pool(g: &EGraph, root: EClassId, cfg: &PoolConfig) -> Result<CandidatePool, ExtractError> {
    cfg.validate()?;
    let mut tables: Vec<FeasibleCostTable> = Vec::new();
    let table_for = |kind: LocalCost, tables: &mut Vec<FeasibleCostTable>| -> Result<usize, ExtractError> {
        if let Some(i) = tables.iter().position(|t| t.kind == kind) {
            return Ok(i);
        }
        tables.push(compute_feasible(g, root, kind)?);
        Ok(tables.len() - 1)
    };

    let mut store = TermStore::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    let push = |c: Candidate, candidates: &mut Vec<Candidate>| -> usize {
        match candidates.iter().position(|o| o.term == c.term) {
            Some(i) => i,
            None => {
                candidates.push(c);
                candidates.len() - 1
            }
        }
    };

    let ts = table_for(LocalCost::AstSize, &mut tables)?;
    let term = extract_greedy(g, &tables[ts], &mut store)?;
    let min_size = push(
        Candidate { term, provenance: Provenance::MinSize, draw: None, local_cost: LocalCost::AstSize },
        &mut candidates,
    );
    let td = table_for(LocalCost::AstDepth, &mut tables)?;
    let term = extract_greedy(g, &tables[td], &mut store)?;
    let min_depth = push(
        Candidate { term, provenance: Provenance::MinDepth, draw: None, local_cost: LocalCost::AstDepth },
        &mut candidates,
    );

    let mut draws = DrawCounts::default();
    for i in 0..cfg.pool_size - 2 {
        let (strategy, kind) = cfg.draw_plan(i);
        let t = table_for(kind, &mut tables)?;
        let mut rng = draw_rng(cfg.seed, i);
        let term = sample_candidate(g, &tables[t], strategy, cfg.p_suboptimal, &mut rng, &mut store)?;
        let provenance = match strategy {
            Strategy::Tied => {
                draws.strategy_a += 1;
                Provenance::StrategyA
            }
            Strategy::Explore => {
                draws.strategy_b += 1;
                Provenance::StrategyB
            }
        };
        push(Candidate { term, provenance, draw: Some(i), local_cost: kind }, &mut candidates);
    }
    Ok(CandidatePool { store, candidates, min_size, min_depth, draws })
}

/// Scalar cost of a candidate term.
pub trait TermCost {
    type Error;
    fn cost(&self, store: &TermStore, term: TermId) -> Result<f64, Self::Error>;
}

impl TermCost for LocalCost {
    type Error = core::convert::Infallible;
    fn cost(&self, store: &TermStore, term: TermId) -> Result<f64, Self::Error> {
        Ok(self.of_term(store, term))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectError<E> {
    #[error("candidate pool is empty")]
    Empty,
    #[error("cost model failed on candidate {index}: {source}")]
    Model { index: usize, source: E },
    #[error("cost model returned {value} for candidate {index}")]
    NonFinite { index: usize, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub cost: f64,
}

/// Arg-min of `model` over the pool; ties go to the earlier candidate.
pub fn select_best<M: TermCost>(pool: &CandidatePool, model: &M) -> Result<Selection, SelectError<M::Error>> {
    let mut best: Option<Selection> = None;
    for (index, cand) in pool.candidates.iter().enumerate() {
        let cost = model.cost(&pool.store, cand.term).map_err(|source| SelectError::Model { index, source })?;
        if !cost.is_finite() {
            return Err(SelectError::NonFinite { index, value: cost });
        }
        if best.is_none_or(|b| cost < b.cost) {
            best = Some(Selection { index, cost });
        }
    }
    best.ok_or(SelectError::Empty)
}
