//! Parse-free optimization pipeline: saturate, build a candidate pool,
//! select with a cost model, and verify the result.

use alloc::vec::Vec;
use core::time::Duration;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::egraph::{default_ruleset, saturate, CapacityError, Clock, EGraph, SaturationLimits, SaturationReport};
use crate::equiv::{check_equiv, EquivConfig, EquivReport, InterfaceError};
use crate::expr::TermStore;
use crate::extract::{build_pool, select_best, CandidatePool, ExtractError, LocalCost, PoolConfig, Provenance, SelectError};
use crate::features::{extract_features, Balanced, CostError, CostModel, FeatureVector, TreeEnsembleModel};

/// What the pool is ranked by.
#[derive(Clone, Debug, PartialEq)]
pub enum Selector {
    Analytic(LocalCost),
    Ensemble(TreeEnsembleModel),
    /// Normalized to the predictions for the minimum-size seed.
    Balanced { delay: TreeEnsembleModel, area: TreeEnsembleModel },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizeConfig {
    pub limits: SaturationLimits,
    pub pool: PoolConfig,
    pub equiv: EquivConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("circuit: {0}")]
    Circuit(#[from] CircuitError),
    #[error("e-graph: {0}")]
    Capacity(#[from] CapacityError),
    #[error("extraction: {0}")]
    Extract(#[from] ExtractError),
    #[error("model: {0}")]
    Model(#[from] CostError),
    #[error("selection: {0}")]
    Select(#[from] SelectError<CostError>),
    #[error("equivalence check: {0}")]
    Interface(#[from] InterfaceError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StageTimes {
    pub saturate: Duration,
    pub extract: Duration,
    pub select: Duration,
    pub verify: Duration,
}

#[derive(Clone, Debug)]
pub struct Optimized {
    pub circuit: Circuit,
    pub input_features: FeatureVector,
    pub saturation: SaturationReport,
    pub pool: CandidatePool,
    pub selected: usize,
    pub selected_cost: f64,
    pub selected_features: FeatureVector,
    pub equiv: EquivReport,
    pub times: StageTimes,
}

impl Optimized {
    pub fn provenance(&self) -> Provenance {
        self.pool.candidates[self.selected].provenance
    }
}

/// Builds the cost model for `selector` over `pool`.
pub fn cost_model(selector: &Selector, pool: &CandidatePool) -> Result<CostModel, CostError> {
    Ok(match selector {
        Selector::Analytic(k) => CostModel::Analytic(*k),
        Selector::Ensemble(m) => CostModel::Ensemble(m.clone()),
        Selector::Balanced { delay, area } => {
            let seed = pool.candidates[pool.min_size].term;
            CostModel::Balanced(Balanced::normalized_to(delay.clone(), area.clone(), &pool.store, seed)?)
        }
    })
}

/// Runs the whole flow on `input`. An inequivalent result is reported, not
/// raised; callers decide how to fail.
pub fn optimize<C: Clock + ?Sized>(
    input: &Circuit,
    selector: &Selector,
    cfg: &OptimizeConfig,
    clock: &C,
) -> Result<Optimized, OptimizeError> {
    let mut runs = optimize_all(input, core::slice::from_ref(selector), cfg, clock)?;
    Ok(runs.pop().expect("one selector, one run"))
}

/// [`optimize`] for several selectors over one saturation and one pool.
/// Each result is what [`optimize`] returns for that selector alone, with
/// the shared stage times repeated.
pub fn optimize_all<C: Clock + ?Sized>(
    input: &Circuit,
    selectors: &[Selector],
    cfg: &OptimizeConfig,
    clock: &C,
) -> Result<Vec<Optimized>, OptimizeError> {
    let mut shared = StageTimes::default();
    let mut last = clock.elapsed();
    let mut lap = move || {
        let now = clock.elapsed();
        let d = now.saturating_sub(last);
        last = now;
        d
    };

    let mut work = input.clone();
    let root = work.root()?;
    let input_features = extract_features(&work.store, root);
    let mut g = EGraph::new();
    let class = g.add_term(&work.store, root)?;
    let saturation = saturate(&mut g, &default_ruleset(), &cfg.limits, clock);
    shared.saturate = lap();

    let pool = build_pool(&g, class, &cfg.pool)?;
    shared.extract = lap();

    let mut runs = Vec::with_capacity(selectors.len());
    for selector in selectors {
        let mut times = shared;
        let model = cost_model(selector, &pool)?;
        let selection = select_best(&pool, &model)?;
        let term = pool.candidates[selection.index].term;
        let selected_features = extract_features(&pool.store, term);
        let mut store = TermStore::new();
        let root = store.import(&pool.store, term);
        let circuit = Circuit::from_root(store, input.inputs().to_vec(), input.output_names(), root)?;
        times.select = lap();

        let equiv = check_equiv(input, &circuit, &cfg.equiv)?;
        times.verify = lap();

        runs.push(Optimized {
            circuit,
            input_features,
            saturation,
            pool: pool.clone(),
            selected: selection.index,
            selected_cost: selection.cost,
            selected_features,
            equiv,
            times,
        });
    }
    Ok(runs)
}

/// Best model cost over the first `sizes[i]` pool draws for each size, with
/// the pool built once at the largest size.
pub fn pool_sweep(pool: &CandidatePool, model: &CostModel, sizes: &[usize]) -> Result<Vec<f64>, SelectError<CostError>> {
    let mut costs = Vec::with_capacity(pool.len());
    for (index, c) in pool.candidates.iter().enumerate() {
        let v = model.cost(&pool.store, c.term).map_err(|source| SelectError::Model { index, source })?;
        if !v.is_finite() {
            return Err(SelectError::NonFinite { index, value: v });
        }
        costs.push(v);
    }
    Ok(sizes
        .iter()
        .map(|&size| {
            pool.candidates
                .iter()
                .zip(&costs)
                .filter(|(c, _)| c.draw.is_none_or(|d| d + 2 < size))
                .map(|(_, v)| *v)
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}
