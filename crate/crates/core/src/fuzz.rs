//! Random circuit generator for tests, benchmarks and training corpora.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::circuit::Circuit;
use crate::expr::{Name, TermId, TermStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FuzzConfig {
    pub max_inputs: usize,
    /// Upper bound on DAG nodes, inputs included.
    pub max_nodes: usize,
    pub max_outputs: usize,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig { max_inputs: 10, max_nodes: 60, max_outputs: 3 }
    }
}

/// A random circuit over inputs `x0..` with outputs `f0..`. Operands are
/// drawn with a bias towards recent nodes so that circuits have some depth.
pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, cfg: &FuzzConfig) -> Circuit {
    assert!(cfg.max_inputs >= 1 && cfg.max_nodes > cfg.max_inputs && cfg.max_outputs >= 1);
    let mut store = TermStore::new();
    let n_inputs = rng.gen_range(1..=cfg.max_inputs);
    let inputs: Vec<Name> = (0..n_inputs).map(|i| Name::from(format!("x{i}").as_str())).collect();
    let mut pool: Vec<TermId> = inputs.iter().map(|n| store.var_name(n.clone())).collect();
    let budget = rng.gen_range(1..=cfg.max_nodes - n_inputs);

    let pick = |rng: &mut R, pool: &[TermId]| -> TermId {
        if rng.gen_bool(0.6) {
            let lo = pool.len().saturating_sub(4);
            pool[rng.gen_range(lo..pool.len())]
        } else {
            pool[rng.gen_range(0..pool.len())]
        }
    };
    for _ in 0..budget {
        let before = store.len();
        let t = match rng.gen_range(0..20) {
            0 => store.constant(rng.gen_bool(0.5)),
            1..=4 => {
                let a = pick(rng, &pool);
                store.not(a)
            }
            5..=12 => {
                let (a, b) = (pick(rng, &pool), pick(rng, &pool));
                store.and(a, b)
            }
            _ => {
                let (a, b) = (pick(rng, &pool), pick(rng, &pool));
                store.or(a, b)
            }
        };
        if store.len() > before {
            pool.push(t);
        }
        if store.len() >= cfg.max_nodes {
            break;
        }
    }

    let n_outputs = rng.gen_range(1..=cfg.max_outputs);
    let mut outputs = Vec::with_capacity(n_outputs);
    outputs.push((Name::from("f0"), *pool.last().expect("inputs are never empty")));
    for k in 1..n_outputs {
        let root = pool[rng.gen_range(0..pool.len())];
        outputs.push((Name::from(format!("f{k}").as_str()), root));
    }
    Circuit::new(store, inputs, outputs).expect("generated circuits are closed")
}
