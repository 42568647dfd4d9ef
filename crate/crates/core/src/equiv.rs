//! Combinational equivalence by bit-parallel simulation.
//!
//! Circuits with few inputs are compared on their full truth tables; larger
//! ones on seeded random vectors, where agreement is only inconclusive.

use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::Circuit;
use crate::expr::{Name, Op, TermId, TermStore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterfaceError {
    #[error("input sets differ")]
    Inputs,
    #[error("output names or order differ")]
    Outputs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EquivConfig {
    pub exhaustive_input_limit: usize,
    pub random_vectors: usize,
    pub seed: u64,
}

impl Default for EquivConfig {
    fn default() -> Self {
        EquivConfig { exhaustive_input_limit: 12, random_vectors: 10_000, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equivalent,
    Inequivalent,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Equivalent => "equivalent",
            Verdict::Inequivalent => "inequivalent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Exhaustive,
    Random,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exhaustive => "exhaustive",
            Method::Random => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    /// Values in the first circuit's input order.
    pub assignment: Vec<(Name, bool)>,
    /// First output that differs.
    pub output: Name,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivReport {
    pub verdict: Verdict,
    pub method: Method,
    pub counterexample: Option<Counterexample>,
    pub vectors_tested: u64,
}

/// Straight-line program evaluating a circuit's outputs on 64 rows at once.
struct Program {
    steps: Vec<(TermId, Step)>,
    outputs: Vec<TermId>,
    slots: usize,
}

enum Step {
    Input(usize),
    Const(u64),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
}

impl Program {
    /// `inputs` fixes the word position of every input name.
    fn compile(store: &TermStore, roots: &[TermId], inputs: &[Name]) -> Program {
        let order = store.reachable_from(roots);
        let mut steps = Vec::with_capacity(order.len());
        for &id in &order {
            let c = store.children(id);
            let step = match store.op(id) {
                Op::Var(n) => Step::Input(inputs.iter().position(|i| i == n).expect("circuit variables are inputs")),
                Op::Const(b) => Step::Const(if *b { !0 } else { 0 }),
                Op::Not => Step::Not(c[0].index()),
                Op::And => Step::And(c[0].index(), c[1].index()),
                Op::Or => Step::Or(c[0].index(), c[1].index()),
                Op::Concat => unreachable!("circuit outputs are never CONCAT"),
            };
            steps.push((id, step));
        }
        Program { steps, outputs: roots.to_vec(), slots: store.len() }
    }

    fn run(&self, inputs: &[u64], scratch: &mut Vec<u64>, out: &mut Vec<u64>) {
        scratch.clear();
        scratch.resize(self.slots, 0);
        for (id, step) in &self.steps {
            scratch[id.index()] = match *step {
                Step::Input(k) => inputs[k],
                Step::Const(w) => w,
                Step::Not(a) => !scratch[a],
                Step::And(a, b) => scratch[a] & scratch[b],
                Step::Or(a, b) => scratch[a] | scratch[b],
            };
        }
        out.clear();
        out.extend(self.outputs.iter().map(|o| scratch[o.index()]));
    }
}

fn same_set(a: &[Name], b: &[Name]) -> bool {
    let mut x: Vec<&str> = a.iter().map(|n| &**n).collect();
    let mut y: Vec<&str> = b.iter().map(|n| &**n).collect();
    x.sort_unstable();
    y.sort_unstable();
    x == y
}

/// Input words for exhaustive block `block`: row `64 * block + lane` sets
/// input `k` to bit `k` of the row number.
fn exhaustive_words(n: usize, block: u64, words: &mut [u64]) {
    for (k, w) in words.iter_mut().enumerate().take(n) {
        *w = 0;
        for lane in 0..64u64 {
            let row = block * 64 + lane;
            *w |= ((row >> k) & 1) << lane;
        }
    }
}

/// Compares two circuits with the same inputs (any order) and the same
/// output names in the same order.
pub fn check_equiv(a: &Circuit, b: &Circuit, cfg: &EquivConfig) -> Result<EquivReport, InterfaceError> {
    if !same_set(a.inputs(), b.inputs()) {
        return Err(InterfaceError::Inputs);
    }
    if a.output_names() != b.output_names() {
        return Err(InterfaceError::Outputs);
    }
    let inputs = a.inputs();
    let n = inputs.len();
    let roots = |c: &Circuit| c.outputs().iter().map(|(_, r)| *r).collect::<Vec<_>>();
    let pa = Program::compile(&a.store, &roots(a), inputs);
    let pb = Program::compile(&b.store, &roots(b), inputs);

    let exhaustive = n <= cfg.exhaustive_input_limit;
    let total: u64 = if exhaustive { 1u64 << n } else { cfg.random_vectors as u64 };
    let method = if exhaustive { Method::Exhaustive } else { Method::Random };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut words = vec![0u64; n];
    let (mut scratch, mut out_a, mut out_b) = (Vec::new(), Vec::new(), Vec::new());
    let mut tested = 0u64;
    let mut block = 0u64;
    while tested < total {
        let lanes = (total - tested).min(64);
        let mask = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        if exhaustive {
            exhaustive_words(n, block, &mut words);
        } else {
            words.iter_mut().for_each(|w| *w = rng.next_u64());
        }
        pa.run(&words, &mut scratch, &mut out_a);
        pb.run(&words, &mut scratch, &mut out_b);
        tested += lanes;
        for (o, (x, y)) in out_a.iter().zip(&out_b).enumerate() {
            let diff = (x ^ y) & mask;
            if diff != 0 {
                let lane = diff.trailing_zeros();
                let assignment = inputs.iter().zip(&words).map(|(name, w)| (name.clone(), (w >> lane) & 1 == 1)).collect();
                return Ok(EquivReport {
                    verdict: Verdict::Inequivalent,
                    method,
                    counterexample: Some(Counterexample { assignment, output: a.outputs()[o].0.clone() }),
                    vectors_tested: tested,
                });
            }
        }
        block += 1;
    }
    let verdict = if exhaustive { Verdict::Equivalent } else { Verdict::Inconclusive };
    Ok(EquivReport { verdict, method, counterexample: None, vectors_tested: tested })
}
