//! Multi-output combinational circuits over a [`TermStore`].

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use thiserror::Error;

use crate::expr::{Name, Op, StructureError, TermId, TermStore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("duplicate input `{0}`")]
    DuplicateInput(Name),
    #[error("duplicate output `{0}`")]
    DuplicateOutput(Name),
    #[error("`{0}` is both an input and an output")]
    InputOutputClash(Name),
    #[error("output `{output}` depends on `{var}`, which is not an input")]
    UnknownVariable { output: Name, var: Name },
    #[error("root term does not carry {expected} outputs")]
    OutputCount { expected: usize },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// A closed circuit: every output root is a term over `inputs` only.
#[derive(Clone, Debug)]
pub struct Circuit {
    pub store: TermStore,
    inputs: Vec<Name>,
    outputs: Vec<(Name, TermId)>,
}

impl Circuit {
    pub fn new(
        store: TermStore,
        inputs: Vec<Name>,
        outputs: Vec<(Name, TermId)>,
    ) -> Result<Self, CircuitError> {
        let mut seen = BTreeSet::new();
        for i in &inputs {
            if !seen.insert(i.clone()) {
                return Err(CircuitError::DuplicateInput(i.clone()));
            }
        }
        let mut out_seen = BTreeSet::new();
        for (o, _) in &outputs {
            if seen.contains(o) {
                return Err(CircuitError::InputOutputClash(o.clone()));
            }
            if !out_seen.insert(o.clone()) {
                return Err(CircuitError::DuplicateOutput(o.clone()));
            }
        }
        for (o, root) in &outputs {
            if store.op(*root) == &Op::Concat {
                return Err(StructureError::NestedConcat.into());
            }
            for id in store.reachable(*root) {
                if let Op::Var(v) = store.op(id) {
                    if !seen.contains(v) {
                        return Err(CircuitError::UnknownVariable { output: o.clone(), var: v.clone() });
                    }
                }
            }
        }
        Ok(Circuit { store, inputs, outputs })
    }

    /// Rebuilds a circuit from a single rooted term as produced by
    /// [`Circuit::root`]: a CONCAT root for several outputs, the bare output
    /// otherwise.
    pub fn from_root(
        store: TermStore,
        inputs: Vec<Name>,
        output_names: Vec<Name>,
        root: TermId,
    ) -> Result<Self, CircuitError> {
        let roots: Vec<TermId> = if output_names.len() == 1 {
            if store.op(root) == &Op::Concat {
                return Err(CircuitError::OutputCount { expected: 1 });
            }
            alloc::vec![root]
        } else {
            if store.op(root) != &Op::Concat || store.children(root).len() != output_names.len() {
                return Err(CircuitError::OutputCount { expected: output_names.len() });
            }
            store.children(root).to_vec()
        };
        let outputs = output_names.into_iter().zip(roots).collect();
        Circuit::new(store, inputs, outputs)
    }

    pub fn inputs(&self) -> &[Name] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[(Name, TermId)] {
        &self.outputs
    }

    pub fn output_names(&self) -> Vec<Name> {
        self.outputs.iter().map(|(n, _)| n.clone()).collect()
    }

    /// The whole circuit as one term. Several outputs are bundled under a
    /// CONCAT root in OUTORDER; a single output is returned as is.
    pub fn root(&mut self) -> Result<TermId, CircuitError> {
        match self.outputs.len() {
            0 => Err(CircuitError::OutputCount { expected: 1 }),
            1 => Ok(self.outputs[0].1),
            _ => {
                let roots: Vec<TermId> = self.outputs.iter().map(|(_, r)| *r).collect();
                Ok(self.store.concat(&roots)?)
            }
        }
    }
}
