//! E-graph based optimization of combinational Boolean logic.
//!
//! Circuits are parsed from the equation format into hashconsed terms,
//! saturated with Boolean-algebra rewrites, and re-extracted by sampling a
//! pool of candidate implementations and ranking them with a cost model.
//! Every result can be checked against its source with [`equiv`].
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod circuit;
pub mod egraph;
pub mod eqn;
pub mod equiv;
pub mod expr;
pub mod extract;
pub mod features;
pub mod fuzz;
pub mod pipeline;
pub mod sexpr;

pub(crate) type FxBuild = rustc_hash::FxBuildHasher;
pub(crate) type HashMap<K, V> = hashbrown::HashMap<K, V, FxBuild>;

pub use circuit::{Circuit, CircuitError};
pub use expr::{DagStats, Name, Op, TermId, TermStore, Value};
