//! Divide-and-conquer MaxCut/QUBO solving on a small-qubit QAOA
//! statevector simulator, with heuristic partitioners and a learned
//! joint partition/parameter generator trained against a differentiable
//! surrogate of solve quality.

pub mod bench;
pub mod error;
pub mod features;
pub mod gen;
pub mod graph;
pub mod nn;
pub mod partition;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
