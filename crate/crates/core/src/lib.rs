//! Almost-sure termination analysis for probabilistic term rewrite systems
//! via annotated dependency pairs.

pub mod adp;
pub mod bench;
pub mod graph;
pub mod nonprob;
pub mod poly;
pub mod processors;
pub mod proof;
pub mod prover;
pub mod ptrs;
pub mod rational;
pub mod redpair;
pub mod rewrite;
pub mod simulate;
pub mod smt;
pub mod solver;
pub mod syntax;
pub mod term;
