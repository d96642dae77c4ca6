//! Invariants of polarized real tori, Riemann theta functions on
//! degenerating families, metrized graphs and arithmetic height bounds.

pub mod bounds;
pub mod degeneration;
pub mod graph;
pub mod io;
pub mod lattice;
pub mod theta;
