//! Physics-constrained network flows as factor graphs.
//!
//! A [`Network`](network::Network) of gas, AC or dissipative edges is turned into a
//! bipartite [`FactorGraph`](graph::FactorGraph). Continuous domains are cut into
//! interval cells ([`discretize`]), which yields a finite valued CSP. Its belief LP
//! ([`lp`]) gives a certified lower bound, the tree DP ([`tree`]) solves it exactly
//! on acyclic graphs, [`tighten`] shrinks domains beforehand and [`oracle`] holds
//! brute-force references.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cost;
pub mod discretize;
pub mod error;
pub mod graph;
pub mod interval;
pub mod lp;
pub mod network;
pub mod oracle;
pub mod physics;
pub mod region;
pub mod relation;
pub mod tighten;
pub mod tree;

pub use error::{Error, Result};
pub use interval::Interval;
