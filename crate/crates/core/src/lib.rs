//! Exact sampling of weighted uniform spanning trees.
//!
//! The crate is organised bottom-up: [`graph`] holds multigraphs and minors,
//! [`spectral`] and [`schur`] provide the electrical quantities, [`samplers`]
//! the classical exact samplers and the enumeration oracle. On top of those,
//! [`conditioning`], [`clustering`], [`shortcutting`] and [`fixing`] implement
//! the pieces used by the shortcutting pipeline in [`pipeline`]. [`harness`]
//! holds the statistical checks, generators and the suites behind the `ust`
//! binary.

pub mod clustering;
pub mod conditioning;
pub mod error;
pub mod fixing;
pub mod graph;
pub mod harness;
pub mod pipeline;
pub mod rng;
pub mod samplers;
pub mod schur;
pub mod shortcutting;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{EdgeId, Graph, MinorMap, Vertex};
