//! Exact simulator of a single-tree quantum-walker qRAM.
//!
//! Address and data walkers travel down one binary tree, pick up the
//! addressed cell and travel back. Every gate is a permutation of walker
//! configurations, so states are sparse maps from configurations to
//! amplitudes and every run is exact.
//!
//! - `walker`, `gates`, `memory`: registers, gate actions, memory banks.
//! - `protocol`: the gate schedule, query execution and traces.
//! - `encodings`: qudit and dual-rail forms of the same protocol.
//! - `resources`: gate counts, depth, footprints and scaling fits.
//! - `oracle`: dense-matrix verification on small registers.
//! - `golden`, `notation`, `documents`, `cli`: reference walkthroughs, ket
//!   parsing, JSON documents and the command line.

pub mod cli;
pub mod documents;
pub mod encodings;
pub mod error;
pub mod gates;
pub mod golden;
pub mod memory;
pub mod notation;
pub mod oracle;
pub mod protocol;
pub mod resources;
pub mod walker;

pub use error::{QramError, Result};
