//! Congestion-aware ant colony routing for 3D warehouses and TSP instances.
//!
//! The crate is split along the pipeline:
//!
//! - [`warehouse`]: instances, cargo attributes, traffic state and seeded generators.
//! - [`aco`]: the expert heuristic, congestion-aware path cost and the ant colony itself.
//! - [`neural`]: the learned edge-heuristic network with hand-derived gradients.
//! - [`training`]: the congestion-aware reinforce loss and the training loop.
//! - [`bench`]: exact oracles, benchmark suites and result tables.

pub mod aco;
pub mod bench;
mod error;
pub mod neural;
pub mod training;
pub mod warehouse;

pub use error::{Error, Result};
