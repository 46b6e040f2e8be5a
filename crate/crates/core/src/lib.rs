//! Zonotope-partitioned symbolic controller synthesis.
//!
//! The state space is covered by overlapping zonotopes and constrained
//! zonotopes. A reach-avoid plan over the cell adjacency graph picks a chain
//! of cells; each cell gets its own finite abstraction and local controller,
//! and the local controllers are composed along the plan.

pub mod geometry;
pub mod graph;
pub mod partition;
pub mod abstraction;
pub mod synthesis;
pub mod pipeline;
