//! Long-horizon manipulation from demonstrations: dynamic movement
//! primitives, task conditions, and condition-guided execution inside a
//! deterministic kinematic simulator.

pub mod bench;
pub mod cond;
pub mod dmp;
pub mod exec;
pub mod library;
pub mod llm;
pub mod percept;
pub mod types;
pub mod world;

pub use types::*;
