pub mod cli;
pub mod constructions;
pub mod error;
pub mod experiments;
pub mod gnn;
pub mod graph;
pub mod neural;
pub mod patterns;
pub mod rng;

pub use error::{Error, Result};
