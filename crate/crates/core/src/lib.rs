//! Rigorous numerics for countable-state hidden Markov models.

pub mod analysis;
pub mod claims;
pub mod cli;
pub mod enclosure;
pub mod error;
pub mod forward;
pub mod machine;
pub mod processes;
pub mod sampler;
pub mod series;

pub use enclosure::Enclosure;
pub use error::{Error, Result};
pub use machine::{Alphabet, Edge, Machine, StateKey, Support, Symbol};
