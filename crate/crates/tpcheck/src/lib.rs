//! Parameterized model checking for token-passing systems.

pub mod error;
mod graph;
pub mod logic;
pub mod lts;
pub mod pmcp;
pub mod system;
pub mod checker;
pub mod cm;
pub mod contraction;
pub mod cli;
pub mod dot;
pub mod template;
pub mod topology;

pub use error::{Error, Result};
