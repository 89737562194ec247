pub mod env;
pub mod error;
pub mod graph;
pub mod harness;
pub mod instance;
pub mod policy;
pub mod qlearning;
pub mod rng;
pub mod srp;

pub use error::{Error, Result};
