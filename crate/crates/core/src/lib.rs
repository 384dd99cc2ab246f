//! Piecewise-stationary multi-armed bandits: environments, stationary index
//! policies, restart-based meta-algorithms (MASTER, random restarts, GLR
//! change detection) and a seeded Monte-Carlo harness for comparing them.

pub mod bandit;
pub mod cli;
pub mod env;
pub mod error;
pub mod glr;
pub mod harness;
pub mod learner;
pub mod master;
pub mod meta;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
