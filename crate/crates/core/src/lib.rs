//! Decision region determination with independent Bernoulli tests.
//!
//! Given a set of binary tests with known pass probabilities and a family of
//! regions (sets of tests), adaptively choose tests until some region is shown
//! to consist entirely of passing tests, or every region contains a failure.

pub mod belief;
pub mod bench;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod error;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod policy;
pub mod runner;
pub mod seed;
pub mod stats;
pub mod verify;

pub use belief::{init_belief, BeliefState};
pub use error::{Error, Result};
pub use model::{GroundTruth, Observation, ProblemInstance, TestId};
pub use policy::{Policy, PolicyKind, PolicySpec, Selector};
pub use runner::{run, run_check_all, Conditioning, RunResult, Verdict};
