use thiserror::Error;

use crate::model::TestId;

/// Errors raised across instance validation, inference, policies and generators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("instance must have at least one test")]
    NoTests,

    #[error("instance must have at least one region")]
    NoRegions,

    #[error("region {region} is empty")]
    EmptyRegion { region: usize },

    #[error("region {second} duplicates region {first}")]
    DuplicateRegion { first: usize, second: usize },

    #[error("region {region} lists test {test} more than once")]
    DuplicateTestInRegion { region: usize, test: usize },

    #[error("bias of test {test} is {value}, outside the open interval (0, 1)")]
    BiasOutOfRange { test: usize, value: f64 },

    #[error("cost of test {test} is {value}, must be strictly positive")]
    NonPositiveCost { test: usize, value: f64 },

    #[error("region {region} references test {test} but the instance has {num_tests} tests")]
    TestIdOutOfRange {
        region: usize,
        test: usize,
        num_tests: usize,
    },

    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("test {0} has already been observed")]
    AlreadyObserved(TestId),

    #[error("no region has positive posterior")]
    NoActiveRegion,

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("policy {0} requires the maxprob selector")]
    WrongSelector(String),

    #[error("policy {0} assumes unit test costs")]
    NonUnitCost(String),

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error("policy selected already observed test {0}")]
    PolicyReturnedObservedTest(TestId),

    #[error(
        "rejection sampling exceeded {attempts} attempts with {accepted} accepted \
         (acceptance rate {rate:.3e})"
    )]
    RejectionCapExceeded {
        attempts: u64,
        accepted: u64,
        rate: f64,
    },

    #[error("{num_tests} tests exceeds the enumeration cap of {cap}")]
    TooManyTests { num_tests: usize, cap: usize },

    #[error("instance too large for exact dynamic programming: {0}")]
    TooLarge(String),

    #[error("start and goal are not connected")]
    DisconnectedStartGoal,

    #[error("found only {found} distinct paths of {wanted} after {attempts} attempts")]
    AttemptCapExceeded {
        found: usize,
        wanted: usize,
        attempts: usize,
    },

    #[error("no training world yields a valid path")]
    EmptyLibrary,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unknown report format `{0}`")]
    UnknownFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
