use thiserror::Error;

use crate::ratio::ParseRatioError;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("unknown client {0}")]
    UnknownClient(usize),
    #[error("client {0} has no allocated slot, its service latency is undefined")]
    LatencyUndefined(usize),
    #[error("rate must be positive")]
    ZeroRate,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("contradictory fixings: {0}")]
    ContradictoryFixings(String),
    #[error("client {0} has no admissible column at this node")]
    NodeInfeasible(usize),
    #[error("client {0} has no feasible allocation under the node decisions")]
    ClientInfeasible(usize),
    #[error("gave up after {0} generation attempts")]
    GenerationExhausted(usize),
    #[error("enumeration needs {0:e} labelings, above the budget")]
    BudgetExceeded(f64),
    #[error("no undecided (client, slot) pair left to branch on")]
    NoBranch,
    #[error("time limit reached")]
    TimedOut,
    #[error("linear relaxation did not solve to optimality: {0}")]
    NotOptimal(String),
    #[error(transparent)]
    Solver(#[from] tdm_mip::SolveError),
    #[error(transparent)]
    Parse(#[from] ParseRatioError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
