//! Small LP/MIP kernel: a bounded dual simplex with lazy rows and a
//! depth-first branch and bound on top of it.

mod branch;
mod error;
mod lp;
mod model;
mod simplex;

pub use branch::{solve_mip, MipParams, MipSolution, MipStats, MipStatus};
pub use error::ModelError;
pub use lp::{solve_lp, LpSolution, LpStatus};
pub use model::{Constraint, LinearModel, RowId, Sense, VarId, Variable};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("relaxation is unbounded")]
    Unbounded,
}
