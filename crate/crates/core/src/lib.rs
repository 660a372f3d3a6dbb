//! Minimal-allocation TDM schedules for latency-rate clients.
//!
//! Exact methods: a monolithic ILP ([`ilp`]) and branch and price ([`bnp`]
//! over [`colgen`]). Heuristics, an instance generator and an independent
//! verifier complete the toolbox.

pub mod bnp;
pub mod colgen;
pub mod error;
pub mod heuristics;
pub mod ilp;
pub mod io;
pub mod model;
pub mod ratio;
pub mod usecase;
pub mod verify;

use serde::Serialize;

pub use error::{CoreError, Result};
pub use model::{ClientId, ClientRequirement, DominanceClass, ProblemInstance, Schedule};
pub use ratio::Ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    /// A heuristic gave up without a feasible schedule.
    NoFeasible,
    TimedOut,
}

impl Status {
    pub fn has_solution(self) -> bool {
        matches!(self, Status::Optimal | Status::Feasible)
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::NoFeasible => "no_feasible",
            Status::TimedOut => "timed_out",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::{solve_direct, IlpBuildOptions};
    use crate::ratio::parse_ratio;

    #[test]
    fn two_client_ilp() {
        let r = |s| parse_ratio(s).unwrap();
        let inst = ProblemInstance::new(
            10,
            vec![
                ClientRequirement::new("c1", r("0.5"), Some(r("3"))),
                ClientRequirement::new("c2", r("0.3"), Some(r("3"))),
            ],
        )
        .unwrap();
        for opts in IlpBuildOptions::flag_combinations() {
            let res = solve_direct(&inst, &opts, None).unwrap();
            assert_eq!(res.status, Status::Optimal);
            assert_eq!(res.objective, Some(Ratio::new(4, 5)));
        }
    }
}
