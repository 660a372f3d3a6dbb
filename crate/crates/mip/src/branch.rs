use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::lp::Relaxation;
use crate::model::{Constraint, LinearModel};
use crate::simplex::Outcome;
use crate::SolveError;

const INT_TOL: f64 = 1e-6;
const CUTOFF_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MipParams {
    pub time_limit: Option<Duration>,
    /// Relative gap at which the search stops; 0 asks for proven optimality.
    pub gap: f64,
    /// Known granularity of integral objective values, used to prune nodes
    /// that cannot improve the incumbent by a full step.
    pub objective_step: Option<f64>,
    /// Only solutions with an objective below this value are sought. With
    /// `objective_step` set, values within one step of it are cut as well.
    pub cutoff: Option<f64>,
}

impl Default for MipParams {
    fn default() -> Self {
        MipParams {
            time_limit: None,
            gap: 0.0,
            objective_step: None,
            cutoff: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Feasible,
    Infeasible,
    TimedOut,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MipStats {
    pub nodes: u64,
    pub lazy_rows: u64,
    pub callback_rows: u64,
    pub simplex_iterations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Best integral point found; empty when there is none.
    pub assignment: Vec<f64>,
    /// Objective of `assignment`, `+inf` when there is none.
    pub objective: f64,
    pub best_bound: f64,
    pub stats: MipStats,
}

impl MipSolution {
    pub fn has_solution(&self) -> bool {
        !self.assignment.is_empty()
    }

    pub fn value(&self, var: crate::VarId) -> f64 {
        self.assignment[var.0]
    }
}

struct Node {
    changes: Vec<(usize, f64, f64)>,
    bound: f64,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    x: Vec<f64>,
    obj: f64,
}

fn cutoff(inc: &Option<Incumbent>, params: &MipParams) -> f64 {
    let below = |v: f64| match params.objective_step {
        Some(step) if step > 0.0 => v - step + CUTOFF_EPS,
        _ => v - CUTOFF_EPS * v.abs().max(1.0),
    };
    let from_inc = inc.as_ref().map_or(f64::INFINITY, |i| below(i.obj));
    from_inc.min(params.cutoff.map_or(f64::INFINITY, below))
}

fn within_gap(inc: &Option<Incumbent>, bound: f64, params: &MipParams) -> bool {
    match inc {
        Some(i) if params.gap > 0.0 => i.obj - bound <= params.gap * i.obj.abs().max(1e-12),
        _ => false,
    }
}

/// Branch and bound over the integer variables of `model`.
///
/// `callback` sees every integral candidate and may return a row cutting it
/// off; such rows are added globally and the node is re-solved.
pub fn solve_mip<F>(
    model: &LinearModel,
    mut callback: F,
    params: &MipParams,
) -> Result<MipSolution, SolveError>
where
    F: FnMut(&[f64]) -> Option<Constraint>,
{
    model.validate()?;
    let start = Instant::now();
    let deadline = params.time_limit.map(|d| start + d);
    let mut stats = MipStats::default();
    let infeasible = |stats: MipStats| MipSolution {
        status: MipStatus::Infeasible,
        assignment: Vec::new(),
        objective: f64::INFINITY,
        best_bound: f64::INFINITY,
        stats,
    };

    let mut rel = Relaxation::new(model);
    let mut root: Vec<(f64, f64)> = Vec::with_capacity(model.num_vars());
    for (j, v) in model.vars().iter().enumerate() {
        let (lo, hi) = if v.integer {
            ((v.lower - INT_TOL).ceil(), (v.upper + INT_TOL).floor())
        } else {
            (v.lower, v.upper)
        };
        if lo > hi {
            return Ok(infeasible(stats));
        }
        root.push((lo, hi));
        rel.tab.set_bounds(j, lo, hi);
    }

    let mut open: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut dive = Some(Node {
        changes: Vec::new(),
        bound: f64::NEG_INFINITY,
        seq,
    });
    let mut incumbent: Option<Incumbent> = None;
    let mut gap_bound = f64::INFINITY;
    let mut timed_out = false;
    let mut applied: Vec<(usize, f64, f64)> = Vec::new();

    loop {
        let node = match dive.take().or_else(|| open.pop()) {
            Some(n) => n,
            None => break,
        };
        if node.bound > cutoff(&incumbent, params) {
            continue;
        }
        if within_gap(&incumbent, node.bound, params) {
            gap_bound = gap_bound.min(node.bound);
            continue;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            open.push(node);
            timed_out = true;
            break;
        }
        stats.nodes += 1;
        for &(j, _, _) in &applied {
            rel.tab.set_bounds(j, root[j].0, root[j].1);
        }
        for &(j, lo, hi) in &node.changes {
            rel.tab.set_bounds(j, lo, hi);
        }
        applied.clone_from(&node.changes);
        rel.tab.refresh();

        loop {
            match rel.solve(deadline)? {
                Outcome::Optimal => {}
                Outcome::Infeasible => break,
                Outcome::Unbounded => return Err(SolveError::Unbounded),
                Outcome::TimedOut | Outcome::IterationLimit => {
                    timed_out = true;
                    break;
                }
            }
            let obj = rel.objective();
            if obj > cutoff(&incumbent, params) {
                break;
            }
            if within_gap(&incumbent, obj, params) {
                gap_bound = gap_bound.min(obj);
                break;
            }
            let x = rel.tab.primal();
            let mut pick: Option<(usize, f64)> = None;
            for (j, v) in model.vars().iter().enumerate() {
                if !v.integer {
                    continue;
                }
                let frac = x[j] - x[j].floor();
                let score = frac.min(1.0 - frac);
                if score > INT_TOL && pick.is_none_or(|(_, s)| score > s) {
                    pick = Some((j, score));
                }
            }
            match pick {
                None => {
                    let cand: Vec<f64> = x
                        .iter()
                        .zip(model.vars())
                        .map(|(&xv, v)| if v.integer { xv.round() } else { xv })
                        .collect();
                    if let Some(cut) = callback(&cand) {
                        rel.add_cut(&cut)?;
                        stats.callback_rows += 1;
                        rel.tab.refresh();
                        continue;
                    }
                    let val = model.objective_value(&cand);
                    if incumbent.as_ref().is_none_or(|i| val < i.obj) {
                        log::debug!("incumbent {val} at node {}", stats.nodes);
                        incumbent = Some(Incumbent { x: cand, obj: val });
                    }
                }
                Some((j, _)) => {
                    let (lo, hi) = rel.tab.bounds(j);
                    let mut up = node.changes.clone();
                    up.push((j, x[j].ceil(), hi));
                    let mut down = node.changes.clone();
                    down.push((j, lo, x[j].floor()));
                    seq += 1;
                    open.push(Node {
                        changes: down,
                        bound: obj,
                        seq,
                    });
                    seq += 1;
                    dive = Some(Node {
                        changes: up,
                        bound: obj,
                        seq,
                    });
                }
            }
            break;
        }
        if timed_out {
            open.push(node);
            break;
        }
    }

    stats.lazy_rows = rel.lazy_rows_added;
    stats.simplex_iterations = rel.tab.iterations;
    let open_bound = open
        .iter()
        .chain(dive.iter())
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min);
    let Some(inc) = incumbent else {
        if timed_out {
            return Ok(MipSolution {
                status: MipStatus::TimedOut,
                assignment: Vec::new(),
                objective: f64::INFINITY,
                best_bound: open_bound.min(gap_bound),
                stats,
            });
        }
        return Ok(infeasible(stats));
    };
    let best_bound = inc.obj.min(open_bound).min(gap_bound);
    let status = if timed_out {
        MipStatus::TimedOut
    } else if inc.obj - best_bound <= 1e-9 * inc.obj.abs().max(1.0) {
        MipStatus::Optimal
    } else {
        MipStatus::Feasible
    };
    Ok(MipSolution {
        status,
        assignment: inc.x,
        objective: inc.obj,
        best_bound: if status == MipStatus::Optimal {
            inc.obj
        } else {
            best_bound
        },
        stats,
    })
}
