//! Generative collision-resolving heuristic and the contiguous-block baseline.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colgen::SubModel;
use crate::error::{CoreError, Result};
use crate::model::{ClientId, ProblemInstance, Schedule};
use crate::verify::schedule_feasible;
use crate::Status;

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicConfig {
    pub alpha: f64,
    pub max_iterations: usize,
    pub sub_model_gap: f64,
    pub seed: u64,
    pub time_limit: Option<Duration>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            alpha: 0.1,
            max_iterations: 250,
            sub_model_gap: 0.05,
            seed: 0,
            time_limit: None,
        }
    }
}

/// How often each slot was taken by each client's sub-model so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationHistory {
    total: Vec<u64>,
    own: Vec<Vec<u64>>,
}

impl AllocationHistory {
    pub fn new(n: usize, f: usize) -> Self {
        AllocationHistory {
            total: vec![0; f],
            own: vec![vec![0; f]; n],
        }
    }

    pub fn record(&mut self, client: ClientId, mask: &[bool]) {
        for (j, _) in mask.iter().enumerate().filter(|(_, &b)| b) {
            self.total[j] += 1;
            self.own[client][j] += 1;
        }
    }

    /// Allocations of slot `j` by clients other than `client`.
    pub fn d(&self, j: usize, client: ClientId) -> u64 {
        self.total[j] - self.own[client][j]
    }
}

/// Slot costs steering `client` away from contested slots.
pub fn compute_coefficients<R: Rng>(
    client: ClientId,
    alpha: f64,
    history: &AllocationHistory,
    current: &[Vec<bool>],
    rng: &mut R,
) -> Vec<f64> {
    let f = current[client].len();
    (0..f)
        .map(|j| {
            let mine = current[client][j];
            let others = current.iter().enumerate().any(|(i, m)| i != client && m[j]);
            match (mine, others) {
                (false, true) => (1.0 + history.d(j, client) as f64 * alpha).min(2.0),
                (true, false) => 0.9,
                (true, true) => 1.0 + rng.gen::<f64>() * 1.5,
                (false, false) => 1.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct HeuristicResult {
    pub schedule: Option<Schedule>,
    pub status: Status,
    pub iterations: usize,
}

impl HeuristicResult {
    fn none(iterations: usize) -> Self {
        HeuristicResult {
            schedule: None,
            status: Status::NoFeasible,
            iterations,
        }
    }
}

fn has_collision(masks: &[Vec<bool>]) -> bool {
    let f = masks.first().map_or(0, |m| m.len());
    (0..f).any(|j| masks.iter().filter(|m| m[j]).count() > 1)
}

/// Round-robin re-allocation of one client at a time until no slot is
/// claimed twice.
pub fn generative(instance: &ProblemInstance, config: &HeuristicConfig) -> Result<HeuristicResult> {
    let (n, f) = (instance.n(), instance.frame_size);
    let deadline = config.time_limit.map(|t| Instant::now() + t);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut subs: Vec<SubModel> = (0..n).map(|i| SubModel::new(instance, i)).collect();
    let mut masks = vec![vec![false; f]; n];
    let mut history = AllocationHistory::new(n, f);
    let max_iter = config.max_iterations.max(n);
    for iter in 0..max_iter {
        let i = iter % n;
        let costs = compute_coefficients(i, config.alpha, &history, &masks, &mut rng);
        let sol = match subs[i].solve(&costs, 0.0, &[], config.sub_model_gap, deadline) {
            Ok(Some(s)) => s,
            Ok(None) => return Ok(HeuristicResult::none(iter + 1)),
            Err(CoreError::TimedOut) => return Ok(HeuristicResult::none(iter)),
            Err(e) => return Err(e),
        };
        history.record(i, &sol.mask);
        masks[i] = sol.mask;
        if iter + 1 >= n && !has_collision(&masks) {
            let schedule = Schedule::from_masks(&masks)?;
            if !schedule_feasible(&schedule, instance)?.feasible {
                return Err(CoreError::InvalidSchedule(
                    "heuristic produced a schedule failing verification".into(),
                ));
            }
            log::debug!("heuristic converged after {} iterations", iter + 1);
            return Ok(HeuristicResult {
                schedule: Some(schedule),
                status: Status::Feasible,
                iterations: iter + 1,
            });
        }
    }
    Ok(HeuristicResult::none(max_iter))
}

/// Best of `runs` seeded heuristic runs (seeds `seed, seed+1, ...`).
pub fn best_of_runs(
    instance: &ProblemInstance,
    config: &HeuristicConfig,
    runs: usize,
) -> Result<HeuristicResult> {
    let mut best = HeuristicResult::none(0);
    for r in 0..runs as u64 {
        let cfg = HeuristicConfig {
            seed: config.seed.wrapping_add(r),
            ..config.clone()
        };
        let res = generative(instance, &cfg)?;
        let better = match (&res.schedule, &best.schedule) {
            (Some(s), Some(b)) => s.allocated_total() < b.allocated_total(),
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best = res;
        }
    }
    Ok(best)
}

/// Each client gets one contiguous block of its lower-bound slot count,
/// tightest latency first.
pub fn continuous_allocation(instance: &ProblemInstance) -> Result<HeuristicResult> {
    let f = instance.frame_size;
    let mut slots = vec![None; f];
    let mut next = 0;
    for i in instance.latency_order() {
        let len = instance.min_slots(i);
        if next + len > f {
            return Ok(HeuristicResult::none(1));
        }
        for s in &mut slots[next..next + len] {
            *s = Some(i);
        }
        next += len;
    }
    let schedule = Schedule::new(slots, instance.n())?;
    if schedule_feasible(&schedule, instance)?.feasible {
        Ok(HeuristicResult {
            schedule: Some(schedule),
            status: Status::Feasible,
            iterations: 1,
        })
    } else {
        Ok(HeuristicResult::none(1))
    }
}
