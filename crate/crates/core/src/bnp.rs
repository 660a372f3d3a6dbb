//! Depth-first branch and price over (client, slot) decisions.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::colgen::{
    column_generation, CgLimits, CgStatus, Column, ColumnPool, DualPrices, MasterSolution, Pricer,
};
use crate::error::{CoreError, Result};
use crate::heuristics::{best_of_runs, HeuristicConfig};
use crate::ilp::{solve_direct_below, IlpBuildOptions};
use crate::model::{ClientId, DominanceClass, ProblemInstance, Schedule};
use crate::ratio::Ratio;
use crate::verify::{schedule_feasible, Fixing};
use crate::Status;

/// Longest a single ILP completion may run. A completion that hits its limit
/// switches completions off for the rest of the search.
pub const COMPLETION_CAP: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Allocate,
    Forbid,
}

/// A node of the search tree: the decisions taken on the path from the root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BnpNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub decisions: Vec<(ClientId, usize, Decision)>,
    /// Lower bound inherited from the parent until the node is solved.
    pub local_bound: f64,
}

impl Default for BnpNode {
    fn default() -> Self {
        BnpNode::root()
    }
}

impl BnpNode {
    pub fn root() -> Self {
        BnpNode {
            id: 0,
            parent: None,
            depth: 0,
            decisions: Vec::new(),
            local_bound: f64::NEG_INFINITY,
        }
    }

    pub fn child(&self, client: ClientId, slot: usize, d: Decision) -> BnpNode {
        let mut decisions = self.decisions.clone();
        decisions.push((client, slot, d));
        BnpNode {
            id: 0,
            parent: Some(self.id),
            depth: self.depth + 1,
            decisions,
            local_bound: self.local_bound,
        }
    }

    /// Whether `client` owning `slot` is forced (`Some(true)`), ruled out
    /// (`Some(false)`) or open. An allocation to another client rules it out.
    pub fn state(&self, client: ClientId, slot: usize) -> Option<bool> {
        let mut out = None;
        for &(c, s, d) in &self.decisions {
            if s != slot {
                continue;
            }
            match (c == client, d) {
                (true, Decision::Allocate) => return Some(true),
                (true, Decision::Forbid) | (false, Decision::Allocate) => out = Some(false),
                (false, Decision::Forbid) => {}
            }
        }
        out
    }

    pub fn admits(&self, col: &Column) -> bool {
        self.decisions
            .iter()
            .all(|&(c, s, d)| match (c == col.client, d) {
                (true, Decision::Allocate) => col.mask[s],
                (true, Decision::Forbid) | (false, Decision::Allocate) => !col.mask[s],
                (false, Decision::Forbid) => true,
            })
    }

    /// Slot fixings `(slot, value)` the node imposes on `client`.
    pub fn fixings_for(&self, client: ClientId) -> Vec<(usize, bool)> {
        let mut out: Vec<(usize, bool)> = Vec::new();
        for &(c, s, d) in &self.decisions {
            let v = match (c == client, d) {
                (true, Decision::Allocate) => true,
                (true, Decision::Forbid) | (false, Decision::Allocate) => false,
                (false, Decision::Forbid) => continue,
            };
            out.push((s, v));
        }
        out
    }

    pub fn as_fixings(&self) -> Vec<Fixing> {
        self.decisions
            .iter()
            .map(|&(c, s, d)| (c, s, d == Decision::Allocate))
            .collect()
    }

    pub fn positive_count(&self) -> usize {
        self.decisions
            .iter()
            .filter(|d| d.2 == Decision::Allocate)
            .count()
    }

    pub fn negative_count(&self) -> usize {
        self.decisions.len() - self.positive_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branching {
    Sequential,
    MaxProbability,
}

impl Branching {
    pub fn default_for(n: usize) -> Self {
        if n <= 16 {
            Branching::Sequential
        } else {
            Branching::MaxProbability
        }
    }
}

/// When a node is handed to the ILP instead of being branched further.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Completion {
    /// Thresholds chosen from the client count.
    Auto,
    Off,
    /// Fractions of `f`: explicit allocations, explicit prohibitions.
    At {
        positive: f64,
        negative: f64,
    },
}

/// Default completion thresholds for `n` clients, as fractions of `f`.
pub fn completion_thresholds(n: usize) -> (f64, f64) {
    const POS: [f64; 5] = [0.10, 0.30, 0.60, 0.80, 0.95];
    const NEG: [f64; 5] = [0.40, 1.00, 1.20, 2.60, 3.00];
    let x = ((n.max(1) as f64).log2() - 3.0).clamp(0.0, 4.0);
    let lo = x.floor() as usize;
    let hi = (lo + 1).min(4);
    let t = x - lo as f64;
    (
        POS[lo] + t * (POS[hi] - POS[lo]),
        NEG[lo] + t * (NEG[hi] - NEG[lo]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnpConfig {
    /// `None` picks by client count.
    pub branching: Option<Branching>,
    pub completion: Completion,
    pub time_limit: Option<Duration>,
    /// Heuristic warm-start runs; `None` means 1 for bandwidth-dominated
    /// instances and 8 otherwise, `Some(0)` disables the warm start.
    pub heuristic_runs: Option<usize>,
    pub seed: u64,
    pub lagrangian_stop: bool,
    pub record_log: bool,
}

impl Default for BnpConfig {
    fn default() -> Self {
        BnpConfig {
            branching: None,
            completion: Completion::Auto,
            time_limit: None,
            heuristic_runs: None,
            seed: 0,
            lagrangian_stop: true,
            record_log: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BnpStats {
    pub nodes_opened: usize,
    pub nodes_pruned: usize,
    pub nodes_infeasible: usize,
    pub columns_generated: usize,
    pub completions: usize,
    pub cg_rounds: usize,
    pub lagrangian_stops: usize,
    pub incumbent_updates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOutcome {
    /// Bound inherited from the parent was already too weak.
    PrunedEarly,
    Pruned,
    Infeasible,
    Integral,
    Branched,
    Completed,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeLog {
    pub id: usize,
    pub depth: usize,
    pub decisions: Vec<(ClientId, usize, Decision)>,
    pub lagrangian_estimates: Vec<f64>,
    pub lower_bound: Option<f64>,
    pub converged: bool,
    /// Incumbent slot count when the node was closed.
    pub incumbent_slots: Option<usize>,
    pub outcome: NodeOutcome,
}

#[derive(Debug, Clone)]
pub struct BnpResult {
    pub schedule: Option<Schedule>,
    pub status: Status,
    pub objective: Option<Ratio>,
    pub bound: f64,
    pub stats: BnpStats,
    pub log: Vec<NodeLog>,
}

/// Client whose allocation is pinned to slot 0 at the root: tightest latency
/// among clients needing at least one slot.
pub fn root_client(instance: &ProblemInstance) -> Option<ClientId> {
    instance
        .latency_order()
        .into_iter()
        .find(|&i| instance.min_slots(i) >= 1)
}

fn client_order(instance: &ProblemInstance) -> Vec<ClientId> {
    instance.latency_order()
}

/// Next undecided pair in client-major, slot-minor order. Returns the
/// (Forbid, Allocate) children, Forbid to be explored first.
pub fn branch_sequential(node: &BnpNode, instance: &ProblemInstance) -> Result<(BnpNode, BnpNode)> {
    for c in client_order(instance) {
        for s in 0..instance.frame_size {
            if node.state(c, s).is_none() {
                return Ok((
                    node.child(c, s, Decision::Forbid),
                    node.child(c, s, Decision::Allocate),
                ));
            }
        }
    }
    Err(CoreError::NoBranch)
}

/// Branches on the undecided slot with the largest column weight for the
/// first client that still has undecided weight, leftmost on ties. Returns
/// the (Allocate, Forbid) children, Allocate to be explored first.
pub fn branch_max_probability(
    node: &BnpNode,
    instance: &ProblemInstance,
    master: &MasterSolution,
    pool: &ColumnPool,
) -> Result<(BnpNode, BnpNode)> {
    let f = instance.frame_size;
    for c in client_order(instance) {
        let total = master.slot_weights(pool, c, f);
        let mut best: Option<(usize, f64)> = None;
        for (s, &w) in total.iter().enumerate() {
            if node.state(c, s).is_some() {
                continue;
            }
            if best.is_none_or(|(_, b)| w > b + 1e-9) {
                best = Some((s, w));
            }
        }
        if let Some((s, w)) = best {
            if w > 1e-9 {
                return Ok((
                    node.child(c, s, Decision::Allocate),
                    node.child(c, s, Decision::Forbid),
                ));
            }
        }
    }
    Err(CoreError::NoBranch)
}

/// Solves the node's remaining problem with the ILP, decisions as fixings.
/// With `below` set only schedules with fewer slots are sought, so
/// `Infeasible` means the node cannot improve on the incumbent.
pub fn complete_with_ilp(
    node: &BnpNode,
    instance: &ProblemInstance,
    time_limit: Option<Duration>,
    below: Option<usize>,
) -> Result<(Option<Schedule>, Status)> {
    let opts = IlpBuildOptions {
        fix_first_slot: false,
        partial_fixings: node.as_fixings(),
        ..Default::default()
    };
    match solve_direct_below(instance, &opts, time_limit, below) {
        Ok(r) => Ok((r.schedule, r.status)),
        Err(CoreError::ContradictoryFixings(_)) => Ok((None, Status::Infeasible)),
        Err(e) => Err(e),
    }
}

fn instance_is_bandwidth_dominated(instance: &ProblemInstance) -> bool {
    (0..instance.n()).all(|i| instance.dominance(i) == DominanceClass::BandwidthDominated)
}

struct Search<'a> {
    instance: &'a ProblemInstance,
    config: &'a BnpConfig,
    deadline: Option<Instant>,
    pool: ColumnPool,
    pricer: Pricer,
    incumbent: Option<Schedule>,
    stats: BnpStats,
    log: Vec<NodeLog>,
    next_id: usize,
    completion_enabled: bool,
}

impl Search<'_> {
    fn f(&self) -> usize {
        self.instance.frame_size
    }

    fn upper_bound(&self) -> Option<f64> {
        self.incumbent
            .as_ref()
            .map(|s| s.allocated_total() as f64 / self.f() as f64)
    }

    fn prunable(&self, bound: f64) -> bool {
        self.upper_bound()
            .is_some_and(|ub| bound > ub - 1.0 / self.f() as f64 + 1e-9)
    }

    fn offer(&mut self, schedule: Schedule) -> Result<()> {
        let better = self
            .incumbent
            .as_ref()
            .is_none_or(|inc| schedule.allocated_total() < inc.allocated_total());
        if !better {
            return Ok(());
        }
        let report = schedule_feasible(&schedule, self.instance)?;
        if !report.feasible {
            return Err(CoreError::InvalidSchedule(format!(
                "candidate incumbent failed verification: {report:?}"
            )));
        }
        log::info!("incumbent {}/{}", schedule.allocated_total(), self.f());
        self.stats.incumbent_updates += 1;
        self.incumbent = Some(schedule);
        Ok(())
    }

    fn record(
        &mut self,
        node: &BnpNode,
        estimates: Vec<f64>,
        lb: Option<f64>,
        converged: bool,
        outcome: NodeOutcome,
    ) {
        if !self.config.record_log {
            return;
        }
        self.log.push(NodeLog {
            id: node.id,
            depth: node.depth,
            decisions: node.decisions.clone(),
            lagrangian_estimates: estimates,
            lower_bound: lb,
            converged,
            incumbent_slots: self.incumbent.as_ref().map(|s| s.allocated_total()),
            outcome,
        });
    }

    /// Adds a node-admissible column for clients that have none.
    fn seed_columns(&mut self, node: &BnpNode) -> Result<bool> {
        let n = self.instance.n();
        let zero = DualPrices::zero(n, self.f());
        for i in 0..n {
            let has = self
                .pool
                .of_client(i)
                .iter()
                .any(|&idx| node.admits(self.pool.get(idx)));
            if has {
                continue;
            }
            match self.pricer.price_client(i, &zero, node, 0.0, self.deadline) {
                Ok(p) => {
                    self.pool.add(p.column);
                }
                Err(CoreError::ClientInfeasible(_)) => return Ok(false),
                Err(e) => return Err(e),
            }
        }
        Ok(true)
    }

    fn completion_due(&self, node: &BnpNode) -> bool {
        if !self.completion_enabled {
            return false;
        }
        let (pos, neg) = match self.config.completion {
            Completion::Off => return false,
            Completion::Auto => completion_thresholds(self.instance.n()),
            Completion::At { positive, negative } => (positive, negative),
        };
        let f = self.f() as f64;
        node.positive_count() as f64 >= pos * f - 1e-9
            || node.negative_count() as f64 >= neg * f - 1e-9
    }

    fn time_left(&self) -> Option<Duration> {
        self.deadline
            .map(|d| d.saturating_duration_since(Instant::now()))
    }
}

pub fn solve_bnp(instance: &ProblemInstance, config: &BnpConfig) -> Result<BnpResult> {
    instance.validate()?;
    let (n, f) = (instance.n(), instance.frame_size);
    let deadline = config.time_limit.map(|t| Instant::now() + t);
    let lower: usize = (0..n).map(|i| instance.min_slots(i)).sum();
    if lower > f {
        return Ok(BnpResult {
            schedule: None,
            status: Status::Infeasible,
            objective: None,
            bound: f64::INFINITY,
            stats: BnpStats::default(),
            log: Vec::new(),
        });
    }
    let branching = config
        .branching
        .unwrap_or_else(|| Branching::default_for(n));
    let mut s = Search {
        instance,
        config,
        deadline,
        pool: ColumnPool::new(n),
        pricer: Pricer::new(instance),
        incumbent: None,
        stats: BnpStats::default(),
        log: Vec::new(),
        next_id: 1,
        completion_enabled: true,
    };
    let pinned = root_client(instance);
    let mut root = BnpNode::root();
    if let Some(c) = pinned {
        root.decisions.push((c, 0, Decision::Allocate));
    }

    let runs = config
        .heuristic_runs
        .unwrap_or(if instance_is_bandwidth_dominated(instance) {
            1
        } else {
            8
        });
    if runs > 0 {
        let hc = HeuristicConfig {
            seed: config.seed,
            time_limit: s.time_left(),
            ..Default::default()
        };
        if let Some(mut sched) = best_of_runs(instance, &hc, runs)?.schedule {
            if let Some(c) = pinned {
                let k = sched
                    .slots()
                    .iter()
                    .position(|&o| o == Some(c))
                    .expect("client has slots");
                sched = sched.rotated(k);
            }
            for i in 0..n {
                s.pool.add(Column::new(i, sched.mask(i)));
            }
            s.offer(sched)?;
        }
    }

    let mut stack = vec![root];
    let mut timed_out = false;
    let mut open_bounds: Vec<f64> = Vec::new();
    while let Some(node) = stack.pop() {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            open_bounds.push(node.local_bound);
            timed_out = true;
            break;
        }
        s.stats.nodes_opened += 1;
        if s.prunable(node.local_bound) {
            s.stats.nodes_pruned += 1;
            s.record(
                &node,
                Vec::new(),
                Some(node.local_bound),
                false,
                NodeOutcome::PrunedEarly,
            );
            continue;
        }
        if s.completion_due(&node) {
            s.stats.completions += 1;
            let budget = Some(
                s.time_left()
                    .map_or(COMPLETION_CAP, |t| (t / 4).min(COMPLETION_CAP)),
            );
            let below = s.incumbent.as_ref().map(|sc| sc.allocated_total());
            let (sched, status) = complete_with_ilp(&node, instance, budget, below)?;
            if let Some(sched) = sched {
                s.offer(sched)?;
            }
            if status != Status::TimedOut {
                s.record(&node, Vec::new(), None, true, NodeOutcome::Completed);
                continue;
            }
            log::info!(
                "completion of node {} timed out; branching from here on",
                node.id
            );
            s.completion_enabled = false;
        }
        match s.seed_columns(&node) {
            Ok(true) => {}
            Ok(false) => {
                s.stats.nodes_infeasible += 1;
                s.record(&node, Vec::new(), None, false, NodeOutcome::Infeasible);
                continue;
            }
            Err(CoreError::TimedOut) => {
                open_bounds.push(node.local_bound);
                timed_out = true;
                break;
            }
            Err(e) => return Err(e),
        }
        let limits = CgLimits {
            upper_bound: s.upper_bound(),
            lagrangian_stop: config.lagrangian_stop,
            deadline,
            ..Default::default()
        };
        let cg = match column_generation(instance, &mut s.pool, &node, &mut s.pricer, &limits) {
            Ok(cg) => cg,
            Err(CoreError::NodeInfeasible(_)) => {
                s.stats.nodes_infeasible += 1;
                s.record(&node, Vec::new(), None, false, NodeOutcome::Infeasible);
                continue;
            }
            Err(e) => return Err(e),
        };
        s.stats.cg_rounds += cg.trace.len();
        s.stats.columns_generated += cg.columns_added;
        let estimates: Vec<f64> = cg.trace.iter().map(|r| r.lagrangian_bound).collect();
        let converged = cg.status == CgStatus::Converged;
        if cg.status == CgStatus::TimedOut {
            open_bounds.push(node.local_bound.max(cg.lower_bound));
            s.record(&node, estimates, None, false, NodeOutcome::TimedOut);
            timed_out = true;
            break;
        }
        if cg.status == CgStatus::LagrangianStop {
            s.stats.lagrangian_stops += 1;
        }
        let lb = cg.lower_bound.max(node.local_bound);
        if s.prunable(lb) {
            s.stats.nodes_pruned += 1;
            s.record(&node, estimates, Some(lb), converged, NodeOutcome::Pruned);
            continue;
        }
        if let Some(sched) = cg.master.schedule(&s.pool, n) {
            let slots = sched.allocated_total() as i64;
            s.offer(sched)?;
            let settled = converged || (lb * f as f64 - 1e-6).ceil() as i64 >= slots;
            if settled {
                s.record(&node, estimates, Some(lb), converged, NodeOutcome::Integral);
                continue;
            }
        }
        let children = match branching {
            Branching::Sequential => branch_sequential(&node, instance),
            Branching::MaxProbability => {
                branch_max_probability(&node, instance, &cg.master, &s.pool)
                    .or_else(|_| branch_sequential(&node, instance).map(|(a, b)| (b, a)))
            }
        };
        let (first, second) = match children {
            Ok(c) => c,
            Err(CoreError::NoBranch) => {
                log::warn!("node {} fully decided but fractional; closing it", node.id);
                s.stats.nodes_infeasible += 1;
                s.record(
                    &node,
                    estimates,
                    Some(lb),
                    converged,
                    NodeOutcome::Infeasible,
                );
                continue;
            }
            Err(e) => return Err(e),
        };
        s.record(&node, estimates, Some(lb), converged, NodeOutcome::Branched);
        for mut child in [second, first] {
            child.id = s.next_id;
            s.next_id += 1;
            child.local_bound = lb;
            stack.push(child);
        }
    }
    open_bounds.extend(stack.iter().map(|n| n.local_bound));

    let objective = s.incumbent.as_ref().map(|sc| sc.objective());
    let ub = s.upper_bound().unwrap_or(f64::INFINITY);
    let (status, bound) = if timed_out {
        let b = open_bounds.iter().copied().fold(ub, f64::min);
        (Status::TimedOut, b)
    } else if s.incumbent.is_some() {
        (Status::Optimal, ub)
    } else {
        (Status::Infeasible, f64::INFINITY)
    };
    Ok(BnpResult {
        schedule: s.incumbent,
        status,
        objective,
        bound,
        stats: s.stats,
        log: s.log,
    })
}
