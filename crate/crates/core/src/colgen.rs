//! Column generation: restricted master LP, dual prices and pricing.

use std::collections::HashSet;
use std::fmt;
use std::time::{Duration, Instant};

use tdm_mip::{
    solve_lp, solve_mip, Constraint, LinearModel, LpSolution, LpStatus, MipParams, MipStatus,
    RowId, Sense, VarId,
};

use crate::bnp::BnpNode;
use crate::error::{CoreError, Result};
use crate::model::{window_demand, ClientId, DominanceClass, ProblemInstance, Schedule};
use crate::ratio::{floor_int, snap, Ratio};

/// Penalty per unit of slot over-allocation in the master.
pub const OVERALLOC_PENALTY: f64 = 10.0;
/// Columns must price below `-REDUCED_COST_TOL` to enter the pool.
pub const REDUCED_COST_TOL: f64 = 1e-6;
const INTEGRAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Column {
    pub client: ClientId,
    pub mask: Vec<bool>,
    pub slot_count: usize,
}

impl Column {
    pub fn new(client: ClientId, mask: Vec<bool>) -> Self {
        let slot_count = mask.iter().filter(|&&b| b).count();
        Column {
            client,
            mask,
            slot_count,
        }
    }
}

/// Columns of every client; masked per node, never deleted.
#[derive(Debug, Clone, Default)]
pub struct ColumnPool {
    columns: Vec<Column>,
    seen: HashSet<(ClientId, Vec<bool>)>,
    by_client: Vec<Vec<usize>>,
}

impl ColumnPool {
    pub fn new(n: usize) -> Self {
        ColumnPool {
            by_client: vec![Vec::new(); n],
            ..Default::default()
        }
    }

    /// Adds a column unless an identical one exists; returns its index if new.
    pub fn add(&mut self, col: Column) -> Option<usize> {
        if !self.seen.insert((col.client, col.mask.clone())) {
            return None;
        }
        if self.by_client.len() <= col.client {
            self.by_client.resize(col.client + 1, Vec::new());
        }
        self.by_client[col.client].push(self.columns.len());
        self.columns.push(col);
        Some(self.columns.len() - 1)
    }

    pub fn get(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn of_client(&self, client: ClientId) -> &[usize] {
        self.by_client.get(client).map_or(&[], |v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Slot prices `lambda` (>= 0) and client prices `sigma` of the master.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPrices {
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DualPrices {
    pub fn zero(n: usize, f: usize) -> Self {
        DualPrices {
            lambda: vec![0.0; f],
            sigma: vec![0.0; n],
        }
    }

    /// `sum_j mask_j * lambda_j + phi/f - sigma_client`.
    pub fn reduced_cost(&self, col: &Column) -> f64 {
        let f = col.mask.len() as f64;
        col.mask
            .iter()
            .zip(&self.lambda)
            .filter(|(&b, _)| b)
            .map(|(_, l)| l)
            .sum::<f64>()
            + col.slot_count as f64 / f
            - self.sigma[col.client]
    }
}

pub struct MasterModel {
    pub model: LinearModel,
    /// `(pool index, weight variable)` for every admissible column.
    pub omega: Vec<(usize, VarId)>,
    pub overalloc: Vec<VarId>,
    pub capacity_rows: Vec<RowId>,
    pub convexity_rows: Vec<RowId>,
}

#[derive(Debug, Clone)]
pub struct MasterSolution {
    /// `(pool index, weight)` of admissible columns.
    pub weights: Vec<(usize, f64)>,
    pub overalloc: Vec<f64>,
    pub objective: f64,
    pub duals: DualPrices,
}

impl MasterSolution {
    pub fn is_integral(&self) -> bool {
        self.weights
            .iter()
            .all(|&(_, w)| !(INTEGRAL_TOL..=1.0 - INTEGRAL_TOL).contains(&w))
            && self.overalloc.iter().all(|&y| y < INTEGRAL_TOL)
    }

    /// Schedule built from the columns at weight 1, when they form one.
    pub fn schedule(&self, pool: &ColumnPool, n: usize) -> Option<Schedule> {
        if !self.is_integral() {
            return None;
        }
        let mut masks: Vec<Option<Vec<bool>>> = vec![None; n];
        for &(idx, w) in &self.weights {
            if w > 0.5 {
                let col = pool.get(idx);
                if masks[col.client].is_some() {
                    return None;
                }
                masks[col.client] = Some(col.mask.clone());
            }
        }
        let masks: Option<Vec<Vec<bool>>> = masks.into_iter().collect();
        Schedule::from_masks(&masks?).ok()
    }

    /// `sum over columns of client i covering slot j` of the weights.
    pub fn slot_weights(&self, pool: &ColumnPool, client: ClientId, f: usize) -> Vec<f64> {
        let mut total = vec![0.0; f];
        for &(idx, w) in &self.weights {
            let col = pool.get(idx);
            if col.client == client {
                for (t, _) in col.mask.iter().enumerate().filter(|(_, &b)| b) {
                    total[t] += w;
                }
            }
        }
        total
    }
}

pub fn build_master(
    instance: &ProblemInstance,
    pool: &ColumnPool,
    node: &BnpNode,
) -> Result<MasterModel> {
    let (n, f) = (instance.n(), instance.frame_size);
    let mut m = LinearModel::new();
    let mut omega = Vec::new();
    let mut cols_of: Vec<Vec<VarId>> = vec![Vec::new(); n];
    for i in 0..n {
        for &idx in pool.of_client(i) {
            let col = pool.get(idx);
            if !node.admits(col) {
                continue;
            }
            let v = m.add_continuous(
                format!("w_{idx}"),
                0.0,
                f64::INFINITY,
                col.slot_count as f64 / f as f64,
            );
            omega.push((idx, v));
            cols_of[i].push(v);
        }
        if cols_of[i].is_empty() {
            return Err(CoreError::NodeInfeasible(i));
        }
    }
    let overalloc: Vec<VarId> = (0..f)
        .map(|j| m.add_continuous(format!("y_{j}"), 0.0, f64::INFINITY, OVERALLOC_PENALTY))
        .collect();
    let capacity_rows = (0..f)
        .map(|j| {
            let mut row: Vec<(VarId, f64)> = omega
                .iter()
                .filter(|(idx, _)| pool.get(*idx).mask[j])
                .map(|&(_, v)| (v, 1.0))
                .collect();
            row.push((overalloc[j], -1.0));
            m.add_constraint(Constraint::new(row, Sense::Le, 1.0).named(format!("cap_{j}")))
        })
        .collect();
    let convexity_rows = cols_of
        .iter()
        .enumerate()
        .map(|(i, vs)| {
            let row = vs.iter().map(|&v| (v, 1.0)).collect();
            m.add_constraint(Constraint::new(row, Sense::Ge, 1.0).named(format!("conv_{i}")))
        })
        .collect();
    Ok(MasterModel {
        model: m,
        omega,
        overalloc,
        capacity_rows,
        convexity_rows,
    })
}

/// Slot prices are the negated capacity-row duals, client prices the
/// convexity-row duals.
pub fn extract_duals(lp: &LpSolution, master: &MasterModel) -> Result<DualPrices> {
    if lp.status != LpStatus::Optimal {
        return Err(CoreError::NotOptimal(format!("{:?}", lp.status)));
    }
    Ok(DualPrices {
        lambda: master
            .capacity_rows
            .iter()
            .map(|r| (-lp.duals[r.0]).max(0.0))
            .collect(),
        sigma: master
            .convexity_rows
            .iter()
            .map(|r| lp.duals[r.0])
            .collect(),
    })
}

pub fn solve_master(
    instance: &ProblemInstance,
    pool: &ColumnPool,
    node: &BnpNode,
) -> Result<MasterSolution> {
    let master = build_master(instance, pool, node)?;
    let lp = solve_lp(&master.model)?;
    let duals = extract_duals(&lp, &master)?;
    Ok(MasterSolution {
        weights: master
            .omega
            .iter()
            .map(|&(idx, v)| (idx, lp.primal[v.0]))
            .collect(),
        overalloc: master.overalloc.iter().map(|v| lp.primal[v.0]).collect(),
        objective: lp.objective,
        duals,
    })
}

/// Single-client allocation model: slot costs are set per solve, window
/// requirements beyond the single-point rows are lazy.
#[derive(Debug, Clone)]
pub struct SubModel {
    client: ClientId,
    model: LinearModel,
    x: Vec<VarId>,
    demand: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct SubSolution {
    pub mask: Vec<bool>,
    pub objective: f64,
    pub optimal: bool,
}

impl SubModel {
    pub fn new(instance: &ProblemInstance, client: ClientId) -> Self {
        let f = instance.frame_size;
        let req = &instance.clients[client];
        let demand = window_demand(req, f);
        let mut m = LinearModel::new();
        let x: Vec<VarId> = (0..f)
            .map(|j| m.add_binary(format!("x_{j}"), 0.0))
            .collect();
        let lb = instance.min_slots(client);
        if lb > 0 {
            let row = x.iter().map(|&v| (v, 1.0)).collect();
            m.add_constraint(Constraint::new(row, Sense::Ge, lb as f64).named("slots"));
        }
        let single = floor_int(&instance.latency(client)) as usize + 1;
        let ld = instance.dominance(client) == DominanceClass::LatencyDominated;
        for j in 1..=f {
            let d = demand[j];
            // longer windows with unchanged demand are implied by shorter ones
            if d <= 0 || (j < single) || (j > single && (ld || d == demand[j - 1])) {
                continue;
            }
            for k in 0..f {
                let row = (0..j).map(|t| (x[(k + t) % f], 1.0)).collect();
                let c = Constraint::new(row, Sense::Ge, d as f64).named(format!("win_{k}_{j}"));
                m.add_constraint(if j == single { c } else { c.lazy() });
            }
        }
        SubModel {
            client,
            model: m,
            x,
            demand,
        }
    }

    pub fn client(&self) -> ClientId {
        self.client
    }

    /// Most violated window row for an integral candidate, if any.
    fn separate(&self, values: &[f64]) -> Option<Constraint> {
        let f = self.x.len();
        let mask: Vec<bool> = self.x.iter().map(|v| values[v.0] > 0.5).collect();
        let curve = crate::model::ServiceCurve::from_mask(&mask);
        for j in 1..=f {
            if self.demand[j] <= 0 {
                continue;
            }
            for k in 0..f {
                if (curve.worst_case(k, j) as i64) < self.demand[j] {
                    let row = (0..j).map(|t| (self.x[(k + t) % f], 1.0)).collect();
                    return Some(Constraint::new(row, Sense::Ge, self.demand[j] as f64));
                }
            }
        }
        None
    }

    /// Minimizes `sum cost_j x_j + offset` over feasible masks honouring
    /// `fixings` (`(slot, value)`); `None` when no mask qualifies.
    pub fn solve(
        &mut self,
        costs: &[f64],
        offset: f64,
        fixings: &[(usize, bool)],
        gap: f64,
        deadline: Option<Instant>,
    ) -> Result<Option<SubSolution>> {
        for (j, &v) in self.x.iter().enumerate() {
            self.model.set_obj(v, costs[j]);
            self.model.set_bounds(v, 0.0, 1.0);
        }
        for &(j, val) in fixings {
            let b = if val { 1.0 } else { 0.0 };
            self.model.set_bounds(self.x[j], b, b);
        }
        self.model.set_obj_offset(offset);
        let time_limit = match deadline {
            Some(d) => {
                let left = d.saturating_duration_since(Instant::now());
                if left.is_zero() {
                    return Err(CoreError::TimedOut);
                }
                Some(left)
            }
            None => None,
        };
        let params = MipParams {
            time_limit,
            gap,
            ..Default::default()
        };
        let this = &*self;
        let sol = solve_mip(&this.model, |v| this.separate(v), &params)?;
        match sol.status {
            MipStatus::Infeasible => Ok(None),
            MipStatus::TimedOut if !sol.has_solution() => Err(CoreError::TimedOut),
            status => {
                let mask: Vec<bool> = this.x.iter().map(|v| sol.assignment[v.0] > 0.5).collect();
                Ok(Some(SubSolution {
                    mask,
                    objective: sol.objective,
                    optimal: status == MipStatus::Optimal,
                }))
            }
        }
    }
}

/// Per-client sub-models reused across pricing rounds.
#[derive(Debug, Clone)]
pub struct Pricer {
    subs: Vec<SubModel>,
}

#[derive(Debug, Clone)]
pub struct PricingResult {
    pub column: Column,
    pub reduced_cost: f64,
}

impl Pricer {
    pub fn new(instance: &ProblemInstance) -> Self {
        Pricer {
            subs: (0..instance.n())
                .map(|i| SubModel::new(instance, i))
                .collect(),
        }
    }

    /// Cheapest client-feasible column under `duals` and the node's decisions.
    pub fn price_client(
        &mut self,
        client: ClientId,
        duals: &DualPrices,
        node: &BnpNode,
        gap: f64,
        deadline: Option<Instant>,
    ) -> Result<PricingResult> {
        let f = duals.lambda.len();
        let costs: Vec<f64> = duals.lambda.iter().map(|l| l + 1.0 / f as f64).collect();
        let fixings = node.fixings_for(client);
        let sol = self.subs[client]
            .solve(&costs, -duals.sigma[client], &fixings, gap, deadline)?
            .ok_or(CoreError::ClientInfeasible(client))?;
        let column = Column::new(client, sol.mask);
        Ok(PricingResult {
            reduced_cost: duals.reduced_cost(&column),
            column,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CgLimits {
    /// Objective of the best known schedule.
    pub upper_bound: Option<f64>,
    /// Allow stopping on the Lagrangian bound before pricing converges.
    pub lagrangian_stop: bool,
    pub deadline: Option<Instant>,
    pub max_rounds: usize,
}

impl Default for CgLimits {
    fn default() -> Self {
        CgLimits {
            upper_bound: None,
            lagrangian_stop: true,
            deadline: None,
            max_rounds: 100_000,
        }
    }
}

impl CgLimits {
    pub fn with_time_limit(limit: Duration) -> Self {
        CgLimits {
            deadline: Some(Instant::now() + limit),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    /// No client prices negatively.
    Converged,
    /// The Lagrangian bound already decides the node.
    LagrangianStop,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgRound {
    pub round: usize,
    pub master_objective: f64,
    pub reduced_costs: Vec<f64>,
    /// `master_objective + sum(reduced_costs)`.
    pub lagrangian_bound: f64,
    pub columns_added: usize,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub master: MasterSolution,
    pub lower_bound: f64,
    pub status: CgStatus,
    pub trace: Vec<CgRound>,
    pub columns_added: usize,
}

fn slots_ceil(x: f64, f: usize) -> i64 {
    (x * f as f64 - 1e-6).ceil() as i64
}

impl fmt::Display for CgRound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:.6}", self.round, self.master_objective)?;
        for r in &self.reduced_costs {
            write!(f, " {r:.6}")?;
        }
        Ok(())
    }
}

impl CgOutcome {
    /// Distinct master objectives in visiting order, snapped to multiples of
    /// `1/den`. Degenerate rounds that only change the duals repeat a value
    /// and are collapsed.
    pub fn objective_path(&self, den: i64) -> Vec<Ratio> {
        let mut out: Vec<Ratio> = Vec::new();
        for r in &self.trace {
            let v = snap(r.master_objective, den);
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        out
    }
}

/// Alternates master solves and pricing of every client until no column
/// prices below `-REDUCED_COST_TOL`, the Lagrangian bound settles the node,
/// or time runs out.
pub fn column_generation(
    instance: &ProblemInstance,
    pool: &mut ColumnPool,
    node: &BnpNode,
    pricer: &mut Pricer,
    limits: &CgLimits,
) -> Result<CgOutcome> {
    let (n, f) = (instance.n(), instance.frame_size);
    let mut trace = Vec::new();
    let mut added_total = 0;
    let mut best_lagrangian = f64::NEG_INFINITY;
    for round in 1..=limits.max_rounds.max(1) {
        let master = solve_master(instance, pool, node)?;
        let mut prices = Vec::with_capacity(n);
        let mut timed_out = false;
        for i in 0..n {
            match pricer.price_client(i, &master.duals, node, 0.0, limits.deadline) {
                Ok(p) => prices.push(p),
                Err(CoreError::TimedOut) => {
                    timed_out = true;
                    break;
                }
                Err(CoreError::ClientInfeasible(c)) => return Err(CoreError::NodeInfeasible(c)),
                Err(e) => return Err(e),
            }
        }
        if timed_out {
            return Ok(CgOutcome {
                lower_bound: best_lagrangian,
                master,
                status: CgStatus::TimedOut,
                trace,
                columns_added: added_total,
            });
        }
        let reduced: Vec<f64> = prices.iter().map(|p| p.reduced_cost).collect();
        let lagrangian = master.objective + reduced.iter().sum::<f64>();
        best_lagrangian = best_lagrangian.max(lagrangian);
        let mut added = 0;
        for p in prices {
            if p.reduced_cost < -REDUCED_COST_TOL && pool.add(p.column).is_some() {
                added += 1;
            }
        }
        added_total += added;
        log::debug!(
            "cg round {round}: master {:.6} lagrangian {:.6} reduced {:?}",
            master.objective,
            lagrangian,
            reduced
        );
        trace.push(CgRound {
            round,
            master_objective: master.objective,
            reduced_costs: reduced.clone(),
            lagrangian_bound: lagrangian,
            columns_added: added,
        });
        let converged = reduced.iter().all(|&r| r >= -REDUCED_COST_TOL);
        if converged || added == 0 {
            if !converged {
                log::warn!("negative reduced cost but no new column; treating as converged");
            }
            return Ok(CgOutcome {
                lower_bound: master.objective,
                master,
                status: CgStatus::Converged,
                trace,
                columns_added: added_total,
            });
        }
        if limits.lagrangian_stop {
            let beats_ub = limits
                .upper_bound
                .is_some_and(|ub| best_lagrangian > ub - 1.0 / f as f64 + 1e-9);
            if beats_ub || slots_ceil(best_lagrangian, f) >= slots_ceil(master.objective, f) {
                return Ok(CgOutcome {
                    lower_bound: best_lagrangian,
                    master,
                    status: CgStatus::LagrangianStop,
                    trace,
                    columns_added: added_total,
                });
            }
        }
        if limits.deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(CgOutcome {
                lower_bound: best_lagrangian,
                master,
                status: CgStatus::TimedOut,
                trace,
                columns_added: added_total,
            });
        }
    }
    Err(CoreError::NotOptimal(
        "column generation round limit".into(),
    ))
}
