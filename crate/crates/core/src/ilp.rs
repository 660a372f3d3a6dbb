//! The monolithic slot-assignment ILP.

use std::time::Duration;

use tdm_mip::{solve_mip, Constraint, LinearModel, MipParams, MipStats, MipStatus, Sense, VarId};

use crate::error::{CoreError, Result};
use crate::model::{window_demand, ClientId, DominanceClass, ProblemInstance, Schedule};
use crate::ratio::{floor_int, Ratio};
use crate::verify::{schedule_feasible, Fixing};
use crate::Status;

#[derive(Debug, Clone, PartialEq)]
pub struct IlpBuildOptions {
    /// Skip window rows shorter than the required latency.
    pub prune_below_latency: bool,
    /// Latency-dominated clients only get window rows of length `floor(lat)+1`.
    pub latency_dominated_single_point: bool,
    /// Give slot 0 to the client with the smallest positive slot lower bound.
    pub fix_first_slot: bool,
    pub partial_fixings: Vec<Fixing>,
    /// Relative gap at which the search may stop with a `Feasible` result.
    pub gap: f64,
}

impl Default for IlpBuildOptions {
    fn default() -> Self {
        IlpBuildOptions {
            prune_below_latency: true,
            latency_dominated_single_point: true,
            fix_first_slot: true,
            partial_fixings: Vec::new(),
            gap: 0.0,
        }
    }
}

impl IlpBuildOptions {
    /// The eight on/off combinations of the three flags.
    pub fn flag_combinations() -> Vec<IlpBuildOptions> {
        (0..8)
            .map(|b| IlpBuildOptions {
                prune_below_latency: b & 1 != 0,
                latency_dominated_single_point: b & 2 != 0,
                fix_first_slot: b & 4 != 0,
                ..Default::default()
            })
            .collect()
    }
}

pub struct IlpModel {
    pub model: LinearModel,
    /// `x[i][j]`: client `i` owns slot `j`.
    pub x: Vec<Vec<VarId>>,
    pub first_slot_client: Option<ClientId>,
}

/// Client with the smallest positive slot lower bound, ties to the lower id.
pub fn first_slot_client(instance: &ProblemInstance) -> Option<ClientId> {
    (0..instance.n())
        .filter(|&i| instance.min_slots(i) >= 1)
        .min_by_key(|&i| (instance.min_slots(i), i))
}

/// Per-variable forced values; `None` when free.
fn resolve_fixings(
    instance: &ProblemInstance,
    fixings: &[Fixing],
    first: Option<ClientId>,
) -> Result<Vec<Vec<Option<bool>>>> {
    let (n, f) = (instance.n(), instance.frame_size);
    let mut fixed = vec![vec![None; f]; n];
    let set = |i: usize, j: usize, v: bool, fixed: &mut Vec<Vec<Option<bool>>>| -> Result<()> {
        match fixed[i][j] {
            Some(old) if old != v => Err(CoreError::ContradictoryFixings(format!(
                "client {i} slot {j} forced both ways"
            ))),
            _ => {
                fixed[i][j] = Some(v);
                Ok(())
            }
        }
    };
    let all = fixings.iter().copied().chain(first.map(|c| (c, 0, true)));
    for (c, s, v) in all {
        if c >= n {
            return Err(CoreError::UnknownClient(c));
        }
        if s >= f {
            return Err(CoreError::ContradictoryFixings(format!(
                "slot {s} outside the frame"
            )));
        }
        set(c, s, v, &mut fixed)?;
        if v {
            for o in (0..n).filter(|&o| o != c) {
                set(o, s, false, &mut fixed)?;
            }
        }
    }
    Ok(fixed)
}

pub fn build_ilp(instance: &ProblemInstance, opts: &IlpBuildOptions) -> Result<IlpModel> {
    instance.validate()?;
    let (n, f) = (instance.n(), instance.frame_size);
    let first = if opts.fix_first_slot {
        first_slot_client(instance)
    } else {
        None
    };
    let fixed = resolve_fixings(instance, &opts.partial_fixings, first)?;
    let mut m = LinearModel::new();
    let step = 1.0 / f as f64;
    let x: Vec<Vec<VarId>> = (0..n)
        .map(|i| {
            (0..f)
                .map(|j| {
                    let v = m.add_binary(format!("x_{i}_{j}"), step);
                    match fixed[i][j] {
                        Some(true) => m.set_bounds(v, 1.0, 1.0),
                        Some(false) => m.set_bounds(v, 0.0, 0.0),
                        None => {}
                    }
                    v
                })
                .collect()
        })
        .collect();

    for j in 0..f {
        let row = (0..n).map(|i| (x[i][j], 1.0)).collect();
        m.add_constraint(Constraint::new(row, Sense::Le, 1.0).named(format!("cap_{j}")));
    }
    for i in 0..n {
        let req = &instance.clients[i];
        let lb = instance.min_slots(i);
        if lb > 0 {
            let row = x[i].iter().map(|&v| (v, 1.0)).collect();
            m.add_constraint(
                Constraint::new(row, Sense::Ge, lb as f64).named(format!("slots_{i}")),
            );
        }
        if req.rate == Ratio::from_integer(0) {
            continue;
        }
        let lat = instance.latency(i);
        let demand = window_demand(req, f);
        let single = floor_int(&lat) as usize + 1;
        let lengths: Vec<usize> = if opts.latency_dominated_single_point
            && instance.dominance(i) == DominanceClass::LatencyDominated
        {
            (single <= f).then_some(single).into_iter().collect()
        } else if opts.prune_below_latency {
            (1..=f)
                .filter(|&j| Ratio::from_integer(j as i64) >= lat)
                .collect()
        } else {
            (1..=f).collect()
        };
        for j in lengths {
            for k in 0..f {
                let row = (0..j).map(|t| (x[i][(k + t) % f], 1.0)).collect();
                let c = Constraint::new(row, Sense::Ge, demand[j] as f64)
                    .named(format!("win_{i}_{k}_{j}"));
                m.add_constraint(if j == single { c } else { c.lazy() });
            }
        }
    }
    Ok(IlpModel {
        model: m,
        x,
        first_slot_client: first,
    })
}

#[derive(Debug, Clone)]
pub struct IlpResult {
    pub schedule: Option<Schedule>,
    pub status: Status,
    pub objective: Option<Ratio>,
    pub best_bound: f64,
    pub stats: MipStats,
}

fn extract(instance: &ProblemInstance, x: &[Vec<VarId>], values: &[f64]) -> Result<Schedule> {
    let f = instance.frame_size;
    let masks: Vec<Vec<bool>> = x
        .iter()
        .map(|row| row.iter().map(|v| values[v.0] > 0.5).collect())
        .collect();
    debug_assert!(masks.iter().all(|m| m.len() == f));
    Schedule::from_masks(&masks)
}

pub fn solve_direct(
    instance: &ProblemInstance,
    opts: &IlpBuildOptions,
    time_limit: Option<Duration>,
) -> Result<IlpResult> {
    solve_direct_below(instance, opts, time_limit, None)
}

/// Like [`solve_direct`], but only looks for schedules with fewer than
/// `below` allocated slots. `Infeasible` then means no such schedule exists.
pub fn solve_direct_below(
    instance: &ProblemInstance,
    opts: &IlpBuildOptions,
    time_limit: Option<Duration>,
    below: Option<usize>,
) -> Result<IlpResult> {
    let f = instance.frame_size;
    let lower: usize = (0..instance.n()).map(|i| instance.min_slots(i)).sum();
    if lower > f || below.is_some_and(|b| lower >= b) {
        return Ok(IlpResult {
            schedule: None,
            status: Status::Infeasible,
            objective: None,
            best_bound: f64::INFINITY,
            stats: MipStats::default(),
        });
    }
    let ilp = build_ilp(instance, opts)?;
    let params = MipParams {
        time_limit,
        gap: opts.gap,
        objective_step: Some(1.0 / f as f64),
        cutoff: below.map(|b| b as f64 / f as f64),
    };
    let sol = solve_mip(&ilp.model, |_| None, &params)?;
    log::debug!(
        "ilp: {:?} after {} nodes, {} lazy rows",
        sol.status,
        sol.stats.nodes,
        sol.stats.lazy_rows
    );
    let schedule = if sol.has_solution() {
        let s = extract(instance, &ilp.x, &sol.assignment)?;
        let report = schedule_feasible(&s, instance)?;
        if !report.feasible {
            return Err(CoreError::InvalidSchedule(format!(
                "ILP returned a schedule failing verification: {report:?}"
            )));
        }
        Some(s)
    } else {
        None
    };
    let status = match sol.status {
        MipStatus::Optimal => Status::Optimal,
        MipStatus::Feasible => Status::Feasible,
        MipStatus::Infeasible => Status::Infeasible,
        MipStatus::TimedOut => Status::TimedOut,
    };
    Ok(IlpResult {
        objective: schedule.as_ref().map(|s| s.objective()),
        schedule,
        status,
        best_bound: sol.best_bound,
        stats: sol.stats,
    })
}
