use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use anyhow::Result;
use clap::ValueEnum;
use serde::Serialize;
use tdm_core::bnp::{solve_bnp, BnpConfig, Branching};
use tdm_core::heuristics::{best_of_runs, continuous_allocation, HeuristicConfig};
use tdm_core::ilp::{solve_direct, IlpBuildOptions};
use tdm_core::io::ScheduleFile;
use tdm_core::model::allocated_rate;
use tdm_core::ratio::format_ratio;
use tdm_core::{ProblemInstance, Schedule, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ilp,
    Bnp,
    Heuristic,
    Continuous,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ilp => "ilp",
            Method::Bnp => "bnp",
            Method::Heuristic => "heuristic",
            Method::Continuous => "continuous",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub time_limit: Duration,
    pub seed: u64,
    pub gap: Option<f64>,
    pub branching: Option<Branching>,
    pub heuristic_runs: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct SolveResult {
    pub method: Method,
    pub status: Status,
    pub runtime_ms: f64,
    /// Best proven lower bound on the objective, when the method has one.
    pub bound: Option<f64>,
    pub lower_bound: String,
    #[serde(flatten)]
    pub schedule: Option<ScheduleFile>,
    /// Allocated rate per client.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub rho: BTreeMap<String, String>,
    pub stats: serde_json::Value,
    #[serde(skip)]
    pub solution: Option<Schedule>,
}

pub fn solve(inst: &ProblemInstance, method: Method, opts: &SolveOptions) -> Result<SolveResult> {
    let start = Instant::now();
    let (solution, status, bound, stats) = match method {
        Method::Ilp => {
            let o = IlpBuildOptions {
                gap: opts.gap.unwrap_or(0.0),
                ..Default::default()
            };
            let r = solve_direct(inst, &o, Some(opts.time_limit))?;
            let stats = serde_json::json!({
                "nodes": r.stats.nodes,
                "lazy_rows": r.stats.lazy_rows,
                "callback_rows": r.stats.callback_rows,
                "simplex_iterations": r.stats.simplex_iterations,
            });
            (
                r.schedule,
                r.status,
                r.best_bound.is_finite().then_some(r.best_bound),
                stats,
            )
        }
        Method::Bnp => {
            let cfg = BnpConfig {
                branching: opts.branching,
                time_limit: Some(opts.time_limit),
                heuristic_runs: opts.heuristic_runs,
                seed: opts.seed,
                ..Default::default()
            };
            let r = solve_bnp(inst, &cfg)?;
            let stats = serde_json::to_value(&r.stats)?;
            (
                r.schedule,
                r.status,
                r.bound.is_finite().then_some(r.bound),
                stats,
            )
        }
        Method::Heuristic => {
            let defaults = HeuristicConfig::default();
            let cfg = HeuristicConfig {
                seed: opts.seed,
                time_limit: Some(opts.time_limit),
                sub_model_gap: opts.gap.unwrap_or(defaults.sub_model_gap),
                ..defaults
            };
            let r = best_of_runs(inst, &cfg, opts.heuristic_runs.unwrap_or(1).max(1))?;
            let stats = serde_json::json!({ "iterations": r.iterations });
            (r.schedule, r.status, None, stats)
        }
        Method::Continuous => {
            let r = continuous_allocation(inst)?;
            (r.schedule, r.status, None, serde_json::json!({}))
        }
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut rho = BTreeMap::new();
    if let Some(s) = &solution {
        for (i, c) in inst.clients.iter().enumerate() {
            rho.insert(c.name.clone(), format_ratio(&allocated_rate(s, i)?));
        }
    }
    Ok(SolveResult {
        method,
        status,
        runtime_ms,
        bound,
        lower_bound: format_ratio(&inst.lower_bound()),
        schedule: solution
            .as_ref()
            .map(|s| ScheduleFile::from_schedule(s, inst)),
        rho,
        stats,
        solution,
    })
}
