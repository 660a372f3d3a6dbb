//! Synthetic instances in three dominance classes.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bnp::{solve_bnp, BnpConfig};
use crate::error::{CoreError, Result};
use crate::ilp::{solve_direct, IlpBuildOptions};
use crate::model::{dominance_class, ClientRequirement, DominanceClass, ProblemInstance};
use crate::ratio::Ratio;
use crate::Status;

/// Rates are drawn on this decimal grid.
const RATE_DEN: i64 = 1_000_000;
/// Latencies are rounded to hundredths of a slot.
const LATENCY_DEN: i64 = 100;
/// Latency redraws per rate vector before starting over.
const LATENCY_TRIES: usize = 50;

/// Rows of the parameter table: (clients, rate interval, tightness interval)
/// for BD, LD and MD.
#[allow(clippy::approx_constant)]
const TABLE: [(usize, [(f64, f64); 3], [(f64, f64); 3]); 5] = [
    (
        8,
        [(0.06, 0.16), (0.02, 0.07), (0.06, 0.14)],
        [(0.6, 0.9), (1.6, 3.3), (0.95, 1.4)],
    ),
    (
        16,
        [(0.03, 0.08), (0.01, 0.035), (0.03, 0.07)],
        [(0.5, 0.75), (1.58, 3.26), (0.9, 1.3)],
    ),
    (
        32,
        [(0.015, 0.04), (0.005, 0.0175), (0.015, 0.035)],
        [(0.4, 0.6), (1.56, 3.22), (0.85, 1.2)],
    ),
    (
        64,
        [(0.0075, 0.02), (0.0025, 0.00875), (0.0075, 0.0175)],
        [(0.3, 0.45), (1.54, 3.18), (0.8, 1.1)],
    ),
    (
        128,
        [(0.00375, 0.01), (0.00125, 0.004375), (0.00375, 0.00875)],
        [(0.2, 0.3), (1.52, 3.14), (0.75, 1.0)],
    ),
];

fn class_index(class: DominanceClass) -> usize {
    match class {
        DominanceClass::BandwidthDominated => 0,
        DominanceClass::LatencyDominated => 1,
        DominanceClass::MixedDominated => 2,
    }
}

fn ratio_pair(lo: (i64, i64), hi: (i64, i64)) -> (Ratio, Ratio) {
    (Ratio::new(lo.0, lo.1), Ratio::new(hi.0, hi.1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub class: DominanceClass,
    pub n_clients: usize,
    pub rate_range: (f64, f64),
    /// Interval of the tightness factor `z`; latency is `1/(z*rate)`.
    pub tightness_range: (f64, f64),
    pub total_rate_window: (Ratio, Ratio),
    pub latency_load_window: Option<(Ratio, Ratio)>,
    pub frame_size: usize,
    pub seed: u64,
    pub max_attempts: usize,
}

impl GenSpec {
    /// Parameters for `n` clients. Client counts between table rows use the
    /// nearest row in log scale, with the rate interval scaled by `8/n`.
    pub fn new(class: DominanceClass, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidInstance(
                "at least one client is needed".into(),
            ));
        }
        let c = class_index(class);
        let row = TABLE
            .iter()
            .min_by(|a, b| {
                let d = |m: usize| ((m as f64).log2() - (n as f64).log2()).abs();
                d(a.0).total_cmp(&d(b.0))
            })
            .expect("table is not empty");
        let rate_range = if row.0 == n {
            row.1[c]
        } else {
            let (lo, hi) = TABLE[0].1[c];
            let s = 8.0 / n as f64;
            (lo * s, hi * s)
        };
        let (total_rate_window, latency_load_window) = match class {
            DominanceClass::BandwidthDominated => (ratio_pair((4, 5), (19, 20)), None),
            DominanceClass::LatencyDominated => (
                ratio_pair((7, 20), (1, 2)),
                Some(ratio_pair((3, 4), (19, 20))),
            ),
            DominanceClass::MixedDominated => (
                ratio_pair((7, 10), (9, 10)),
                Some(ratio_pair((7, 10), (9, 10))),
            ),
        };
        Ok(GenSpec {
            class,
            n_clients: n,
            rate_range,
            tightness_range: row.2[c],
            total_rate_window,
            latency_load_window,
            frame_size: 8 * n,
            seed,
            max_attempts: 10_000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && 0.0 < a && a <= b;
        if !ordered(self.rate_range) || self.rate_range.1 > 1.0 {
            return Err(CoreError::InvalidInstance(format!(
                "bad rate range {:?}",
                self.rate_range
            )));
        }
        if !ordered(self.tightness_range) {
            return Err(CoreError::InvalidInstance(format!(
                "bad tightness range {:?}",
                self.tightness_range
            )));
        }
        let (lo, hi) = self.total_rate_window;
        if lo > hi || self.latency_load_window.is_some_and(|(a, b)| a > b) {
            return Err(CoreError::InvalidInstance(
                "window bounds are reversed".into(),
            ));
        }
        if self.n_clients == 0 || self.frame_size == 0 {
            return Err(CoreError::InvalidInstance("empty instance".into()));
        }
        Ok(())
    }
}

fn within(x: Ratio, (lo, hi): (Ratio, Ratio)) -> bool {
    lo <= x && x <= hi
}

fn draw_rate(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> Ratio {
    let a = (lo * RATE_DEN as f64 - 1e-6).ceil() as i64;
    let b = (hi * RATE_DEN as f64 + 1e-6).floor() as i64;
    Ratio::new(rng.gen_range(a..=b.max(a)), RATE_DEN)
}

/// Latency `1/(z*rate)` on the hundredths grid. Mixed clients are clamped into
/// the band where both slot bounds agree; `None` when the band holds no grid
/// point.
fn draw_latency(rng: &mut ChaCha8Rng, spec: &GenSpec, rate: Ratio) -> Option<Ratio> {
    let (zl, zh) = spec.tightness_range;
    let z = rng.gen_range(zl..=zh);
    let raw = 1.0 / (z * crate::ratio::to_f64(&rate));
    let mut lat = Ratio::new((raw * LATENCY_DEN as f64).round() as i64, LATENCY_DEN);
    if spec.class == DominanceClass::MixedDominated {
        let f = spec.frame_size as i64;
        let b = crate::ratio::ceil_int(&(rate * f));
        if b <= 0 {
            return None;
        }
        // ceil(f/(lat+1)) == b  <=>  f/b - 1 <= lat < f/(b-1) - 1
        let lo = Ratio::new(f, b) - 1;
        let lo = Ratio::new(crate::ratio::ceil_int(&(lo * LATENCY_DEN)), LATENCY_DEN);
        if lat < lo {
            lat = lo;
        }
        if b > 1 {
            let hi = Ratio::new(f, b - 1) - 1;
            let top = Ratio::new(crate::ratio::ceil_int(&(hi * LATENCY_DEN)) - 1, LATENCY_DEN);
            if top < lo {
                return None;
            }
            if lat > top {
                lat = top;
            }
        }
    }
    (lat > Ratio::from_integer(0)).then_some(lat)
}

/// Draws an instance of the requested class. Deterministic in the seed.
pub fn generate(spec: &GenSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_clients;
    let f = spec.frame_size;
    let mut attempts = 0;
    while attempts < spec.max_attempts {
        attempts += 1;
        let rates: Vec<Ratio> = (0..n)
            .map(|_| draw_rate(&mut rng, spec.rate_range))
            .collect();
        if !within(rates.iter().sum(), spec.total_rate_window) {
            continue;
        }
        for _ in 0..LATENCY_TRIES {
            let mut clients = Vec::with_capacity(n);
            for (i, &rate) in rates.iter().enumerate() {
                // resample until the client has the requested class
                let mut found = None;
                for _ in 0..LATENCY_TRIES {
                    let Some(lat) = draw_latency(&mut rng, spec, rate) else {
                        continue;
                    };
                    let c = ClientRequirement::new(format!("c{}", i + 1), rate, Some(lat));
                    if dominance_class(&c, f) == spec.class {
                        found = Some(c);
                        break;
                    }
                }
                match found {
                    Some(c) => clients.push(c),
                    None => break,
                }
            }
            if clients.len() < n {
                break;
            }
            let inst = ProblemInstance::new(f, clients)?;
            if spec
                .latency_load_window
                .is_none_or(|w| within(inst.latency_load(), w))
            {
                return Ok(inst);
            }
            if spec.class == DominanceClass::MixedDominated {
                // load depends on the rates alone here
                break;
            }
        }
    }
    Err(CoreError::GenerationExhausted(attempts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMethod {
    Bnp,
    Ilp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discard {
    Infeasible,
    /// No verdict within the time limit.
    TimedOut,
}

#[derive(Debug, Clone, Default)]
pub struct FilterReport {
    pub kept: Vec<ProblemInstance>,
    /// Index into the input and the reason.
    pub discarded: Vec<(usize, Discard)>,
}

/// Keeps the instances an exact method proves feasible within `time_limit`.
pub fn filter_feasible(
    instances: Vec<ProblemInstance>,
    method: FilterMethod,
    time_limit: Option<Duration>,
) -> Result<FilterReport> {
    let mut report = FilterReport::default();
    for (k, inst) in instances.into_iter().enumerate() {
        let status = match method {
            FilterMethod::Ilp => {
                let r = solve_direct(&inst, &IlpBuildOptions::default(), time_limit)?;
                if r.schedule.is_some() {
                    Status::Feasible
                } else {
                    r.status
                }
            }
            FilterMethod::Bnp => {
                let cfg = BnpConfig {
                    time_limit,
                    ..Default::default()
                };
                let r = solve_bnp(&inst, &cfg)?;
                if r.schedule.is_some() {
                    Status::Feasible
                } else {
                    r.status
                }
            }
        };
        match status {
            Status::Optimal | Status::Feasible => report.kept.push(inst),
            Status::Infeasible | Status::NoFeasible => {
                report.discarded.push((k, Discard::Infeasible))
            }
            Status::TimedOut => {
                log::warn!("instance {k}: no verdict within the time limit");
                report.discarded.push((k, Discard::TimedOut));
            }
        }
    }
    Ok(report)
}
