//! Problem types and the latency-rate analysis of TDM schedules.
//!
//! Slots and window starts are 0-based here; a window `(k, j)` covers the
//! `j` consecutive slots `k, k+1, ...` taken cyclically.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::ratio::{ceil_int, Ratio};

pub type ClientId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientRequirement {
    pub name: String,
    /// Required fraction of slots.
    pub rate: Ratio,
    /// Required service latency in slots; `None` means unconstrained.
    pub latency: Option<Ratio>,
}

impl ClientRequirement {
    pub fn new(name: impl Into<String>, rate: Ratio, latency: Option<Ratio>) -> Self {
        ClientRequirement {
            name: name.into(),
            rate,
            latency,
        }
    }

    /// Latency bound actually enforced: an absent requirement reads as `f - 1`.
    pub fn effective_latency(&self, f: usize) -> Ratio {
        self.latency
            .unwrap_or_else(|| Ratio::from_integer(f as i64 - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DominanceClass {
    BandwidthDominated,
    LatencyDominated,
    MixedDominated,
}

impl fmt::Display for DominanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DominanceClass::BandwidthDominated => "BD",
            DominanceClass::LatencyDominated => "LD",
            DominanceClass::MixedDominated => "MD",
        })
    }
}

impl std::str::FromStr for DominanceClass {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BD" => Ok(DominanceClass::BandwidthDominated),
            "LD" => Ok(DominanceClass::LatencyDominated),
            "MD" => Ok(DominanceClass::MixedDominated),
            _ => Err(CoreError::InvalidInstance(format!(
                "unknown class {s:?}, expected BD, LD or MD"
            ))),
        }
    }
}

fn latency_term(req: &ClientRequirement, f: usize) -> i64 {
    ceil_int(&(Ratio::from_integer(f as i64) / (req.effective_latency(f) + 1)))
}

fn rate_term(req: &ClientRequirement, f: usize) -> i64 {
    ceil_int(&(req.rate * f as i64))
}

/// Compares the latency-driven slot bound `ceil(f/(lat+1))` against the
/// rate-driven one `ceil(rate*f)`.
pub fn dominance_class(req: &ClientRequirement, f: usize) -> DominanceClass {
    let l = latency_term(req, f);
    let b = rate_term(req, f);
    match l.cmp(&b) {
        std::cmp::Ordering::Greater => DominanceClass::LatencyDominated,
        std::cmp::Ordering::Equal => DominanceClass::MixedDominated,
        std::cmp::Ordering::Less => DominanceClass::BandwidthDominated,
    }
}

/// Lower bound on the slots any feasible allocation gives the client.
/// Zero for a zero-rate client, which can go without slots.
pub fn min_slots(req: &ClientRequirement, f: usize) -> usize {
    if req.rate.is_zero() {
        return 0;
    }
    rate_term(req, f).max(latency_term(req, f)).max(0) as usize
}

/// Integer demand `max(0, ceil(rate*(j - lat)))` on every window of length
/// `j`, for `j = 0..=f`.
pub fn window_demand(req: &ClientRequirement, f: usize) -> Vec<i64> {
    let lat = req.effective_latency(f);
    (0..=f)
        .map(|j| ceil_int(&(req.rate * (Ratio::from_integer(j as i64) - lat))).max(0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemInstance {
    pub frame_size: usize,
    pub clients: Vec<ClientRequirement>,
}

impl ProblemInstance {
    pub fn new(frame_size: usize, clients: Vec<ClientRequirement>) -> Result<Self> {
        let inst = ProblemInstance {
            frame_size,
            clients,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_size == 0 {
            return Err(CoreError::InvalidInstance(
                "frame size must be positive".into(),
            ));
        }
        if self.clients.is_empty() {
            return Err(CoreError::InvalidInstance("no clients".into()));
        }
        for (i, c) in self.clients.iter().enumerate() {
            if c.rate.is_negative() || c.rate > Ratio::from_integer(1) {
                return Err(CoreError::InvalidInstance(format!(
                    "client {i} ({}) has rate outside [0, 1]",
                    c.name
                )));
            }
            if c.latency.is_some_and(|l| l.is_negative()) {
                return Err(CoreError::InvalidInstance(format!(
                    "client {i} ({}) has a negative latency",
                    c.name
                )));
            }
            if self.clients[..i].iter().any(|o| o.name == c.name) {
                return Err(CoreError::InvalidInstance(format!(
                    "duplicate client name {}",
                    c.name
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.clients.len()
    }

    pub fn client(&self, i: ClientId) -> Result<&ClientRequirement> {
        self.clients.get(i).ok_or(CoreError::UnknownClient(i))
    }

    pub fn latency(&self, i: ClientId) -> Ratio {
        self.clients[i].effective_latency(self.frame_size)
    }

    pub fn min_slots(&self, i: ClientId) -> usize {
        min_slots(&self.clients[i], self.frame_size)
    }

    pub fn dominance(&self, i: ClientId) -> DominanceClass {
        dominance_class(&self.clients[i], self.frame_size)
    }

    /// Sum of per-client slot lower bounds divided by `f`.
    pub fn lower_bound(&self) -> Ratio {
        let total: usize = (0..self.n()).map(|i| self.min_slots(i)).sum();
        Ratio::new(total as i64, self.frame_size as i64)
    }

    pub fn total_rate(&self) -> Ratio {
        self.clients.iter().map(|c| c.rate).sum()
    }

    /// `sum_i ceil(f/(lat_i+1)) / f`, the load implied by latency alone.
    pub fn latency_load(&self) -> Ratio {
        let total: i64 = self
            .clients
            .iter()
            .map(|c| latency_term(c, self.frame_size))
            .sum();
        Ratio::new(total, self.frame_size as i64)
    }

    /// Client ids sorted by required latency, ties by id.
    pub fn latency_order(&self) -> Vec<ClientId> {
        let mut order: Vec<ClientId> = (0..self.n()).collect();
        order.sort_by(|&a, &b| self.latency(a).cmp(&self.latency(b)).then(a.cmp(&b)));
        order
    }

    pub fn client_by_name(&self, name: &str) -> Option<ClientId> {
        self.clients.iter().position(|c| c.name == name)
    }
}

/// Slot assignment of one frame; `None` is an empty slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    slots: Vec<Option<ClientId>>,
    clients: usize,
}

impl Schedule {
    pub fn new(slots: Vec<Option<ClientId>>, clients: usize) -> Result<Self> {
        if slots.is_empty() {
            return Err(CoreError::InvalidSchedule("empty frame".into()));
        }
        if let Some(&Some(c)) = slots.iter().find(|s| s.is_some_and(|c| c >= clients)) {
            return Err(CoreError::UnknownClient(c));
        }
        Ok(Schedule { slots, clients })
    }

    pub fn empty(f: usize, clients: usize) -> Self {
        Schedule {
            slots: vec![None; f],
            clients,
        }
    }

    /// Combines per-client masks; fails on the first slot claimed twice.
    pub fn from_masks(masks: &[Vec<bool>]) -> Result<Self> {
        let f = masks.first().map_or(0, |m| m.len());
        let mut slots = vec![None; f];
        for (i, m) in masks.iter().enumerate() {
            if m.len() != f {
                return Err(CoreError::InvalidSchedule("masks differ in length".into()));
            }
            for (j, _) in m.iter().enumerate().filter(|(_, &b)| b) {
                if let Some(o) = slots[j] {
                    return Err(CoreError::InvalidSchedule(format!(
                        "slot {j} claimed by clients {o} and {i}"
                    )));
                }
                slots[j] = Some(i);
            }
        }
        Schedule::new(slots, masks.len())
    }

    pub fn frame_size(&self) -> usize {
        self.slots.len()
    }

    pub fn num_clients(&self) -> usize {
        self.clients
    }

    pub fn slots(&self) -> &[Option<ClientId>] {
        &self.slots
    }

    fn check(&self, client: ClientId) -> Result<()> {
        if client < self.clients {
            Ok(())
        } else {
            Err(CoreError::UnknownClient(client))
        }
    }

    pub fn alloc_count(&self, client: ClientId) -> usize {
        self.slots.iter().filter(|&&s| s == Some(client)).count()
    }

    pub fn mask(&self, client: ClientId) -> Vec<bool> {
        self.slots.iter().map(|&s| s == Some(client)).collect()
    }

    pub fn allocated_total(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Total allocated rate `sum_i phi_i / f`.
    pub fn objective(&self) -> Ratio {
        Ratio::new(self.allocated_total() as i64, self.frame_size() as i64)
    }

    /// Schedule shifted so that old slot `k` becomes slot 0.
    pub fn rotated(&self, k: usize) -> Schedule {
        let mut slots = self.slots.clone();
        slots.rotate_left(k % self.frame_size());
        Schedule {
            slots,
            clients: self.clients,
        }
    }
}

/// Worst-case provided service of a single client, from cyclic window sums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceCurve {
    prefix: Vec<u32>,
}

impl ServiceCurve {
    pub fn from_mask(mask: &[bool]) -> Self {
        let mut prefix = Vec::with_capacity(2 * mask.len() + 1);
        prefix.push(0);
        let mut acc = 0;
        for &b in mask.iter().chain(mask) {
            acc += b as u32;
            prefix.push(acc);
        }
        ServiceCurve { prefix }
    }

    pub fn frame_size(&self) -> usize {
        (self.prefix.len() - 1) / 2
    }

    pub fn allocated(&self) -> u32 {
        self.prefix[self.frame_size()]
    }

    /// Slots provided in the `j` slots starting at `k` (any `j`, frames repeat).
    pub fn worst_case(&self, k: usize, j: usize) -> u32 {
        let f = self.frame_size();
        let k = k % f;
        let full = (j / f) as u32 * self.allocated();
        let r = j % f;
        full + self.prefix[k + r] - self.prefix[k]
    }

    /// Minimum service over all windows of length `j`.
    pub fn min_window(&self, j: usize) -> u32 {
        (0..self.frame_size())
            .map(|k| self.worst_case(k, j))
            .min()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LrCharacterization {
    pub latency: Ratio,
    pub rate: Ratio,
}

/// Rate and minimal service latency of a single-client mask.
pub fn lr_of_mask(mask: &[bool]) -> Option<LrCharacterization> {
    let curve = ServiceCurve::from_mask(mask);
    let f = curve.frame_size() as i64;
    let phi = curve.allocated() as i64;
    if phi == 0 {
        return None;
    }
    // j - w/rho = (j*phi - w*f) / phi
    let mut worst = 0i64;
    for j in 1..=f as usize {
        let w = curve.min_window(j) as i64;
        worst = worst.max(j as i64 * phi - w * f);
    }
    Some(LrCharacterization {
        latency: Ratio::new(worst, phi),
        rate: Ratio::new(phi, f),
    })
}

pub fn allocated_rate(schedule: &Schedule, client: ClientId) -> Result<Ratio> {
    schedule.check(client)?;
    Ok(Ratio::new(
        schedule.alloc_count(client) as i64,
        schedule.frame_size() as i64,
    ))
}

pub fn service_curve(schedule: &Schedule, client: ClientId) -> Result<ServiceCurve> {
    schedule.check(client)?;
    Ok(ServiceCurve::from_mask(&schedule.mask(client)))
}

pub fn service_latency(schedule: &Schedule, client: ClientId) -> Result<Ratio> {
    schedule.check(client)?;
    lr_of_mask(&schedule.mask(client))
        .map(|lr| lr.latency)
        .ok_or(CoreError::LatencyUndefined(client))
}

pub fn lr_characterization(schedule: &Schedule, client: ClientId) -> Result<LrCharacterization> {
    schedule.check(client)?;
    lr_of_mask(&schedule.mask(client)).ok_or(CoreError::LatencyUndefined(client))
}

/// Longest cyclic run of slots not allocated in `mask`.
pub fn largest_gap(mask: &[bool]) -> usize {
    let f = mask.len();
    let Some(first) = mask.iter().position(|&b| b) else {
        return f;
    };
    let mut best = 0;
    let mut run = 0;
    for t in 1..=f {
        if mask[(first + t) % f] {
            best = best.max(run);
            run = 0;
        } else {
            run += 1;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub arrival: f64,
    pub size: f64,
}

/// Worst-case finishing times of back-to-back requests served by an LR server.
pub fn wc_finishing_times(requests: &[Request], latency: f64, rate: f64) -> Result<Vec<f64>> {
    if rate <= 0.0 || !rate.is_finite() {
        return Err(CoreError::ZeroRate);
    }
    let mut prev = f64::NEG_INFINITY;
    Ok(requests
        .iter()
        .map(|r| {
            prev = (r.arrival + latency).max(prev) + r.size / rate;
            prev
        })
        .collect())
}
