//! Independent feasibility checks with exact arithmetic, plus an exhaustive
//! optimum for tiny instances.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::model::{
    lr_of_mask, ClientId, ClientRequirement, ProblemInstance, Schedule, ServiceCurve,
};
use crate::ratio::{format_ratio, Ratio};

/// Default cap on `(n+1)^f` for [`brute_force_optimum`].
pub const DEFAULT_BUDGET: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Too few slots for the required rate.
    Rate {
        client: String,
        allocated: usize,
        required_slots: String,
    },
    /// The window of `length` slots starting at `start` (1-based) provides
    /// less than `rate * (length - latency)`.
    Latency {
        client: String,
        start: usize,
        length: usize,
        provided: u32,
        required: String,
    },
    /// A slot claimed by more than one client (1-based).
    Collision { slot: usize, clients: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClientReport {
    pub name: String,
    pub feasible: bool,
    pub allocated: usize,
    pub rate: String,
    /// Service latency at the allocated rate; absent without slots.
    pub latency: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleReport {
    pub feasible: bool,
    pub objective: String,
    pub collisions: Vec<Violation>,
    pub clients: Vec<ClientReport>,
}

impl ScheduleReport {
    pub fn objective_ratio(&self) -> Ratio {
        crate::ratio::parse_ratio(&self.objective).expect("report objective is canonical")
    }
}

/// First violated requirement of a single-client allocation, if any.
///
/// Rate: `popcount(mask) >= rate*f`. Latency: every window `(k, j)` with
/// `j <= f` provides at least `rate*(j - latency)` slots.
pub fn client_violation(mask: &[bool], req: &ClientRequirement) -> Option<Violation> {
    let f = mask.len();
    let curve = ServiceCurve::from_mask(mask);
    let phi = curve.allocated() as usize;
    let need = req.rate * Ratio::from_integer(f as i64);
    if Ratio::from_integer(phi as i64) < need {
        return Some(Violation::Rate {
            client: req.name.clone(),
            allocated: phi,
            required_slots: format_ratio(&need),
        });
    }
    let lat = req.effective_latency(f);
    for j in 1..=f {
        let required = req.rate * (Ratio::from_integer(j as i64) - lat);
        let (k, w) = (0..f)
            .map(|k| (k, curve.worst_case(k, j)))
            .min_by_key(|&(k, w)| (w, k))
            .expect("non-empty frame");
        if Ratio::from_integer(w as i64) < required {
            return Some(Violation::Latency {
                client: req.name.clone(),
                start: k + 1,
                length: j,
                provided: w,
                required: format_ratio(&required),
            });
        }
    }
    None
}

pub fn client_feasible(mask: &[bool], req: &ClientRequirement) -> ClientReport {
    let lr = lr_of_mask(mask);
    let violation = client_violation(mask, req);
    ClientReport {
        name: req.name.clone(),
        feasible: violation.is_none(),
        allocated: mask.iter().filter(|&&b| b).count(),
        rate: format_ratio(&Ratio::new(
            mask.iter().filter(|&&b| b).count() as i64,
            mask.len() as i64,
        )),
        latency: lr.map(|l| format_ratio(&l.latency)),
        violation,
    }
}

/// Checks slot owners given as lists so that double claims can be reported.
pub fn slots_feasible(
    owners: &[Vec<ClientId>],
    instance: &ProblemInstance,
) -> Result<ScheduleReport> {
    let f = instance.frame_size;
    if owners.len() != f {
        return Err(CoreError::InvalidSchedule(format!(
            "schedule has {} slots, instance frame size is {f}",
            owners.len()
        )));
    }
    let mut collisions = Vec::new();
    for (j, o) in owners.iter().enumerate() {
        if let Some(&c) = o.iter().find(|&&c| c >= instance.n()) {
            return Err(CoreError::UnknownClient(c));
        }
        if o.len() > 1 {
            collisions.push(Violation::Collision {
                slot: j + 1,
                clients: o
                    .iter()
                    .map(|&c| instance.clients[c].name.clone())
                    .collect(),
            });
        }
    }
    let clients: Vec<ClientReport> = instance
        .clients
        .iter()
        .enumerate()
        .map(|(i, req)| {
            let mask: Vec<bool> = owners.iter().map(|o| o.contains(&i)).collect();
            client_feasible(&mask, req)
        })
        .collect();
    let allocated: usize = owners.iter().map(|o| o.len()).sum();
    Ok(ScheduleReport {
        feasible: collisions.is_empty() && clients.iter().all(|c| c.feasible),
        objective: format_ratio(&Ratio::new(allocated as i64, f as i64)),
        collisions,
        clients,
    })
}

pub fn schedule_feasible(
    schedule: &Schedule,
    instance: &ProblemInstance,
) -> Result<ScheduleReport> {
    let owners: Vec<Vec<ClientId>> = schedule
        .slots()
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();
    slots_feasible(&owners, instance)
}

/// Forced decision for [`brute_force_with_fixings`]: `(client, slot, allocated)`.
pub type Fixing = (ClientId, usize, bool);

/// Minimum-objective feasible schedule by exhaustive search.
pub fn brute_force_optimum(instance: &ProblemInstance) -> Result<Option<Schedule>> {
    brute_force_with_fixings(instance, &[], DEFAULT_BUDGET)
}

/// Exhaustive search restricted to schedules honouring `fixings`.
///
/// Enumerates every feasible mask per client, then searches disjoint
/// combinations with a slot-count bound.
pub fn brute_force_with_fixings(
    instance: &ProblemInstance,
    fixings: &[Fixing],
    budget: f64,
) -> Result<Option<Schedule>> {
    let f = instance.frame_size;
    let n = instance.n();
    let space = (n as f64 + 1.0).powi(f as i32);
    if space > budget || f > 24 {
        return Err(CoreError::BudgetExceeded(space));
    }
    let mut options: Vec<Vec<u32>> = Vec::with_capacity(n);
    for (i, req) in instance.clients.iter().enumerate() {
        let mut must = 0u32;
        let mut never = 0u32;
        for &(c, s, v) in fixings {
            if c == i && v {
                must |= 1 << s;
            } else if v || c == i {
                never |= 1 << s;
            }
        }
        let mut opts: Vec<u32> = (0u32..1 << f)
            .filter(|m| m & must == must && m & never == 0)
            .filter(|&m| {
                let mask: Vec<bool> = (0..f).map(|j| m >> j & 1 == 1).collect();
                client_violation(&mask, req).is_none()
            })
            .collect();
        if opts.is_empty() {
            return Ok(None);
        }
        opts.sort_by_key(|m| (m.count_ones(), *m));
        options.push(opts);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (options[i].len(), i));
    let min_rest: Vec<u32> = (0..=n)
        .map(|d| order[d..].iter().map(|&i| options[i][0].count_ones()).sum())
        .collect();

    struct Search<'a> {
        options: &'a [Vec<u32>],
        order: &'a [usize],
        min_rest: &'a [u32],
        chosen: Vec<u32>,
        best: Option<(u32, Vec<u32>)>,
    }
    impl Search<'_> {
        fn go(&mut self, depth: usize, used: u32, count: u32) {
            if let Some((b, _)) = &self.best {
                if count + self.min_rest[depth] >= *b {
                    return;
                }
            }
            if depth == self.order.len() {
                self.best = Some((count, self.chosen.clone()));
                return;
            }
            let i = self.order[depth];
            for &m in &self.options[i] {
                if m & used != 0 {
                    continue;
                }
                if let Some((b, _)) = &self.best {
                    if count + m.count_ones() + self.min_rest[depth + 1] >= *b {
                        break;
                    }
                }
                self.chosen[i] = m;
                self.go(depth + 1, used | m, count + m.count_ones());
            }
        }
    }
    let mut s = Search {
        options: &options,
        order: &order,
        min_rest: &min_rest,
        chosen: vec![0; n],
        best: None,
    };
    s.go(0, 0, 0);
    Ok(s.best.map(|(_, masks)| {
        let masks: Vec<Vec<bool>> = masks
            .iter()
            .map(|m| (0..f).map(|j| m >> j & 1 == 1).collect())
            .collect();
        Schedule::from_masks(&masks).expect("chosen masks are disjoint")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::parse_ratio;

    fn req(rate: &str, lat: Option<&str>) -> ClientRequirement {
        ClientRequirement::new(
            "c",
            parse_ratio(rate).unwrap(),
            lat.map(|l| parse_ratio(l).unwrap()),
        )
    }

    fn bits(s: &[u8]) -> Vec<bool> {
        s.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn two_client_column_is_feasible() {
        let r = client_feasible(
            &bits(&[0, 0, 1, 1, 0, 0, 0, 1, 1, 1]),
            &req("0.5", Some("3")),
        );
        assert!(r.feasible, "{r:?}");
    }

    #[test]
    fn empty_mask_has_rate_witness() {
        let v = client_violation(&[false; 10], &req("0.1", None));
        assert!(matches!(v, Some(Violation::Rate { allocated: 0, .. })));
    }

    #[test]
    fn latency_witness() {
        // slots {1,5,6}: the 4-slot gap is fine for latency 4 under rate 0.3 at j=5..
        let m = bits(&[1, 0, 0, 0, 1, 1, 0, 0, 0, 0]);
        assert!(client_violation(&m, &req("0.3", Some("5"))).is_none());
        let v = client_violation(&m, &req("0.3", Some("3"))).unwrap();
        match v {
            Violation::Latency {
                length, provided, ..
            } => {
                assert_eq!(length, 4);
                assert_eq!(provided, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_client_brute_force() {
        let inst = ProblemInstance::new(4, vec![req("0.5", Some("1"))]).unwrap();
        let s = brute_force_optimum(&inst).unwrap().unwrap();
        assert_eq!(s.objective(), Ratio::new(1, 2));
        let m = s.mask(0);
        assert!(m == bits(&[1, 0, 1, 0]) || m == bits(&[0, 1, 0, 1]));
    }

    #[test]
    fn budget_is_enforced() {
        let inst = ProblemInstance::new(30, vec![req("0.1", None)]).unwrap();
        assert!(matches!(
            brute_force_optimum(&inst),
            Err(CoreError::BudgetExceeded(_))
        ));
    }
}
