//! Bounded-variable dual simplex on a dense tableau.
//!
//! Every structural variable is boxed (infinite bounds are replaced by a large
//! artificial bound), so the all-slack basis is always dual feasible once each
//! nonbasic variable sits on the bound matching the sign of its reduced cost.
//! That keeps the whole solver on the dual simplex: bound changes during
//! branch-and-bound and appended rows never cost dual feasibility.

use std::time::Instant;

use crate::model::Sense;

pub(crate) const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const RESIDUAL_TOL: f64 = 1e-7;
pub(crate) const ARTIFICIAL_BOUND: f64 = 1e7;
const NONBASIC: usize = usize::MAX;
/// Consecutive degenerate pivots before the costs are perturbed.
const DEGENERATE_LIMIT: u32 = 60;
/// Degenerate pivots on perturbed costs before falling back to Bland's rule.
const BLAND_LIMIT: u32 = 2000;
const PERTURBATION: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    TimedOut,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    nv: usize,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    t: Vec<Vec<f64>>,
    beta: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    /// Cost perturbation active while the dual simplex fights degeneracy.
    shift: Vec<f64>,
    perturbed: bool,
    lo: Vec<f64>,
    hi: Vec<f64>,
    artificial_lo: Vec<bool>,
    artificial_hi: Vec<bool>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    at_upper: Vec<bool>,
    x: Vec<f64>,
    pub(crate) iterations: u64,
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

impl Tableau {
    pub(crate) fn new(lower: &[f64], upper: &[f64], cost: &[f64]) -> Self {
        let nv = cost.len();
        let mut tab = Tableau {
            nv,
            rows: Vec::new(),
            rhs: Vec::new(),
            t: Vec::new(),
            beta: Vec::new(),
            d: cost.to_vec(),
            cost: cost.to_vec(),
            shift: vec![0.0; nv],
            perturbed: false,
            lo: vec![0.0; nv],
            hi: vec![0.0; nv],
            artificial_lo: vec![false; nv],
            artificial_hi: vec![false; nv],
            basis: Vec::new(),
            row_of: vec![NONBASIC; nv],
            at_upper: vec![false; nv],
            x: vec![0.0; nv],
            iterations: 0,
        };
        for j in 0..nv {
            tab.set_bounds(j, lower[j], upper[j]);
        }
        tab.refresh();
        tab
    }

    fn ncols(&self) -> usize {
        self.nv + self.t.len()
    }

    /// Changes the box of a structural variable. Call [`Tableau::refresh`]
    /// after a batch of changes.
    pub(crate) fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        debug_assert!(j < self.nv);
        self.artificial_lo[j] = !lower.is_finite();
        self.artificial_hi[j] = !upper.is_finite();
        self.lo[j] = if lower.is_finite() {
            lower
        } else {
            -ARTIFICIAL_BOUND
        };
        self.hi[j] = if upper.is_finite() {
            upper
        } else {
            ARTIFICIAL_BOUND
        };
    }

    pub(crate) fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    /// Appends `sum(coef * x) <sense> rhs` with its slack basic.
    pub(crate) fn add_row(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64) {
        let m = self.t.len();
        let slack = self.nv + m;
        for row in &mut self.t {
            row.push(0.0);
        }
        let (slo, shi) = slack_bounds(sense);
        self.d.push(0.0);
        self.cost.push(0.0);
        self.shift.push(0.0);
        self.lo.push(slo);
        self.hi.push(shi);
        self.artificial_lo.push(false);
        self.artificial_hi.push(false);
        self.at_upper.push(false);
        self.row_of.push(m);

        let ncols = slack + 1;
        let mut r = vec![0.0; ncols];
        for &(j, a) in coeffs {
            r[j] += a;
        }
        r[slack] = 1.0;
        let mut b = rhs;
        for &(j, _) in coeffs {
            let i = self.row_of[j];
            if i == NONBASIC {
                continue;
            }
            let f = r[j];
            if f == 0.0 {
                continue;
            }
            let src = &self.t[i];
            for (k, v) in src.iter().enumerate() {
                if *v != 0.0 {
                    r[k] -= f * v;
                }
            }
            r[j] = 0.0;
            b -= f * self.beta[i];
        }
        let activity: f64 = coeffs.iter().map(|&(j, a)| a * self.x[j]).sum();
        self.x.push(rhs - activity);
        self.t.push(r);
        self.beta.push(b);
        self.basis.push(slack);
        self.rows.push(coeffs.to_vec());
        self.rhs.push(rhs);
    }

    /// Re-seats nonbasic variables on the bound consistent with their reduced
    /// cost and recomputes the basic values.
    pub(crate) fn refresh(&mut self) {
        let ncols = self.ncols();
        for j in 0..ncols {
            if self.row_of[j] != NONBASIC {
                continue;
            }
            if j < self.nv {
                if self.d[j] > DUAL_TOL {
                    self.at_upper[j] = false;
                } else if self.d[j] < -DUAL_TOL {
                    self.at_upper[j] = true;
                }
            }
            self.x[j] = if self.at_upper[j] {
                self.hi[j]
            } else {
                self.lo[j]
            };
        }
        let nonzero: Vec<(usize, f64)> = (0..ncols)
            .filter(|&j| self.row_of[j] == NONBASIC && self.x[j] != 0.0)
            .map(|j| (j, self.x[j]))
            .collect();
        for i in 0..self.t.len() {
            let row = &self.t[i];
            let mut v = self.beta[i];
            for &(j, xj) in &nonzero {
                v -= row[j] * xj;
            }
            let b = self.basis[i];
            self.x[b] = v;
        }
    }

    fn reset_to_slack_basis(&mut self) {
        let m = self.t.len();
        let ncols = self.ncols();
        for i in 0..m {
            let mut r = vec![0.0; ncols];
            for &(j, a) in &self.rows[i] {
                r[j] += a;
            }
            r[self.nv + i] = 1.0;
            self.t[i] = r;
            self.beta[i] = self.rhs[i];
        }
        self.row_of.iter_mut().for_each(|r| *r = NONBASIC);
        for i in 0..m {
            self.basis[i] = self.nv + i;
            self.row_of[self.nv + i] = i;
        }
        self.d = self.effective_cost();
        for j in self.nv..ncols {
            self.d[j] = self.shift[j];
        }
        self.refresh();
    }

    /// Rebuilds the tableau from the original rows for the current basis.
    fn reinvert(&mut self) {
        let m = self.t.len();
        let ncols = self.ncols();
        let old_basis = self.basis.clone();
        let old_upper = self.at_upper.clone();
        for i in 0..m {
            let mut r = vec![0.0; ncols];
            for &(j, a) in &self.rows[i] {
                r[j] += a;
            }
            r[self.nv + i] = 1.0;
            self.t[i] = r;
            self.beta[i] = self.rhs[i];
        }
        let mut assigned = vec![false; m];
        let mut new_basis = vec![NONBASIC; m];
        for &c in &old_basis {
            let mut best = None;
            let mut best_abs = 1e-11;
            for i in 0..m {
                if !assigned[i] && self.t[i][c].abs() > best_abs {
                    best_abs = self.t[i][c].abs();
                    best = Some(i);
                }
            }
            let Some(r) = best else {
                log::debug!("singular basis during reinversion, restarting from slack basis");
                self.at_upper = old_upper;
                self.reset_to_slack_basis();
                return;
            };
            self.eliminate(r, c);
            assigned[r] = true;
            new_basis[r] = c;
        }
        self.basis = new_basis;
        self.row_of.iter_mut().for_each(|r| *r = NONBASIC);
        for (i, &c) in self.basis.iter().enumerate() {
            self.row_of[c] = i;
        }
        self.recompute_reduced_costs();
        self.at_upper = old_upper;
        self.refresh();
    }

    fn effective_cost(&self) -> Vec<f64> {
        self.cost
            .iter()
            .zip(&self.shift)
            .map(|(c, s)| c + s)
            .collect()
    }

    fn recompute_reduced_costs(&mut self) {
        let cost = self.effective_cost();
        let mut d = cost.clone();
        for (i, row) in self.t.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (k, v) in row.iter().enumerate() {
                    d[k] -= cb * v;
                }
            }
        }
        for &c in &self.basis {
            d[c] = 0.0;
        }
        self.d = d;
    }

    /// Shifts the cost of every nonbasic column away from zero reduced cost,
    /// in the direction that keeps it dual feasible.
    fn perturb(&mut self) {
        log::trace!("perturbing costs after degenerate pivots");
        for j in 0..self.ncols() {
            if self.row_of[j] != NONBASIC || self.lo[j] == self.hi[j] {
                continue;
            }
            let spread = 1.0 + ((j * 7919) % 97) as f64 / 97.0;
            let delta = PERTURBATION * spread * (1.0 + self.cost[j].abs());
            let delta = if self.at_upper[j] { -delta } else { delta };
            self.shift[j] += delta;
            self.d[j] += delta;
        }
        self.perturbed = true;
    }

    /// Drops the perturbation and restores optimality for the true costs with
    /// primal simplex steps, which keep the current point feasible.
    fn unperturb(&mut self, deadline: Option<Instant>, max_iter: u64) -> Outcome {
        self.shift.iter_mut().for_each(|s| *s = 0.0);
        self.perturbed = false;
        self.recompute_reduced_costs();
        let start = self.iterations;
        let mut degenerate = 0u32;
        loop {
            if (self.iterations - start) % 64 == 63
                && deadline.is_some_and(|dl| Instant::now() >= dl)
            {
                return Outcome::TimedOut;
            }
            if self.iterations - start >= max_iter {
                return Outcome::IterationLimit;
            }
            let bland = degenerate > DEGENERATE_LIMIT;
            let mut entering: Option<usize> = None;
            let mut best = DUAL_TOL;
            for j in 0..self.ncols() {
                if self.row_of[j] != NONBASIC || self.lo[j] == self.hi[j] {
                    continue;
                }
                let gain = if self.at_upper[j] {
                    self.d[j]
                } else {
                    -self.d[j]
                };
                if gain > best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = gain;
                }
            }
            let Some(q) = entering else {
                return Outcome::Optimal;
            };
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            let mut step = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_alpha = 0.0;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[q];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let rate = -a * dir;
                let b = self.basis[i];
                let limit = if rate < 0.0 {
                    (self.x[b] - self.lo[b]).max(0.0) / -rate
                } else {
                    (self.hi[b] - self.x[b]).max(0.0) / rate
                };
                if !limit.is_finite() {
                    continue;
                }
                if limit < step - 1e-12
                    || (limit <= step + 1e-12 && leave.is_some() && a.abs() > leave_alpha)
                {
                    step = limit;
                    leave = Some((i, rate > 0.0));
                    leave_alpha = a.abs();
                }
            }
            if !step.is_finite() {
                return Outcome::Unbounded;
            }
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            match leave {
                Some((r, to_upper)) => self.pivot(r, q, to_upper),
                None => {
                    for i in 0..self.t.len() {
                        let a = self.t[i][q];
                        if a != 0.0 {
                            let b = self.basis[i];
                            self.x[b] -= a * dir * step;
                        }
                    }
                    self.at_upper[q] = !self.at_upper[q];
                    self.x[q] = if self.at_upper[q] {
                        self.hi[q]
                    } else {
                        self.lo[q]
                    };
                    self.iterations += 1;
                }
            }
        }
    }

    /// Gauss-Jordan step on (r, q) for `t` and `beta` only.
    fn eliminate(&mut self, r: usize, q: usize) -> Vec<usize> {
        let inv = 1.0 / self.t[r][q];
        let mut prow = std::mem::take(&mut self.t[r]);
        let mut nz = Vec::new();
        for (k, v) in prow.iter_mut().enumerate() {
            if *v != 0.0 {
                *v *= inv;
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                } else {
                    nz.push(k);
                }
            }
        }
        prow[q] = 1.0;
        self.beta[r] *= inv;
        let br = self.beta[r];
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[q];
            if f == 0.0 {
                continue;
            }
            for &k in &nz {
                let v = row[k] - f * prow[k];
                row[k] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
            self.beta[i] -= f * br;
        }
        self.t[r] = prow;
        nz
    }

    fn pivot(&mut self, r: usize, q: usize, to_upper: bool) {
        let leaving = self.basis[r];
        let alpha = self.t[r][q];
        let target = if to_upper {
            self.hi[leaving]
        } else {
            self.lo[leaving]
        };
        let delta = (self.x[leaving] - target) / alpha;
        for i in 0..self.t.len() {
            if i != r {
                let f = self.t[i][q];
                if f != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= f * delta;
                }
            }
        }
        self.x[q] += delta;
        self.x[leaving] = target;
        self.at_upper[leaving] = to_upper;

        let nz = self.eliminate(r, q);
        let dq = self.d[q];
        if dq != 0.0 {
            let prow = &self.t[r];
            for &k in &nz {
                self.d[k] -= dq * prow[k];
            }
        }
        self.d[q] = 0.0;
        self.basis[r] = q;
        self.row_of[q] = r;
        self.row_of[leaving] = NONBASIC;
        self.iterations += 1;
    }

    fn max_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * self.x[j]).sum();
            let res = act + self.x[self.nv + i] - self.rhs[i];
            worst = worst.max(res.abs());
        }
        worst
    }

    pub(crate) fn solve(&mut self, deadline: Option<Instant>, max_iter: u64) -> Outcome {
        let mut degenerate = 0u32;
        let mut repaired = false;
        let start = self.iterations;
        loop {
            if (self.iterations - start) % 64 == 63 {
                if let Some(dl) = deadline {
                    if Instant::now() >= dl {
                        return Outcome::TimedOut;
                    }
                }
            }
            if self.iterations - start >= max_iter {
                return Outcome::IterationLimit;
            }
            if degenerate > DEGENERATE_LIMIT && !self.perturbed {
                self.perturb();
                degenerate = 0;
            }
            let bland = self.perturbed && degenerate > BLAND_LIMIT;
            let Some((r, to_upper)) = self.choose_leaving(bland) else {
                if !repaired && self.max_residual() > RESIDUAL_TOL {
                    log::debug!("tableau drift detected, reinverting");
                    self.reinvert();
                    repaired = true;
                    continue;
                }
                if self.perturbed {
                    let used = self.iterations - start;
                    match self.unperturb(deadline, max_iter.saturating_sub(used)) {
                        Outcome::Optimal => {}
                        other => return other,
                    }
                }
                return if self.hits_artificial_bound() {
                    Outcome::Unbounded
                } else {
                    Outcome::Optimal
                };
            };
            let Some((q, ratio)) = self.choose_entering(r, to_upper, bland) else {
                if !repaired {
                    self.reinvert();
                    repaired = true;
                    continue;
                }
                return Outcome::Infeasible;
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, to_upper);
        }
    }

    fn choose_leaving(&self, bland: bool) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool)> = None;
        let mut best_score = 0.0;
        let mut best_col = usize::MAX;
        for (i, &b) in self.basis.iter().enumerate() {
            let v = self.x[b];
            let (inf, to_upper) = if v < self.lo[b] - FEAS_TOL {
                (self.lo[b] - v, false)
            } else if v > self.hi[b] + FEAS_TOL {
                (v - self.hi[b], true)
            } else {
                continue;
            };
            if bland {
                if b < best_col {
                    best_col = b;
                    best = Some((i, to_upper));
                }
            } else if inf > best_score {
                best_score = inf;
                best = Some((i, to_upper));
            }
        }
        best
    }

    fn choose_entering(&self, r: usize, to_upper: bool, bland: bool) -> Option<(usize, f64)> {
        let row = &self.t[r];
        let mut best: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        let mut best_alpha = 0.0;
        for (j, &a) in row.iter().enumerate() {
            if a.abs() < PIVOT_TOL || self.row_of[j] != NONBASIC || self.lo[j] == self.hi[j] {
                continue;
            }
            let up = self.at_upper[j];
            // leaving var moves down to its upper bound when to_upper, else up.
            let eligible = if to_upper {
                (a > 0.0 && !up) || (a < 0.0 && up)
            } else {
                (a < 0.0 && !up) || (a > 0.0 && up)
            };
            if !eligible {
                continue;
            }
            let ratio = self.d[j].abs() / a.abs();
            let better = if ratio < best_ratio - 1e-12 {
                true
            } else if ratio <= best_ratio + 1e-12 {
                if bland {
                    false
                } else {
                    a.abs() > best_alpha
                }
            } else {
                false
            };
            if better {
                best = Some(j);
                best_ratio = ratio;
                best_alpha = a.abs();
            }
        }
        best.map(|j| (j, best_ratio))
    }

    fn hits_artificial_bound(&self) -> bool {
        (0..self.nv).any(|j| {
            (self.artificial_hi[j] && self.x[j] >= ARTIFICIAL_BOUND * (1.0 - 1e-9))
                || (self.artificial_lo[j] && self.x[j] <= -ARTIFICIAL_BOUND * (1.0 - 1e-9))
        })
    }

    pub(crate) fn primal(&self) -> Vec<f64> {
        self.x[..self.nv].to_vec()
    }

    /// Row duals with the convention `reduced cost = c - sum(dual * a)`.
    pub(crate) fn duals(&self) -> Vec<f64> {
        (0..self.t.len()).map(|i| -self.d[self.nv + i]).collect()
    }

    pub(crate) fn reduced_costs(&self) -> Vec<f64> {
        self.d[..self.nv].to_vec()
    }

    pub(crate) fn objective(&self) -> f64 {
        self.cost[..self.nv]
            .iter()
            .zip(&self.x[..self.nv])
            .map(|(c, x)| c * x)
            .sum()
    }
}
