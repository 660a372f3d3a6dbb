use std::time::Instant;

use crate::error::ModelError;
use crate::model::{Constraint, LinearModel, RowId};
use crate::simplex::{Outcome, Tableau, FEAS_TOL};
use crate::SolveError;

/// Lazy rows violated by more than this are pulled into the working LP.
const LAZY_TOL: f64 = 1e-7;
const MAX_LAZY_PER_ROUND: usize = 256;
const MAX_ITER_PER_SOLVE: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values, indexed like the model's variables.
    pub primal: Vec<f64>,
    /// One dual per model constraint; rows never pulled into the LP get 0.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
}

/// Working relaxation of a model: a tableau holding the non-lazy rows plus
/// whichever lazy rows and cuts were added so far.
pub(crate) struct Relaxation<'m> {
    model: &'m LinearModel,
    pub(crate) tab: Tableau,
    tab_rows: Vec<Option<RowId>>,
    pending: Vec<usize>,
    pub(crate) lazy_rows_added: u64,
}

impl<'m> Relaxation<'m> {
    pub(crate) fn new(model: &'m LinearModel) -> Self {
        let lower: Vec<f64> = model.vars().iter().map(|v| v.lower).collect();
        let upper: Vec<f64> = model.vars().iter().map(|v| v.upper).collect();
        let cost: Vec<f64> = model.vars().iter().map(|v| v.obj).collect();
        let mut rel = Relaxation {
            model,
            tab: Tableau::new(&lower, &upper, &cost),
            tab_rows: Vec::new(),
            pending: Vec::new(),
            lazy_rows_added: 0,
        };
        for (i, row) in model.constraints().iter().enumerate() {
            if row.lazy {
                rel.pending.push(i);
            } else {
                rel.push_row(row, Some(RowId(i)));
            }
        }
        rel.tab.refresh();
        rel
    }

    fn push_row(&mut self, row: &Constraint, id: Option<RowId>) {
        let coeffs: Vec<(usize, f64)> = row.coeffs.iter().map(|&(v, a)| (v.0, a)).collect();
        self.tab.add_row(&coeffs, row.sense, row.rhs);
        self.tab_rows.push(id);
    }

    pub(crate) fn add_cut(&mut self, row: &Constraint) -> Result<(), ModelError> {
        self.model.validate_row(self.model.num_constraints(), row)?;
        self.push_row(row, None);
        Ok(())
    }

    /// Solves the current relaxation, separating lazy rows until none is violated.
    pub(crate) fn solve(&mut self, deadline: Option<Instant>) -> Result<Outcome, SolveError> {
        loop {
            let out = self.tab.solve(deadline, MAX_ITER_PER_SOLVE);
            match out {
                Outcome::Optimal => {}
                Outcome::IterationLimit => return Err(SolveError::IterationLimit),
                other => return Ok(other),
            }
            if self.pending.is_empty() {
                return Ok(Outcome::Optimal);
            }
            let x = self.tab.primal();
            let rows = self.model.constraints();
            let mut violated: Vec<(usize, f64)> = self
                .pending
                .iter()
                .enumerate()
                .filter_map(|(pos, &r)| {
                    let v = rows[r].violation(&x);
                    (v > LAZY_TOL).then_some((pos, v))
                })
                .collect();
            if violated.is_empty() {
                return Ok(Outcome::Optimal);
            }
            violated.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            violated.truncate(MAX_LAZY_PER_ROUND);
            let mut take: Vec<usize> = violated.iter().map(|&(pos, _)| pos).collect();
            take.sort_unstable();
            for &pos in take.iter().rev() {
                let r = self.pending.remove(pos);
                self.push_row(&rows[r], Some(RowId(r)));
                self.lazy_rows_added += 1;
            }
            self.tab.refresh();
        }
    }

    pub(crate) fn objective(&self) -> f64 {
        self.tab.objective() + self.model.obj_offset()
    }

    pub(crate) fn model_duals(&self) -> Vec<f64> {
        let mut duals = vec![0.0; self.model.num_constraints()];
        for (d, id) in self.tab.duals().into_iter().zip(&self.tab_rows) {
            if let Some(RowId(r)) = id {
                duals[*r] = d;
            }
        }
        duals
    }
}

/// Solves the LP relaxation of `model` (integrality flags are ignored).
pub fn solve_lp(model: &LinearModel) -> Result<LpSolution, SolveError> {
    model.validate()?;
    let mut rel = Relaxation::new(model);
    let out = rel.solve(None)?;
    let n = model.num_vars();
    let status = match out {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Infeasible => LpStatus::Infeasible,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::TimedOut | Outcome::IterationLimit => return Err(SolveError::IterationLimit),
    };
    if status != LpStatus::Optimal {
        return Ok(LpSolution {
            status,
            primal: vec![0.0; n],
            duals: vec![0.0; model.num_constraints()],
            reduced_costs: vec![0.0; n],
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
        });
    }
    let mut primal = rel.tab.primal();
    for (x, v) in primal.iter_mut().zip(model.vars()) {
        // clamp tolerance-level bound violations
        if *x < v.lower && *x > v.lower - FEAS_TOL {
            *x = v.lower;
        } else if *x > v.upper && *x < v.upper + FEAS_TOL {
            *x = v.upper;
        }
    }
    Ok(LpSolution {
        status,
        objective: rel.objective(),
        duals: rel.model_duals(),
        reduced_costs: rel.tab.reduced_costs(),
        primal,
    })
}
