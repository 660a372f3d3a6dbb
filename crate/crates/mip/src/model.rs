use std::fmt;

use crate::error::ModelError;

/// Index of a variable inside a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Index of a constraint inside a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Ge => write!(f, ">="),
            Sense::Eq => write!(f, "="),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub obj: f64,
    pub integer: bool,
}

/// A linear row `sum(coef * var) <sense> rhs`.
///
/// Rows flagged `lazy` are kept out of the working LP until a relaxation
/// solution violates them.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub lazy: bool,
}

impl Constraint {
    pub fn new(coeffs: Vec<(VarId, f64)>, sense: Sense, rhs: f64) -> Self {
        Constraint {
            name: String::new(),
            coeffs,
            sense,
            rhs,
            lazy: false,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn lazy(mut self) -> Self {
        self.lazy = true;
        self
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates the row; zero when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimization model over bounded variables.
#[derive(Debug, Clone, Default)]
pub struct LinearModel {
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    obj_offset: f64,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        obj: f64,
        integer: bool,
    ) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            obj,
            integer,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.add_var(name, 0.0, 1.0, obj, true)
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        obj: f64,
    ) -> VarId {
        self.add_var(name, lower, upper, obj, false)
    }

    pub fn add_constraint(&mut self, row: Constraint) -> RowId {
        self.rows.push(row);
        RowId(self.rows.len() - 1)
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn set_obj(&mut self, var: VarId, obj: f64) {
        self.vars[var.0].obj = obj;
    }

    pub fn set_obj_offset(&mut self, offset: f64) {
        self.obj_offset = offset;
    }

    pub fn obj_offset(&self) -> f64 {
        self.obj_offset
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn constraint(&self, id: RowId) -> &Constraint {
        &self.rows[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_offset
            + self
                .vars
                .iter()
                .zip(x)
                .map(|(v, &xv)| v.obj * xv)
                .sum::<f64>()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || !v.obj.is_finite() {
                return Err(ModelError::NonFinite(format!("variable {i} ({})", v.name)));
            }
            if v.lower > v.upper {
                return Err(ModelError::InvalidBounds {
                    var: i,
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.integer && (!v.lower.is_finite() || !v.upper.is_finite()) {
                return Err(ModelError::UnboundedInteger(i));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            self.validate_row(r, row)?;
        }
        Ok(())
    }

    pub(crate) fn validate_row(&self, r: usize, row: &Constraint) -> Result<(), ModelError> {
        if !row.rhs.is_finite() {
            return Err(ModelError::NonFinite(format!(
                "rhs of row {r} ({})",
                row.name
            )));
        }
        for &(v, a) in &row.coeffs {
            if v.0 >= self.vars.len() {
                return Err(ModelError::UnknownVariable { row: r, var: v.0 });
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite(format!(
                    "coefficient in row {r} ({})",
                    row.name
                )));
            }
        }
        Ok(())
    }

    /// True when `x` satisfies bounds and every row (lazy ones included) within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.vars.len()
            && self
                .vars
                .iter()
                .zip(x)
                .all(|(v, &xv)| xv >= v.lower - tol && xv <= v.upper + tol)
            && self.rows.iter().all(|r| r.violation(x) <= tol)
    }
}
