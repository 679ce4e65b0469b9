//! Feasibility and optimization over linear, second-order and power cones.
//!
//! A [`ConicProgram`] is built from sparse rows over free variables and
//! solved either by the dense simplex (purely linear programs) or by the
//! interior-point backend (any cone).

mod interior;
mod simplex;

use serde::Serialize;

/// Sparse linear form `sum coeff * x[index]`.
pub type Row = Vec<(usize, f64)>;

/// Affine expression `row . x + constant`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Affine {
    pub row: Row,
    pub constant: f64,
}

impl Affine {
    pub fn var(index: usize) -> Self {
        Self { row: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn scaled_var(index: usize, coeff: f64) -> Self {
        Self { row: vec![(index, coeff)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { row: Vec::new(), constant: c }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.row.iter().map(|(i, c)| c * x[*i]).sum::<f64>()
    }
}

/// Minimize `objective . x` subject to the stored rows and cones.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ConicProgram {
    num_vars: usize,
    objective: Row,
    /// `row . x = rhs`
    equalities: Vec<(Row, f64)>,
    /// `row . x <= rhs`
    inequalities: Vec<(Row, f64)>,
    /// `||(e_1, ..., e_k)||_2 <= e_0`
    second_order: Vec<Vec<Affine>>,
    /// `x^alpha y^(1 - alpha) >= |z|`, `x, y >= 0`
    power: Vec<([Affine; 3], f64)>,
}

impl ConicProgram {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, ..Default::default() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn set_objective(&mut self, objective: Row) {
        self.objective = objective;
    }

    pub fn add_eq(&mut self, row: Row, rhs: f64) {
        self.equalities.push((row, rhs));
    }

    pub fn add_le(&mut self, row: Row, rhs: f64) {
        self.inequalities.push((row, rhs));
    }

    pub fn add_ge(&mut self, row: Row, rhs: f64) {
        self.inequalities.push((row.into_iter().map(|(i, c)| (i, -c)).collect(), -rhs));
    }

    pub fn add_second_order(&mut self, exprs: Vec<Affine>) {
        debug_assert!(!exprs.is_empty());
        self.second_order.push(exprs);
    }

    pub fn add_power(&mut self, x: Affine, y: Affine, z: Affine, alpha: f64) {
        debug_assert!(alpha > 0.0 && alpha < 1.0);
        self.power.push(([x, y, z], alpha));
    }

    pub fn is_linear(&self) -> bool {
        self.second_order.is_empty() && self.power.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
    NumericalFailure(String),
}

impl Outcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            Outcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Simplex for linear programs, interior point otherwise.
    #[default]
    Auto,
    Simplex,
    InteriorPoint,
}

pub fn solve(program: &ConicProgram, backend: Backend) -> Outcome {
    match backend {
        Backend::Simplex if !program.is_linear() => {
            Outcome::NumericalFailure("simplex backend cannot handle conic rows".into())
        }
        Backend::Simplex => simplex::solve(program),
        Backend::Auto if program.is_linear() => simplex::solve(program),
        _ => interior::solve(program),
    }
}
