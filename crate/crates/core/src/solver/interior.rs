//! Interior-point backend built on Clarabel.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{Affine, ConicProgram, Outcome};

pub(super) fn solve(program: &ConicProgram) -> Outcome {
    let n = program.num_vars;
    let (mut ri, mut ci, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut cones = Vec::new();

    // A x + s = b with s in the cone; s = rhs - row . x
    let mut push_row = |row: &[(usize, f64)], rhs: f64, b: &mut Vec<f64>| {
        let r = b.len();
        for (i, c) in row {
            ri.push(r);
            ci.push(*i);
            vals.push(*c);
        }
        b.push(rhs);
    };
    for (row, rhs) in &program.equalities {
        push_row(row, *rhs, &mut b);
    }
    if !program.equalities.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(program.equalities.len()));
    }
    for (row, rhs) in &program.inequalities {
        push_row(row, *rhs, &mut b);
    }
    if !program.inequalities.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(program.inequalities.len()));
    }
    // s = e.row . x + e.constant  ->  A = -e.row, b = e.constant
    let negated = |e: &Affine| -> Vec<(usize, f64)> { e.row.iter().map(|(i, c)| (*i, -c)).collect() };
    for exprs in &program.second_order {
        for e in exprs {
            push_row(&negated(e), e.constant, &mut b);
        }
        cones.push(SupportedConeT::SecondOrderConeT(exprs.len()));
    }
    for (exprs, alpha) in &program.power {
        for e in exprs {
            push_row(&negated(e), e.constant, &mut b);
        }
        cones.push(SupportedConeT::PowerConeT(*alpha));
    }

    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, n, ri, ci, vals);
    let p = CscMatrix::zeros((n, n));
    let mut q = vec![0.0; n];
    for (i, c) in &program.objective {
        q[*i] += c;
    }
    let mut status = SolverStatus::Unsolved;
    let mut x = Vec::new();
    // retry once with looser tolerances when the tight run stalls
    for tol in [1e-10, 1e-8] {
        let settings = DefaultSettings {
            verbose: false,
            tol_gap_abs: tol,
            tol_gap_rel: tol,
            tol_feas: tol,
            tol_infeas_abs: tol,
            tol_infeas_rel: tol,
            max_iter: 400,
            ..DefaultSettings::default()
        };
        let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return Outcome::NumericalFailure(format!("{e:?}")),
        };
        solver.solve();
        status = solver.solution.status;
        x = solver.solution.x.clone();
        if !matches!(status, SolverStatus::InsufficientProgress | SolverStatus::MaxIterations | SolverStatus::NumericalError) {
            break;
        }
        log::debug!("interior solve stalled with {status:?} at tol {tol:e}");
    }
    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let value = program.objective.iter().map(|(i, c)| c * x[*i]).sum();
            Outcome::Optimal { x, value }
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Outcome::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Outcome::Unbounded,
        other => Outcome::NumericalFailure(format!("{other:?}")),
    }
}
