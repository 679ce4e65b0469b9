use serde::Serialize;

use super::compile::{add_norm_bound, Compiled};
use super::model::{ModelKind, Sense, Side, UncertaintyModel};
use super::RegionLabel;
use crate::error::{Error, Result};
use crate::norms::{basis_containing, norm_gradient, Vector};
use crate::oracle::Label;
use crate::solver::{solve, Affine, Backend, ConicProgram, Outcome, Row};
use crate::tolerance::REGION_EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RegionOptions {
    /// A side is forced when the opposite extreme stays below this.
    pub epsilon: f64,
    pub backend: Backend,
    pub tangent_presolve: bool,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self { epsilon: REGION_EPSILON, backend: Backend::Auto, tangent_presolve: true }
    }
}

fn decide(forced_no: bool, forced_yes: bool) -> RegionLabel {
    match (forced_no, forced_yes) {
        (true, false) => RegionLabel::No,
        (false, true) => RegionLabel::Yes,
        // both: x lies on every consistent hyperplane
        _ => RegionLabel::Unknown,
    }
}

fn failure(outcome: Outcome) -> Error {
    match outcome {
        Outcome::Optimal { .. } => Error::SolverFailure("unexpected optimum".into()),
        Outcome::Infeasible => Error::SolverFailure("program reported infeasible".into()),
        Outcome::Unbounded => Error::SolverFailure("program reported unbounded".into()),
        Outcome::NumericalFailure(msg) => Error::SolverFailure(msg),
    }
}

fn optimal_value(outcome: Outcome) -> Result<f64> {
    match outcome {
        Outcome::Optimal { value, .. } => Ok(value),
        other => Err(failure(other)),
    }
}

/// Primal membership test compiled once for repeated queries.
///
/// Solves `max` and `min` of `a^T x - b` over the model intersected with
/// the box `|z_i| <= 1`.
#[derive(Debug, Clone)]
pub struct MembershipEngine {
    dim: usize,
    program: ConicProgram,
    options: RegionOptions,
}

impl MembershipEngine {
    pub fn new(model: &UncertaintyModel, options: RegionOptions) -> Result<Self> {
        let compiled = Compiled::new(model, options.tangent_presolve)?;
        Ok(Self { dim: model.dim, program: compiled.program(), options })
    }

    pub fn is_linear(&self) -> bool {
        self.program.is_linear()
    }

    fn objective(&self, x: &Vector, sign: f64) -> Row {
        let mut obj: Row = x.as_slice().iter().enumerate().map(|(i, v)| (i, sign * v)).collect();
        obj.push((self.dim, -sign));
        obj
    }

    /// `(max, min)` of `a^T x - b` over the boxed model.
    pub fn extremes(&self, x: &Vector) -> Result<(f64, f64)> {
        x.check_dim(self.dim)?;
        let mut prog = self.program.clone();
        prog.set_objective(self.objective(x, -1.0));
        let max = -optimal_value(solve(&prog, self.options.backend))?;
        prog.set_objective(self.objective(x, 1.0));
        let min = optimal_value(solve(&prog, self.options.backend))?;
        Ok((max, min))
    }

    /// Optimal value, or `None` when the solver stalls on a set without
    /// strict interior.
    fn certified(&self, prog: &ConicProgram) -> Result<Option<f64>> {
        match solve(prog, self.options.backend) {
            Outcome::Optimal { value, .. } => Ok(Some(value)),
            Outcome::NumericalFailure(msg) => {
                log::warn!("membership solve stalled ({msg}); leaving the test undecided");
                Ok(None)
            }
            other => Err(failure(other)),
        }
    }

    /// Region label of `x`. A test the solver cannot finish counts as not
    /// passed, so stalls only ever produce `Unknown`.
    pub fn label(&self, x: &Vector) -> Result<RegionLabel> {
        x.check_dim(self.dim)?;
        let eps = self.options.epsilon;
        let mut prog = self.program.clone();
        prog.set_objective(self.objective(x, -1.0));
        let no = self.certified(&prog)?.is_some_and(|v| -v < eps);
        prog.set_objective(self.objective(x, 1.0));
        let yes = self.certified(&prog)?.is_some_and(|v| v > -eps);
        Ok(decide(no, yes))
    }
}

pub fn membership(model: &UncertaintyModel, x: &Vector) -> Result<RegionLabel> {
    membership_with(model, x, RegionOptions::default())
}

pub fn membership_with(model: &UncertaintyModel, x: &Vector, options: RegionOptions) -> Result<RegionLabel> {
    MembershipEngine::new(model, options)?.label(x)
}

/// Conic combination expressing `(x, -1)` (for `No`) or `(-x, 1)` (for
/// `Yes`) from the ledger's generators, up to `distance` in l1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub target: Label,
    pub distance: f64,
    /// One weight per linear row, in model order.
    pub linear_weights: Vec<f64>,
    /// One scale per norm ball, in model order.
    pub ball_scales: Vec<f64>,
}

/// Dual membership test: l1 distance from the target vector to the cone
/// generated by the ledger's rows.
///
/// Factual rows contribute rays, boundary equalities contribute lines and
/// each norm ball contributes the perspective cone of its points. Where a
/// smooth ball touches a boundary equality the sum of those cones is not
/// closed, so the tangent directions at the touch point are added as
/// generators of the closure; otherwise the distance is not attained next
/// to the boundary.
#[derive(Debug, Clone)]
pub struct DualEngine {
    model: UncertaintyModel,
    /// `(coeff, free)`: extra generators spanning the closure.
    tangents: Vec<(Vec<f64>, bool)>,
    options: RegionOptions,
}

struct DualProgram {
    prog: ConicProgram,
    linear_vars: Vec<usize>,
    ball_vars: Vec<usize>,
}

impl DualEngine {
    pub fn new(model: &UncertaintyModel, options: RegionOptions) -> Result<Self> {
        if model.kind == ModelKind::Rcf {
            return Err(Error::WrongModelKind { expected: "factual or cf".into(), got: model.kind.to_string() });
        }
        let mut tangents = Vec::new();
        for ball in &model.norm_rows {
            let Some(t) = &ball.touch else { continue };
            if !ball.norm.is_differentiable() {
                continue;
            }
            let w = t.sub(&ball.point);
            if w.is_zero() {
                continue;
            }
            // tangent cone of the ball at t: {d : n . d <= 0}
            let n = norm_gradient(&w, ball.norm)?;
            let s = Self::ball_sign(ball.side);
            let mut ray: Vec<f64> = n.as_slice().iter().map(|v| -s * v).collect();
            ray.push(0.0);
            tangents.push((ray, false));
            for u in &basis_containing(&n)?[1..] {
                let mut line = u.as_slice().to_vec();
                line.push(0.0);
                tangents.push((line, true));
            }
        }
        Ok(Self { model: model.clone(), tangents, options })
    }

    fn ball_sign(side: Side) -> f64 {
        match side {
            Side::No => 1.0,
            Side::Yes => -1.0,
        }
    }

    fn build(&self, target: &[f64]) -> DualProgram {
        let p = self.model.dim;
        let mut prog = ConicProgram::new(0);
        let mut combo: Vec<Row> = vec![Row::new(); p + 1];
        let mut add_generator = |prog: &mut ConicProgram, coeff: &[f64], sign: f64, free: bool| {
            let t = prog.add_var();
            if !free {
                prog.add_ge(vec![(t, 1.0)], 0.0);
            }
            for (k, c) in coeff.iter().enumerate() {
                if *c != 0.0 {
                    combo[k].push((t, sign * c));
                }
            }
            t
        };
        let mut linear_vars = Vec::new();
        for row in &self.model.linear {
            let (sign, free) = match row.sense {
                Sense::Le => (1.0, false),
                Sense::Ge => (-1.0, false),
                Sense::Eq => (1.0, true),
            };
            linear_vars.push(add_generator(&mut prog, &row.coeff, sign, free));
        }
        for (coeff, free) in &self.tangents {
            add_generator(&mut prog, coeff, 1.0, *free);
        }
        let mut ball_vars = Vec::new();
        for ball in &self.model.norm_rows {
            // u (z, -1) with z in the ball (No side), u (-z, 1) on the Yes side
            let u = prog.add_var();
            prog.add_ge(vec![(u, 1.0)], 0.0);
            let s = Self::ball_sign(ball.side);
            let mut offsets = Vec::with_capacity(p);
            for (k, entry) in combo.iter_mut().enumerate().take(p) {
                let y = prog.add_var();
                entry.push((y, 1.0));
                offsets.push(Affine { row: vec![(y, 1.0), (u, -s * ball.point.get(k))], constant: 0.0 });
            }
            combo[p].push((u, -s));
            add_norm_bound(&mut prog, &offsets, ball.norm, Affine::scaled_var(u, ball.radius));
            ball_vars.push(u);
        }
        // e_k >= |target_k - combo_k|
        let mut objective = Vec::new();
        for (k, c) in combo.iter().enumerate() {
            let e = prog.add_var();
            let mut up: Row = c.iter().map(|(i, v)| (*i, -v)).collect();
            up.push((e, -1.0));
            prog.add_le(up, -target[k]);
            let mut down: Row = c.clone();
            down.push((e, -1.0));
            prog.add_le(down, target[k]);
            objective.push((e, 1.0));
        }
        prog.set_objective(objective);
        DualProgram { prog, linear_vars, ball_vars }
    }

    fn target_vector(x: &Vector, target: Label) -> Vec<f64> {
        let s = match target {
            Label::No => 1.0,
            Label::Yes => -1.0,
        };
        let mut g: Vec<f64> = x.as_slice().iter().map(|v| s * v).collect();
        g.push(-s);
        g
    }

    pub fn certificate(&self, x: &Vector, target: Label) -> Result<DualCertificate> {
        x.check_dim(self.model.dim)?;
        let dp = self.build(&Self::target_vector(x, target));
        match solve(&dp.prog, self.options.backend) {
            Outcome::Optimal { x: sol, value } => Ok(DualCertificate {
                target,
                distance: value.max(0.0),
                linear_weights: dp.linear_vars.iter().map(|&i| sol[i]).collect(),
                ball_scales: dp.ball_vars.iter().map(|&i| sol[i]).collect(),
            }),
            other => Err(failure(other)),
        }
    }

    pub fn label(&self, x: &Vector) -> Result<RegionLabel> {
        let eps = self.options.epsilon;
        let no = self.certificate(x, Label::No)?.distance < eps;
        let yes = self.certificate(x, Label::Yes)?.distance < eps;
        Ok(decide(no, yes))
    }
}

pub fn membership_dual(model: &UncertaintyModel, x: &Vector) -> Result<RegionLabel> {
    DualEngine::new(model, RegionOptions::default())?.label(x)
}

pub fn dual_certificate(model: &UncertaintyModel, x: &Vector, target: Label) -> Result<DualCertificate> {
    DualEngine::new(model, RegionOptions::default())?.certificate(x, target)
}
