use serde::Serialize;

use crate::error::{Error, Result};
use crate::norms::{basis_containing, max_abs, norm_equivalence_constant, norm_gradient_of, norm_of, NormKind, Vector};
use crate::oracle::{Label, QueryKind, QueryLedger, RobustnessSpec};

/// Relative threshold deciding support and active sets of subgradient faces.
const FACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Factual,
    Cf,
    Rcf,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Factual => "factual",
            ModelKind::Cf => "cf",
            ModelKind::Rcf => "rcf",
        };
        f.write_str(s)
    }
}

/// Sense of a linear row `coeff . z (sense) 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrigin {
    Factual,
    CfBoundary,
    Subgradient,
    TouchingLinearized,
    Perspective,
    TouchPoint,
}

/// `coeff . (a, b) (sense) 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub coeff: Vec<f64>,
    pub sense: Sense,
    pub origin: RowOrigin,
    pub seq: usize,
}

/// Which side of the hyperplane a norm ball is held on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `a^T x - b + r ||a||^* <= 0`
    No,
    /// `a^T x - b - r ||a||^* >= 0`
    Yes,
}

impl Side {
    pub fn of(label: Label) -> Self {
        match label {
            Label::No => Side::No,
            Label::Yes => Side::Yes,
        }
    }
}

/// The whole `norm` ball of radius `radius` around `point` lies on `side`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormConstraint {
    pub point: Vector,
    pub radius: f64,
    pub norm: NormKind,
    pub side: Side,
    pub seq: usize,
    /// Boundary point the ball is known to touch, if any.
    pub touch: Option<Vector>,
    pub relaxed: bool,
}

impl NormConstraint {
    /// Signed violation at `z = (a, b)`; positive means violated.
    pub fn violation(&self, z: &[f64]) -> f64 {
        let p = self.point.dim();
        let margin = crate::norms::dot(&z[..p], self.point.as_slice()) - z[p];
        let dn = norm_of(&z[..p], self.norm.dual());
        match self.side {
            Side::No => margin + self.radius * dn,
            Side::Yes => -(margin - self.radius * dn),
        }
    }
}

/// `sign * a` lies in the cone spanned by the subdifferential of `norm` at
/// `direction`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgradientConstraint {
    pub direction: Vector,
    pub norm: NormKind,
    pub sign: f64,
    pub seq: usize,
}

/// Polyhedral description of `cone(sign * subdiff ||.||(w))` in `a`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Face {
    /// `a = t c`, `t >= 0`.
    Ray(Vec<f64>),
    /// `s_j a_j = t` on `support`, `|a_k| <= t` elsewhere.
    Support { support: Vec<usize>, signs: Vec<f64> },
    /// `a_k = 0` off `active`, `s_j a_j >= 0` on it.
    Active { active: Vec<usize>, signs: Vec<f64> },
}

impl SubgradientConstraint {
    pub(crate) fn face(&self) -> Result<Face> {
        let w = self.direction.as_slice();
        let m = max_abs(w);
        if m == 0.0 {
            return Err(Error::DegenerateDirection);
        }
        let p = w.len();
        let sgn = |x: f64| if x < 0.0 { -self.sign } else { self.sign };
        Ok(match self.norm {
            NormKind::L1 => {
                let support: Vec<usize> = (0..p).filter(|&j| w[j].abs() > FACE_TOL * m).collect();
                if support.len() == p {
                    Face::Ray(w.iter().map(|&x| sgn(x)).collect())
                } else {
                    let signs = support.iter().map(|&j| sgn(w[j])).collect();
                    Face::Support { support, signs }
                }
            }
            NormKind::Linf => {
                let active: Vec<usize> = (0..p).filter(|&j| w[j].abs() >= (1.0 - FACE_TOL) * m).collect();
                if active.len() == 1 {
                    let mut c = vec![0.0; p];
                    c[active[0]] = sgn(w[active[0]]);
                    Face::Ray(c)
                } else {
                    let signs = active.iter().map(|&j| sgn(w[j])).collect();
                    Face::Active { active, signs }
                }
            }
            kind => Face::Ray(norm_gradient_of(w, kind)?.into_iter().map(|g| self.sign * g).collect()),
        })
    }

    /// Linear rows over `(a, b)` describing the face.
    pub fn rows(&self) -> Result<Vec<(Vec<f64>, Sense)>> {
        let p = self.direction.dim();
        let mut out = Vec::new();
        let row = |entries: &[(usize, f64)]| {
            let mut r = vec![0.0; p + 1];
            for &(i, c) in entries {
                r[i] += c;
            }
            r
        };
        match self.face()? {
            Face::Ray(c) => {
                let basis = basis_containing(&Vector::from_raw(c.clone()))?;
                for u in &basis[1..] {
                    let mut r = u.as_slice().to_vec();
                    r.push(0.0);
                    out.push((r, Sense::Eq));
                }
                let mut r = c;
                r.push(0.0);
                out.push((r, Sense::Ge));
            }
            Face::Support { support, signs } => {
                let (j0, s0) = (support[0], signs[0]);
                for (&j, &s) in support.iter().zip(&signs).skip(1) {
                    out.push((row(&[(j, s), (j0, -s0)]), Sense::Eq));
                }
                out.push((row(&[(j0, s0)]), Sense::Ge));
                for k in (0..p).filter(|k| !support.contains(k)) {
                    out.push((row(&[(k, 1.0), (j0, -s0)]), Sense::Le));
                    out.push((row(&[(k, -1.0), (j0, -s0)]), Sense::Le));
                }
            }
            Face::Active { active, signs } => {
                for k in (0..p).filter(|k| !active.contains(k)) {
                    out.push((row(&[(k, 1.0)]), Sense::Eq));
                }
                for (&j, &s) in active.iter().zip(&signs) {
                    out.push((row(&[(j, s)]), Sense::Ge));
                }
            }
        }
        Ok(out)
    }

    /// Coefficients `l` with `l . a = ||a||_dual` on the whole face, when the
    /// dual norm is linear there.
    pub fn linear_dual_norm(&self, dual: NormKind) -> Result<Option<Vec<f64>>> {
        Ok(match (self.face()?, dual) {
            (Face::Ray(c), _) => {
                let cc: f64 = c.iter().map(|x| x * x).sum();
                let k = norm_of(&c, dual) / cc;
                Some(c.iter().map(|x| k * x).collect())
            }
            (Face::Support { support, signs }, NormKind::Linf) => {
                let mut l = vec![0.0; self.direction.dim()];
                l[support[0]] = signs[0];
                Some(l)
            }
            (Face::Active { active, signs }, NormKind::L1) => {
                let mut l = vec![0.0; self.direction.dim()];
                for (&j, &s) in active.iter().zip(&signs) {
                    l[j] = s;
                }
                Some(l)
            }
            _ => None,
        })
    }
}

/// `a^T x - b + q rho ||a||^*_{norm} = 0` for an RCF output `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualNormEquality {
    pub point: Vector,
    pub radius: f64,
    pub norm: NormKind,
    pub label_sign: f64,
    pub seq: usize,
    /// Linear stand-in for the dual norm, when exact on the subgradient face.
    pub linearized: Option<Vec<f64>>,
}

/// An RCF record kept for later augmentation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcfRecord {
    pub seq: usize,
    pub input: Vector,
    pub output: Vector,
    pub label: Label,
}

/// Constraint set on `z = (a, b)` implied by a query ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyModel {
    pub kind: ModelKind,
    pub dim: usize,
    pub norm1: NormKind,
    pub robustness: Option<RobustnessSpec>,
    pub linear: Vec<LinearConstraint>,
    pub norm_rows: Vec<NormConstraint>,
    pub subgradients: Vec<SubgradientConstraint>,
    pub touching: Vec<DualNormEquality>,
    pub rcf_records: Vec<RcfRecord>,
    pub augmented: bool,
}

impl UncertaintyModel {
    /// Model with no information: every nonzero `(a, b)` is consistent.
    pub fn empty(dim: usize, norm1: NormKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        norm1.validate()?;
        Ok(Self {
            kind: ModelKind::Factual,
            dim,
            norm1,
            robustness: None,
            linear: Vec::new(),
            norm_rows: Vec::new(),
            subgradients: Vec::new(),
            touching: Vec::new(),
            rcf_records: Vec::new(),
            augmented: false,
        })
    }

    /// Whether some touching condition could only be kept as an inequality.
    pub fn relaxed(&self) -> bool {
        self.norm_rows.iter().any(|r| r.relaxed)
    }

    pub fn num_rows(&self) -> usize {
        self.linear.len() + self.norm_rows.len() + self.subgradients.len() + self.touching.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn push_linear(&mut self, x: &Vector, sense: Sense, origin: RowOrigin, seq: usize) {
        let mut coeff = x.as_slice().to_vec();
        coeff.push(-1.0);
        self.linear.push(LinearConstraint { coeff, sense, origin, seq });
    }

    fn push_factual(&mut self, x: &Vector, label: Label, origin: RowOrigin, seq: usize) {
        let sense = match label {
            Label::No => Sense::Le,
            Label::Yes => Sense::Ge,
        };
        self.push_linear(x, sense, origin, seq);
    }
}

/// Builds the constraint set implied by `ledger`.
///
/// CF records contribute a boundary equality and, when their input label is
/// known, a norm ball held on the input's side. RCF records contribute the
/// optimality face and the touching condition, linearized when the dual norm
/// is linear on that face and relaxed to an inequality otherwise.
pub fn model_from_ledger(
    ledger: &QueryLedger,
    norm1: NormKind,
    robustness: Option<RobustnessSpec>,
) -> Result<UncertaintyModel> {
    ledger.validate()?;
    let dim = ledger.dim().ok_or_else(|| Error::InvalidArgument("empty ledger has no dimension".into()))?;
    let mut model = UncertaintyModel::empty(dim, norm1)?;
    if let Some(spec) = robustness {
        spec.validate()?;
    }
    model.robustness = robustness;

    for rec in ledger.records() {
        match rec.kind {
            QueryKind::Factual => {
                let label = rec.label.expect("factual records carry labels");
                model.push_factual(&rec.input, label, RowOrigin::Factual, rec.seq);
            }
            QueryKind::Cf => {
                let out = rec.output_point().expect("validated");
                model.kind = model.kind.max_with(ModelKind::Cf);
                model.push_linear(out, Sense::Eq, RowOrigin::CfBoundary, rec.seq);
                let radius = norm_of(rec.input.sub(out).as_slice(), norm1);
                if let (Some(label), true) = (rec.label, radius > 0.0) {
                    model.norm_rows.push(NormConstraint {
                        point: rec.input.clone(),
                        radius,
                        norm: norm1,
                        side: Side::of(label),
                        seq: rec.seq,
                        touch: Some(out.clone()),
                        relaxed: false,
                    });
                }
            }
            QueryKind::Rcf => {
                let spec = robustness.ok_or(Error::MissingRobustness)?;
                let label = rec.label.ok_or_else(|| {
                    Error::InconsistentLedger(format!("RCF record {} has no factual label for its input", rec.seq))
                })?;
                let out = rec.output_point().expect("validated");
                model.kind = ModelKind::Rcf;
                add_rcf_rows(&mut model, rec.seq, &rec.input, out, label, spec)?;
            }
        }
    }
    Ok(model)
}

impl ModelKind {
    fn max_with(self, other: ModelKind) -> ModelKind {
        let rank = |k: ModelKind| match k {
            ModelKind::Factual => 0,
            ModelKind::Cf => 1,
            ModelKind::Rcf => 2,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

fn add_rcf_rows(
    model: &mut UncertaintyModel,
    seq: usize,
    input: &Vector,
    output: &Vector,
    label: Label,
    spec: RobustnessSpec,
) -> Result<()> {
    let q = label.sign();
    let w = output.sub(input);
    if w.is_zero() {
        return Err(Error::InconsistentLedger(format!("RCF record {seq} returned its own input")));
    }
    let face = SubgradientConstraint { direction: w, norm: model.norm1, sign: -q, seq };
    let linearized = face.linear_dual_norm(spec.norm2.dual())?;
    model.subgradients.push(face);
    match &linearized {
        Some(l) => {
            let mut coeff: Vec<f64> = output.as_slice().iter().zip(l).map(|(x, li)| x + q * spec.rho * li).collect();
            coeff.push(-1.0);
            model.linear.push(LinearConstraint { coeff, sense: Sense::Eq, origin: RowOrigin::TouchingLinearized, seq });
        }
        None => model.norm_rows.push(NormConstraint {
            point: output.clone(),
            radius: spec.rho,
            norm: spec.norm2,
            side: Side::of(label.flip()),
            seq,
            touch: None,
            relaxed: true,
        }),
    }
    model.touching.push(DualNormEquality {
        point: output.clone(),
        radius: spec.rho,
        norm: spec.norm2,
        label_sign: q,
        seq,
        linearized,
    });
    model.rcf_records.push(RcfRecord { seq, input: input.clone(), output: output.clone(), label });
    Ok(())
}

/// Adds the rows implied by robust-counterfactual geometry.
///
/// For each RCF record, the point `x_RCF - rho C v` (with `v` the unit
/// direction from input to output and `C` the norm-equivalence constant)
/// keeps the input's class. When `norm1 == norm2` the point `x_RCF - rho v`
/// lies on the boundary, which also makes any relaxed touching row exact.
/// With `enable_perspective` false the model is returned unchanged.
pub fn augment_rcf_model(model: &UncertaintyModel, enable_perspective: bool) -> Result<UncertaintyModel> {
    if model.kind != ModelKind::Rcf {
        return Err(Error::WrongModelKind { expected: "rcf".into(), got: model.kind.to_string() });
    }
    let mut out = model.clone();
    if !enable_perspective || model.augmented {
        return Ok(out);
    }
    let spec = model.robustness.ok_or(Error::MissingRobustness)?;
    let p = model.dim;
    let c = norm_equivalence_constant(spec.norm2.dual(), model.norm1.dual(), p);
    let same_norm = spec.norm2 == model.norm1;
    for rec in &model.rcf_records {
        let w = rec.output.sub(&rec.input);
        let v = w.scale(1.0 / norm_of(w.as_slice(), model.norm1));
        let x_bar = rec.output.axpy(-spec.rho * c, &v);
        out.push_factual(&x_bar, rec.label, RowOrigin::Perspective, rec.seq);
        if same_norm {
            let x_s = rec.output.axpy(-spec.rho, &v);
            out.push_linear(&x_s, Sense::Eq, RowOrigin::TouchPoint, rec.seq);
            for row in out.norm_rows.iter_mut().filter(|r| r.seq == rec.seq && r.relaxed) {
                row.relaxed = false;
                row.touch = Some(x_s.clone());
            }
        }
    }
    out.augmented = true;
    Ok(out)
}
