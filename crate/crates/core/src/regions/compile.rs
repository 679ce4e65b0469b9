use serde::Serialize;

use super::model::{Sense, Side, SubgradientConstraint, UncertaintyModel};
use crate::error::Result;
use crate::norms::{norm_of, NormKind, Vector};
use crate::solver::{Affine, ConicProgram, Row};

/// `a^T point - b (+/-) radius ||a||_dual` held on `side`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConicRow {
    pub point: Vector,
    pub radius: f64,
    pub dual: NormKind,
    pub side: Side,
}

impl ConicRow {
    pub fn violation(&self, z: &[f64]) -> f64 {
        let p = self.point.dim();
        let margin = crate::norms::dot(&z[..p], self.point.as_slice()) - z[p];
        let dn = norm_of(&z[..p], self.dual);
        match self.side {
            Side::No => margin + self.radius * dn,
            Side::Yes => self.radius * dn - margin,
        }
    }
}

/// A model lowered to linear rows plus dual-norm rows over `z = (a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Compiled {
    pub dim: usize,
    pub linear: Vec<(Vec<f64>, Sense)>,
    pub conic: Vec<ConicRow>,
}

impl Compiled {
    /// Lowers `model`. With `tangent_presolve`, a ball known to touch a
    /// boundary equality is replaced by the equivalent subgradient face.
    pub fn new(model: &UncertaintyModel, tangent_presolve: bool) -> Result<Self> {
        let mut linear: Vec<(Vec<f64>, Sense)> = model.linear.iter().map(|r| (r.coeff.clone(), r.sense)).collect();
        for s in &model.subgradients {
            linear.extend(s.rows()?);
        }
        let mut conic = Vec::new();
        for row in &model.norm_rows {
            if tangent_presolve {
                if let Some(t) = &row.touch {
                    let w = t.sub(&row.point);
                    let dist = norm_of(w.as_slice(), row.norm);
                    if !w.is_zero() && (dist - row.radius).abs() <= 1e-9 * row.radius.max(1.0) {
                        let sign = match row.side {
                            Side::No => 1.0,
                            Side::Yes => -1.0,
                        };
                        let face = SubgradientConstraint { direction: w, norm: row.norm, sign, seq: row.seq };
                        linear.extend(face.rows()?);
                        continue;
                    }
                }
            }
            conic.push(ConicRow { point: row.point.clone(), radius: row.radius, dual: row.norm.dual(), side: row.side });
        }
        Ok(Self { dim: model.dim, linear, conic })
    }

    pub fn is_linear(&self) -> bool {
        self.conic.iter().all(|r| r.dual.is_polyhedral())
    }

    /// Equality rows, used to restrict sampling to the model's span.
    pub fn equalities(&self) -> Vec<Vec<f64>> {
        self.linear.iter().filter(|(_, s)| *s == Sense::Eq).map(|(c, _)| c.clone()).collect()
    }

    /// Largest violation of any row at `z`, each row scaled by its size.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (c, s) in &self.linear {
            let v = crate::norms::dot(c, z) / (1.0 + crate::norms::max_abs(c));
            let viol = match s {
                Sense::Le => v,
                Sense::Ge => -v,
                Sense::Eq => v.abs(),
            };
            worst = worst.max(viol);
        }
        for r in &self.conic {
            let scale = 1.0 + r.point.max_abs() + r.radius;
            worst = worst.max(r.violation(z) / scale);
        }
        worst
    }

    /// Program over `z` (variables `0..=dim`) in the box `|z_i| <= 1`, with
    /// all rows and no objective.
    pub fn program(&self) -> ConicProgram {
        let n = self.dim + 1;
        let mut prog = ConicProgram::new(n);
        for i in 0..n {
            prog.add_le(vec![(i, 1.0)], 1.0);
            prog.add_ge(vec![(i, 1.0)], -1.0);
        }
        for (c, s) in &self.linear {
            let row: Row = sparse(c);
            match s {
                Sense::Le => prog.add_le(row, 0.0),
                Sense::Ge => prog.add_ge(row, 0.0),
                Sense::Eq => prog.add_eq(row, 0.0),
            }
        }
        for r in &self.conic {
            let u = add_norm_epigraph(&mut prog, &(0..self.dim).map(Affine::var).collect::<Vec<_>>(), r.dual);
            let mut row: Row = sparse(r.point.as_slice());
            row.push((self.dim, -1.0));
            match r.side {
                Side::No => {
                    row.push((u, r.radius));
                    prog.add_le(row, 0.0);
                }
                Side::Yes => {
                    row.push((u, -r.radius));
                    prog.add_ge(row, 0.0);
                }
            }
        }
        prog
    }
}

pub(crate) fn sparse(c: &[f64]) -> Row {
    c.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect()
}

/// New variable `u` with `u >= ||exprs||_norm`.
pub(crate) fn add_norm_epigraph(prog: &mut ConicProgram, exprs: &[Affine], norm: NormKind) -> usize {
    let u = prog.add_var();
    add_norm_bound(prog, exprs, norm, Affine::var(u));
    u
}

/// `||exprs||_norm <= bound`.
pub(crate) fn add_norm_bound(prog: &mut ConicProgram, exprs: &[Affine], norm: NormKind, bound: Affine) {
    let le = |prog: &mut ConicProgram, lhs: &Affine, rhs: &Affine, neg: bool| {
        // (+/-) lhs - rhs <= 0
        let s = if neg { -1.0 } else { 1.0 };
        let mut row: Row = lhs.row.iter().map(|(i, c)| (*i, s * c)).collect();
        row.extend(rhs.row.iter().map(|(i, c)| (*i, -c)));
        prog.add_le(row, rhs.constant - s * lhs.constant);
    };
    match norm {
        NormKind::Linf => {
            for e in exprs {
                le(prog, e, &bound, false);
                le(prog, e, &bound, true);
            }
        }
        NormKind::L1 => {
            let mut sum = Affine::default();
            for e in exprs {
                let s = prog.add_var();
                le(prog, e, &Affine::var(s), false);
                le(prog, e, &Affine::var(s), true);
                sum.row.push((s, 1.0));
            }
            le(prog, &sum, &bound, false);
        }
        NormKind::L2 => {
            let mut cone = vec![bound];
            cone.extend(exprs.iter().cloned());
            prog.add_second_order(cone);
        }
        NormKind::Lp(q) => {
            // r_i >= |e_i|^q / bound^(q-1), sum r_i <= bound
            let mut sum = Affine::default();
            for e in exprs {
                let r = prog.add_var();
                prog.add_power(Affine::var(r), bound.clone(), e.clone(), 1.0 / q);
                sum.row.push((r, 1.0));
            }
            le(prog, &sum, &bound, false);
        }
    }
}
