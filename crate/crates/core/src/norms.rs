//! Norms, dual norms and the geometry built on them.
//!
//! Every `l_p` family member used by the oracles and attacks lives here:
//! evaluation, the dual norm, a maximizer of `a^T v` over the unit ball
//! (the universal counterfactual direction), gradients for the smooth
//! members, subdifferential membership and basis completion.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::{Tolerance, GRAM_SCHMIDT_SKIP};

/// A finite point of `R^p`, `p >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = components.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(components))
    }

    pub fn from_slice(components: &[f64]) -> Result<Self> {
        Self::new(components.to_vec())
    }

    /// Internal constructor for values produced by finite arithmetic on
    /// already validated vectors.
    pub(crate) fn from_raw(components: Vec<f64>) -> Self {
        debug_assert!(!components.is_empty());
        Self(components)
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    /// The standard basis vector `e^index` (zero based) of `R^dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range for dimension {dim}")));
        }
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Self::new(v)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch { expected, got: self.dim() });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector::from_raw(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector::from_raw(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector::from_raw(self.0.iter().map(|a| a * s).collect())
    }

    /// `self + s * dir`.
    pub fn axpy(&self, s: f64, dir: &Vector) -> Vector {
        Vector::from_raw(self.0.iter().zip(&dir.0).map(|(a, d)| a + s * d).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Distance family of `l_p` norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L1,
    L2,
    /// Finite exponent strictly greater than one.
    Lp(f64),
    Linf,
}

impl NormKind {
    /// `l_q` for a finite `q > 1`; `q = 2` collapses to [`NormKind::L2`].
    pub fn lp(q: f64) -> Result<Self> {
        if !q.is_finite() || q <= 1.0 {
            return Err(Error::InvalidExponent(q));
        }
        if q == 2.0 {
            Ok(NormKind::L2)
        } else {
            Ok(NormKind::Lp(q))
        }
    }

    pub fn exponent(&self) -> f64 {
        match self {
            NormKind::L1 => 1.0,
            NormKind::L2 => 2.0,
            NormKind::Lp(q) => *q,
            NormKind::Linf => f64::INFINITY,
        }
    }

    /// Reciprocal exponent `1/q`, with `1/inf = 0`.
    pub fn inverse_exponent(&self) -> f64 {
        match self {
            NormKind::Linf => 0.0,
            k => 1.0 / k.exponent(),
        }
    }

    pub fn dual(&self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::Linf,
            NormKind::Linf => NormKind::L1,
            NormKind::L2 => NormKind::L2,
            NormKind::Lp(q) => {
                let conj = q / (q - 1.0);
                if conj == 2.0 {
                    NormKind::L2
                } else {
                    NormKind::Lp(conj)
                }
            }
        }
    }

    pub fn is_differentiable(&self) -> bool {
        matches!(self, NormKind::L2 | NormKind::Lp(_))
    }

    /// `l1` and `linf` have polyhedral unit balls.
    pub fn is_polyhedral(&self) -> bool {
        !self.is_differentiable()
    }

    pub fn validate(&self) -> Result<()> {
        if let NormKind::Lp(q) = self {
            if !q.is_finite() || *q <= 1.0 {
                return Err(Error::InvalidExponent(*q));
            }
        }
        Ok(())
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::L1 => write!(f, "l1"),
            NormKind::L2 => write!(f, "l2"),
            NormKind::Lp(q) => write!(f, "l{q}"),
            NormKind::Linf => write!(f, "linf"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NormRepr {
    Name(String),
    Lp { lp: f64 },
}

impl Serialize for NormKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormKind::Lp(q) => NormRepr::Lp { lp: *q }.serialize(s),
            k => NormRepr::Name(k.to_string()).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for NormKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match NormRepr::deserialize(d)? {
            NormRepr::Name(n) => match n.to_ascii_lowercase().as_str() {
                "l1" => Ok(NormKind::L1),
                "l2" => Ok(NormKind::L2),
                "linf" | "inf" => Ok(NormKind::Linf),
                other => {
                    let q: f64 = other
                        .strip_prefix('l')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| D::Error::custom(format!("unknown norm {other}")))?;
                    NormKind::lp(q).map_err(D::Error::custom)
                }
            },
            NormRepr::Lp { lp } => NormKind::lp(lp).map_err(D::Error::custom),
        }
    }
}

pub(crate) fn norm_of(x: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::L1 => x.iter().map(|v| v.abs()).sum(),
        NormKind::L2 => {
            let m = max_abs(x);
            if m == 0.0 {
                return 0.0;
            }
            m * x.iter().map(|v| (v / m).powi(2)).sum::<f64>().sqrt()
        }
        NormKind::Lp(q) => {
            let m = max_abs(x);
            if m == 0.0 {
                return 0.0;
            }
            m * x.iter().map(|v| (v.abs() / m).powf(q)).sum::<f64>().powf(1.0 / q)
        }
        NormKind::Linf => max_abs(x),
    }
}

pub fn norm_eval(x: &Vector, kind: NormKind) -> f64 {
    norm_of(x.as_slice(), kind)
}

/// `||a||_kind^* = max_{||v||_kind <= 1} a^T v`, evaluated as the dual norm.
pub fn dual_norm_eval(a: &Vector, kind: NormKind) -> f64 {
    norm_of(a.as_slice(), kind.dual())
}

#[inline]
fn sgn_plus(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub(crate) fn dual_maximizer_of(a: &[f64], kind: NormKind) -> Result<Vec<f64>> {
    let m = max_abs(a);
    if m == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let v = match kind {
        NormKind::L1 => {
            // lowest index among the maximal magnitudes
            let j0 = a.iter().position(|v| v.abs() == m).expect("max exists");
            let mut v = vec![0.0; a.len()];
            v[j0] = sgn_plus(a[j0]);
            v
        }
        NormKind::Linf => a.iter().map(|&x| sgn_plus(x)).collect(),
        NormKind::L2 => {
            let n = norm_of(a, NormKind::L2);
            a.iter().map(|x| x / n).collect()
        }
        NormKind::Lp(q) => {
            let r: Vec<f64> = a
                .iter()
                .map(|x| x.signum() * (x.abs() / m).powf(1.0 / (q - 1.0)))
                .collect();
            let n = norm_of(&r, kind);
            r.into_iter().map(|x| x / n).collect()
        }
    };
    Ok(v)
}

/// A unit-ball point `v` with `a^T v = ||a||_kind^*`.
///
/// `l1` returns the signed axis of the lowest-index largest `|a_j|`;
/// `linf` returns the sign vector with `sgn(0) = +1`.
pub fn dual_maximizer(a: &Vector, kind: NormKind) -> Result<Vector> {
    dual_maximizer_of(a.as_slice(), kind).map(Vector::from_raw)
}

pub(crate) fn norm_gradient_of(x: &[f64], kind: NormKind) -> Result<Vec<f64>> {
    if !kind.is_differentiable() {
        return Err(Error::NotDifferentiable(kind.to_string()));
    }
    let n = norm_of(x, kind);
    if n == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    Ok(match kind {
        NormKind::L2 => x.iter().map(|v| v / n).collect(),
        NormKind::Lp(q) => x.iter().map(|v| v.signum() * (v.abs() / n).powf(q - 1.0)).collect(),
        _ => unreachable!(),
    })
}

pub fn norm_gradient(x: &Vector, kind: NormKind) -> Result<Vector> {
    norm_gradient_of(x.as_slice(), kind).map(Vector::from_raw)
}

/// Whether `g` lies in the subdifferential of `||.||_kind` at `x != 0`,
/// i.e. `g^T x = ||x||` and `||g||^* <= 1`.
pub fn subdiff_contains(x: &Vector, g: &Vector, kind: NormKind, tol: Tolerance) -> bool {
    if x.dim() != g.dim() {
        return false;
    }
    let nx = norm_eval(x, kind);
    let aligned = (g.dot(x) - nx).abs() <= tol.bound(nx);
    let inside = dual_norm_eval(g, kind) <= 1.0 + tol.bound(1.0);
    aligned && inside
}

/// `p` linearly independent vectors whose first element is exactly `v`.
///
/// The rest come from Gram-Schmidt over `e^1, ..., e^p`; near-dependent
/// candidates are skipped.
pub fn basis_containing(v: &Vector) -> Result<Vec<Vector>> {
    let p = v.dim();
    let n = norm_of(v.as_slice(), NormKind::L2);
    if n == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let mut ortho: Vec<Vec<f64>> = vec![v.as_slice().iter().map(|x| x / n).collect()];
    let mut out = vec![v.clone()];
    for k in 0..p {
        if out.len() == p {
            break;
        }
        let mut r = vec![0.0; p];
        r[k] = 1.0;
        // two passes keep the residual orthogonal in floating point
        for _ in 0..2 {
            for q in &ortho {
                let c = dot(q, &r);
                r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= c * qi);
            }
        }
        let rn = norm_of(&r, NormKind::L2);
        if rn < GRAM_SCHMIDT_SKIP {
            continue;
        }
        r.iter_mut().for_each(|x| *x /= rn);
        ortho.push(r.clone());
        out.push(Vector::from_raw(r));
    }
    debug_assert_eq!(out.len(), p);
    Ok(out)
}

/// Smallest `C` with `||x||_upper <= C ||x||_lower` on `R^p`.
pub fn norm_equivalence_constant(upper: NormKind, lower: NormKind, p: usize) -> f64 {
    let gap = lower.inverse_exponent() - upper.inverse_exponent();
    // ||x||_r <= p^(1/r - 1/s) ||x||_s when r < s, and ||x||_r <= ||x||_s otherwise
    let exp = (-gap).max(0.0);
    (p as f64).powf(exp)
}
