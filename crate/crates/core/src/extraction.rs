//! Extraction attacks recovering the hidden hyperplane from CF and RCF queries.
//!
//! Differentiable distances need a single counterfactual: the gradient of the
//! norm at the observed perturbation is parallel to `a`. Polyhedral distances
//! (`l1`, `linf`) need `p + 1` queries: one to find the universal direction,
//! then one per vector of a basis containing it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::norms::{max_abs, norm_gradient_of, norm_of, NormKind, Vector};
use crate::oracle::{classify, Hyperplane, Label, Oracle, QueryKind, RobustnessSpec};

/// Which fallback, if any, the attack took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DegeneratePath {
    #[default]
    None,
    ZeroCf,
    BoundaryFactual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub recovered: Hyperplane,
    pub queries_cf: usize,
    pub queries_rcf: usize,
    pub queries_factual: usize,
    /// Factual queries spent only to orient the classes of a CF recovery.
    pub orientation_queries: usize,
    /// Distance from the hidden hyperplane per [`hyperplanes_equivalent`].
    pub equivalence_residual: f64,
    pub orientation_flipped: bool,
    pub degenerate_path: DegeneratePath,
}

/// How close two hyperplanes are as zero sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    pub equivalent: bool,
    pub residual: f64,
    /// The best match needs a negative scalar, so classes are swapped.
    pub orientation_flipped: bool,
}

fn unit_params(h: &Hyperplane) -> Vec<f64> {
    let z = h.params();
    let n = norm_of(&z, NormKind::L2);
    z.into_iter().map(|v| v / n).collect()
}

pub fn hyperplanes_equivalent(h1: &Hyperplane, h2: &Hyperplane, tol: f64) -> Result<Equivalence> {
    if h1.dim() != h2.dim() {
        return Err(Error::DimensionMismatch { expected: h1.dim(), got: h2.dim() });
    }
    let n1 = unit_params(h1);
    let n2 = unit_params(h2);
    let dist = |s: f64| norm_of(&n1.iter().zip(&n2).map(|(x, y)| x - s * y).collect::<Vec<_>>(), NormKind::L2);
    let (plus, minus) = (dist(1.0), dist(-1.0));
    let residual = plus.min(minus);
    Ok(Equivalence { equivalent: residual <= tol, residual, orientation_flipped: minus < plus })
}

fn normalized(mut a: Vec<f64>, mut b: f64) -> Result<Hyperplane> {
    let n = norm_of(&a, NormKind::L2);
    if n == 0.0 {
        return Err(Error::ZeroWeights);
    }
    let lead = a.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
    let s = lead.signum() / n;
    a.iter_mut().for_each(|v| *v *= s);
    b *= s;
    Hyperplane::new(Vector::new(a)?, b)
}

/// Hyperplane through every point, `||a||_2 = 1` with the first nonzero
/// weight positive.
///
/// With `fixed_b` the offset is pinned and the points only determine `a`.
pub fn solve_hyperplane_from_boundary_points(points: &[Vector], fixed_b: Option<f64>) -> Result<Hyperplane> {
    let p = points.first().ok_or(Error::DegenerateQuerySet { rank: 0, needed: 1 })?.dim();
    for x in points {
        x.check_dim(p)?;
    }
    match fixed_b {
        None => {
            let rows: Vec<Vec<f64>> = points
                .iter()
                .map(|x| x.as_slice().iter().copied().chain([-1.0]).collect())
                .collect();
            let d = linalg::decompose(&rows, p + 1);
            if d.nullspace.len() != 1 {
                return Err(Error::DegenerateQuerySet { rank: d.rank, needed: p });
            }
            let z = &d.nullspace[0];
            normalized(z[..p].to_vec(), z[p])
        }
        Some(0.0) => {
            let rows: Vec<Vec<f64>> = points.iter().map(|x| x.as_slice().to_vec()).collect();
            let d = linalg::decompose(&rows, p);
            if d.nullspace.len() != 1 {
                return Err(Error::DegenerateQuerySet { rank: d.rank, needed: p - 1 });
            }
            normalized(d.nullspace[0].clone(), 0.0)
        }
        Some(b0) => {
            let rows: Vec<Vec<f64>> = points.iter().map(|x| x.as_slice().to_vec()).collect();
            let d = linalg::decompose(&rows, p);
            if d.rank != p {
                return Err(Error::DegenerateQuerySet { rank: d.rank, needed: p });
            }
            let a = d.solve(&vec![b0; rows.len()]);
            normalized(a, b0)
        }
    }
}

fn finish(oracle: &Oracle, mut recovered: Hyperplane, orient_at: Option<(&Vector, Label)>, orientation_queries: usize, path: DegeneratePath) -> Result<ExtractionReport> {
    if let Some((x, label)) = orient_at {
        if classify(&recovered, x)? != label {
            recovered = recovered.scaled(-1.0)?;
        }
    }
    let eq = hyperplanes_equivalent(oracle.hidden(), &recovered, f64::INFINITY)?;
    let ledger = oracle.ledger();
    Ok(ExtractionReport {
        recovered,
        queries_cf: ledger.count(QueryKind::Cf),
        queries_rcf: ledger.count(QueryKind::Rcf),
        queries_factual: ledger.count(QueryKind::Factual),
        orientation_queries,
        equivalence_residual: eq.residual,
        orientation_flipped: eq.orientation_flipped,
        degenerate_path: path,
    })
}

fn require_differentiable(norm1: NormKind) -> Result<()> {
    if !norm1.is_differentiable() {
        return Err(Error::UseNonDifferentiableAttack(format!("norm {norm1} is not differentiable")));
    }
    Ok(())
}

fn require_polyhedral(norm1: NormKind) -> Result<()> {
    if !norm1.is_polyhedral() {
        return Err(Error::RequiresPolyhedralNorm(norm1.to_string()));
    }
    Ok(())
}

/// One CF query plus one orienting factual query under a differentiable norm.
///
/// If `x_f` sits on the boundary the attack moves to `x_f + e^i` until it
/// finds an off-boundary start.
pub fn extract_cf_differentiable(oracle: &mut Oracle, x_f: &Vector) -> Result<ExtractionReport> {
    let norm1 = oracle.norm1();
    require_differentiable(norm1)?;
    x_f.check_dim(oracle.dim())?;
    let p = oracle.dim();
    let mut start = x_f.clone();
    let mut cf = oracle.counterfactual(&start)?;
    let mut path = DegeneratePath::None;
    let mut i = 0;
    while cf == start {
        if i == p {
            return Err(Error::DegenerateQuerySet { rank: 0, needed: 1 });
        }
        path = DegeneratePath::BoundaryFactual;
        start = x_f.add(&Vector::basis(p, i)?);
        cf = oracle.counterfactual(&start)?;
        i += 1;
    }
    let w = cf.sub(&start);
    let a_hat = norm_gradient_of(w.as_slice(), norm1)?;
    let b_hat = crate::norms::dot(&a_hat, cf.as_slice());
    let h = Hyperplane::new(Vector::new(a_hat)?, b_hat)?;
    let label = oracle.factual(&start)?;
    finish(oracle, h, Some((&start, label)), 1, path)
}

/// One factual and one RCF query under a differentiable norm, with the
/// robustness spec known to the attacker.
pub fn extract_rcf_differentiable(oracle: &mut Oracle, x_f: &Vector) -> Result<ExtractionReport> {
    let norm1 = oracle.norm1();
    require_differentiable(norm1)?;
    let spec = oracle.robustness().ok_or(Error::MissingRobustness)?;
    x_f.check_dim(oracle.dim())?;
    let q = oracle.factual(x_f)?.sign();
    let rcf = oracle.robust_counterfactual(x_f)?;
    let w = rcf.sub(x_f);
    // the perturbation points against the factual side, so -q orients a
    let a_hat: Vec<f64> = norm_gradient_of(w.as_slice(), norm1)?.into_iter().map(|g| -q * g).collect();
    let a_vec = Vector::new(a_hat)?;
    let b_hat = a_vec.dot(&rcf) + q * spec.rho * norm_of(a_vec.as_slice(), spec.norm2.dual());
    let h = Hyperplane::new(a_vec, b_hat)?;
    finish(oracle, h, None, 0, DegeneratePath::None)
}

/// Sign `s` such that `w = s ||w||_{norm1} v_hat` is the same optimal
/// perturbation up to the choice of point on the optimal face; `None` when the
/// observation does not pin the sign.
fn face_sign(w: &Vector, v_hat: &Vector, norm1: NormKind) -> Option<f64> {
    let tol = 1e-9;
    let w = w.as_slice();
    let v = v_hat.as_slice();
    let mut sign: Option<f64> = None;
    let mut accept = |s: f64| -> bool {
        match sign {
            None => {
                sign = Some(s);
                true
            }
            Some(prev) => prev == s,
        }
    };
    match norm1 {
        NormKind::L1 => {
            let ws = max_abs(w);
            let vs = max_abs(v);
            for (wj, vj) in w.iter().zip(v) {
                if wj.abs() > tol * ws && vj.abs() > tol * vs && !accept((wj * vj).signum()) {
                    return None;
                }
            }
        }
        NormKind::Linf => {
            let ws = max_abs(w);
            for (wj, vj) in w.iter().zip(v) {
                let saturated = (wj.abs() - ws).abs() <= tol * ws && (vj.abs() - 1.0).abs() <= tol;
                if saturated && !accept((wj * vj).signum()) {
                    return None;
                }
            }
        }
        _ => {
            let s = crate::norms::dot(w, v).signum();
            accept(s);
        }
    }
    sign
}

/// Re-expresses an observed optimal output along the common direction `v_hat`.
fn along_direction(input: &Vector, output: &Vector, v_hat: &Vector, norm1: NormKind) -> Vector {
    let w = output.sub(input);
    if w.is_zero() {
        return output.clone();
    }
    match face_sign(&w, v_hat, norm1) {
        Some(s) => input.axpy(s * norm_of(w.as_slice(), norm1), v_hat),
        None => output.clone(),
    }
}

/// Whether `x` lies on, or within `1e-4` relative of, the line `base + t dir`.
fn on_line(x: &Vector, base: &Vector, dir: &Vector) -> bool {
    let r = x.sub(base);
    let t = r.dot(dir) / dir.dot(dir);
    r.axpy(-t, dir).max_abs() <= 1e-4 * (1.0 + x.max_abs().max(base.max_abs()))
}

fn is_zero_point(x: &Vector, scale: f64) -> bool {
    x.max_abs() <= 1e-12 * scale.max(1.0)
}

/// Algorithm over `e^1, e^2, ...`: the first probe whose CF moves reveals the
/// universal direction, then the CFs of a basis containing that direction are
/// `p` independent boundary points.
pub fn extract_cf_nondifferentiable(oracle: &mut Oracle) -> Result<ExtractionReport> {
    let norm1 = oracle.norm1();
    require_polyhedral(norm1)?;
    let p = oracle.dim();

    let mut boundary: Vec<Vector> = Vec::new();
    let mut found = None;
    for i in 0..p {
        let e = Vector::basis(p, i)?;
        let cf = oracle.counterfactual(&e)?;
        if cf == e {
            boundary.push(e);
        } else {
            found = Some((e, cf));
            break;
        }
    }
    let (probe, probe_cf) = found.ok_or(Error::DegenerateQuerySet { rank: 0, needed: p })?;
    let degenerate_start = !boundary.is_empty();
    let w = probe_cf.sub(&probe);
    let v_hat = w.scale(1.0 / norm_of(w.as_slice(), norm1));
    boundary.push(probe_cf);
    let probe_label = oracle.factual(&probe)?;

    let basis = crate::norms::basis_containing(&v_hat)?;
    for (k, u) in basis.iter().enumerate() {
        if degenerate_start && k > 0 {
            if let Ok(h) = solve_collected(&boundary) {
                return finish(oracle, h.0, Some((&probe, probe_label)), 1, h.1);
            }
        }
        let cf = oracle.counterfactual(u)?;
        boundary.push(along_direction(u, &cf, &v_hat, norm1));
    }
    let (h, path) = solve_collected(&boundary)?;
    finish(oracle, h, Some((&probe, probe_label)), 1, path)
}

/// Solves from collected boundary points, pinning `b = 0` when one of them is
/// the origin.
fn solve_collected(points: &[Vector]) -> Result<(Hyperplane, DegeneratePath)> {
    let scale = points.iter().map(|x| x.max_abs()).fold(0.0, f64::max);
    if points.iter().any(|x| is_zero_point(x, scale)) {
        let rest: Vec<Vector> = points.iter().filter(|x| !is_zero_point(x, scale)).cloned().collect();
        if rest.is_empty() {
            return Err(Error::DegenerateQuerySet { rank: 0, needed: points[0].dim() - 1 });
        }
        return Ok((solve_hyperplane_from_boundary_points(&rest, Some(0.0))?, DegeneratePath::ZeroCf));
    }
    Ok((solve_hyperplane_from_boundary_points(points, None)?, DegeneratePath::None))
}

/// A factual label and the RCF returned for the same input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcfObservation {
    pub input: Vector,
    pub label: Label,
    pub output: Vector,
}

/// A normalized solution of the RCF touching system and whether it
/// satisfies every optimality condition of the observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcfCandidate {
    pub hyperplane: Hyperplane,
    pub consistent: bool,
    pub rejection: Option<String>,
}

/// Solutions of `a^T x_RCF - b + q rho ||a||_{N2}^* = 0` over all observations
/// with `||a||_{N2}^* = 1`, each checked against the labels and the
/// optimality of the observed directions.
pub fn enumerate_rcf_candidates(obs: &[RcfObservation], norm1: NormKind, spec: &RobustnessSpec) -> Result<Vec<RcfCandidate>> {
    let first = obs.first().ok_or(Error::DegenerateQuerySet { rank: 0, needed: 1 })?;
    let p = first.input.dim();
    let dual2 = spec.norm2.dual();
    let rows: Vec<Vec<f64>> = obs
        .iter()
        .map(|o| o.output.as_slice().iter().copied().chain([-1.0]).collect())
        .collect();
    let rhs: Vec<f64> = obs.iter().map(|o| -o.label.sign() * spec.rho).collect();
    let d = linalg::decompose(&rows, p + 1);
    let z0 = d.solve(&rhs);
    let scale = 1.0 + rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if linalg::residual(&rows, &z0, &rhs) > 1e-8 * scale * (1.0 + max_abs(&z0)) {
        return Err(Error::NoConsistentOrientation { candidates: 0 });
    }
    let solutions: Vec<Vec<f64>> = match d.nullspace.len() {
        0 => vec![z0],
        1 => {
            let n = &d.nullspace[0];
            unit_dual_points_on_line(&z0, n, p, dual2).into_iter().map(|t| z0.iter().zip(n).map(|(z, ni)| z + t * ni).collect()).collect()
        }
        k => return Err(Error::DegenerateQuerySet { rank: p + 1 - k, needed: p }),
    };
    let mut out = Vec::new();
    for z in solutions {
        let Ok(h) = Hyperplane::from_parts(&z[..p], z[p]) else { continue };
        let rejection = rcf_rejection(&h, obs, norm1, spec);
        out.push(RcfCandidate { hyperplane: h, consistent: rejection.is_none(), rejection });
    }
    Ok(out)
}

/// Parameters `t` with `||a0 + t n_a||_dual = 1`; `g(t)` is convex, so there
/// are at most two roots around its minimizer.
fn unit_dual_points_on_line(z0: &[f64], n: &[f64], p: usize, dual: NormKind) -> Vec<f64> {
    let a_at = |t: f64| -> Vec<f64> { (0..p).map(|i| z0[i] + t * n[i]).collect() };
    let g = |t: f64| norm_of(&a_at(t), dual);
    let na = norm_of(&n[..p], dual);
    if na == 0.0 {
        return if (g(0.0) - 1.0).abs() < 1e-12 { vec![0.0] } else { vec![] };
    }
    let bound = (1.0 + norm_of(&z0[..p], dual)) / na + 1.0;
    // golden-section search for the minimizer
    let (mut lo, mut hi) = (-bound, bound);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - r * (hi - lo);
        let m2 = lo + r * (hi - lo);
        if g(m1) <= g(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let tmin = 0.5 * (lo + hi);
    let gmin = g(tmin);
    if gmin > 1.0 + 1e-12 {
        return vec![];
    }
    if gmin >= 1.0 - 1e-12 {
        return vec![tmin];
    }
    let root = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if g(mid) <= 1.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        // pick whichever endpoint lands closer to the unit level
        if (g(inside) - 1.0).abs() <= (g(outside) - 1.0).abs() {
            inside
        } else {
            outside
        }
    };
    vec![root(tmin, -bound), root(tmin, bound)]
}

/// Reason a candidate violates the RCF optimality conditions, if any.
fn rcf_rejection(h: &Hyperplane, obs: &[RcfObservation], norm1: NormKind, spec: &RobustnessSpec) -> Option<String> {
    let a = h.a().as_slice();
    let a_n1 = norm_of(a, norm1.dual());
    let a_n2 = norm_of(a, spec.norm2.dual());
    let hscale = max_abs(a).max(h.b().abs());
    for (i, o) in obs.iter().enumerate() {
        let q = o.label.sign();
        let xs = 1.0 + o.input.max_abs().max(o.output.max_abs());
        let tol = 1e-8 * hscale * xs;
        let margin = h.a().dot(&o.input) - h.b();
        if q * margin < -tol {
            return Some(format!("observation {i}: factual label {} contradicted (margin {margin:.6e})", q as i8));
        }
        let touch = h.a().dot(&o.output) - h.b() + q * spec.rho * a_n2;
        if touch.abs() > tol {
            return Some(format!("observation {i}: touching residual {touch:.3e}"));
        }
        let w = o.output.sub(&o.input);
        let wn = norm_of(w.as_slice(), norm1);
        let along = -q * h.a().dot(&w);
        if along < a_n1 * wn * (1.0 - 1e-9) - tol {
            return Some(format!("observation {i}: direction not optimal ({along:.6e} < {:.6e})", a_n1 * wn));
        }
    }
    None
}

fn select_candidate(candidates: Vec<RcfCandidate>) -> Result<Hyperplane> {
    let total = candidates.len();
    let mut kept: Vec<Hyperplane> = Vec::new();
    for c in candidates.into_iter().filter(|c| c.consistent) {
        let dup = kept.iter().any(|k| {
            hyperplanes_equivalent(k, &c.hyperplane, 1e-8).is_ok_and(|e| e.equivalent && !e.orientation_flipped)
        });
        if !dup {
            kept.push(c.hyperplane);
        }
    }
    match kept.len() {
        0 => Err(Error::NoConsistentOrientation { candidates: total }),
        1 => Ok(kept.pop().expect("one element")),
        n => Err(Error::AmbiguousRecovery(n)),
    }
}

/// The probe schedule of the CF attack with each CF query replaced by a
/// factual query followed by an RCF query.
pub fn extract_rcf_nondifferentiable(oracle: &mut Oracle) -> Result<ExtractionReport> {
    let norm1 = oracle.norm1();
    require_polyhedral(norm1)?;
    let spec = oracle.robustness().ok_or(Error::MissingRobustness)?;
    let p = oracle.dim();

    let observe = |oracle: &mut Oracle, x: &Vector| -> Result<RcfObservation> {
        let label = oracle.factual(x)?;
        let output = oracle.robust_counterfactual(x)?;
        Ok(RcfObservation { input: x.clone(), label, output })
    };

    // an RCF always moves its input, so the first probe fixes the direction
    let probe = Vector::basis(p, 0)?;
    let first = observe(oracle, &probe)?;
    let w = first.output.sub(&first.input);
    let v_hat = w.scale(1.0 / norm_of(w.as_slice(), norm1));
    let first_output = first.output.clone();
    let mut obs = vec![first];
    for u in crate::norms::basis_containing(&v_hat)? {
        // inputs on or near the probe's line along v_hat repeat its
        // observation; the probe's own RCF has the other label instead
        let u = if on_line(&u, &probe, &v_hat) { first_output.clone() } else { u };
        let mut o = observe(oracle, &u)?;
        o.output = along_direction(&o.input, &o.output, &v_hat, norm1);
        obs.push(o);
    }
    let scale = obs.iter().map(|o| o.output.max_abs()).fold(0.0, f64::max);
    let path = if obs.iter().any(|o| is_zero_point(&o.output, scale)) { DegeneratePath::ZeroCf } else { DegeneratePath::None };
    let h = select_candidate(enumerate_rcf_candidates(&obs, norm1, &spec)?)?;
    finish(oracle, h, None, 0, path)
}

/// Fraction of `points` classified identically by `h1` and `h2`.
pub fn classify_agreement(h1: &Hyperplane, h2: &Hyperplane, points: &[Vector]) -> Result<f64> {
    if points.is_empty() {
        return Ok(1.0);
    }
    let mut agree = 0usize;
    for x in points {
        if classify(h1, x)? == classify(h2, x)? {
            agree += 1;
        }
    }
    Ok(agree as f64 / points.len() as f64)
}
