use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::extraction::{
    enumerate_rcf_candidates, extract_cf_nondifferentiable, extract_rcf_nondifferentiable,
    solve_hyperplane_from_boundary_points, RcfCandidate, RcfObservation,
};
use crate::norms::{dual_maximizer, norm_eval, NormKind, Vector};
use crate::oracle::{boundary_distance, Hyperplane, Label, Oracle, RobustnessSpec, TieBreakPolicy};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub text: String,
    pub cf_outputs: Vec<Vector>,
    pub cf_recovered: Hyperplane,
    pub cf_algorithm_queries: usize,
    pub rcf_outputs: Vec<Vector>,
    pub rcf_candidates: Vec<RcfCandidate>,
    pub rcf_recovered: Hyperplane,
    pub rcf_algorithm_queries: (usize, usize),
}

fn num(v: f64) -> String {
    let s = format!("{:.12}", v + 0.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn vec_str(v: &[f64]) -> String {
    format!("({})", v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", "))
}

/// `(a, b)` rescaled so the first weight equals `lead`.
fn scaled_params(h: &Hyperplane, lead: f64) -> Vec<f64> {
    let z = h.params();
    let s = lead / z[0];
    z.into_iter().map(|v| v * s).collect()
}

fn label_str(l: Label) -> &'static str {
    match l {
        Label::Yes => "yes",
        Label::No => "no",
    }
}

/// Replays the two worked 2D examples and reports every intermediate value.
pub fn run_demo() -> Result<DemoReport> {
    let hidden = Hyperplane::from_parts(&[2.0, -1.0], 3.0)?;
    let inputs = [Vector::from_slice(&[3.0, 0.0])?, Vector::from_slice(&[-1.0, 1.0])?];
    let mut t = String::new();

    let norm1 = NormKind::Linf;
    let _ = writeln!(t, "counterfactual example: a = {}, b = {}, norm1 = {norm1}", vec_str(hidden.a().as_slice()), num(hidden.b()));
    let mut oracle = Oracle::new(hidden.clone(), norm1, TieBreakPolicy::Vertex)?;
    let v = dual_maximizer(hidden.a(), norm1)?;
    let dn = norm_eval(hidden.a(), norm1.dual());
    let mut cf_outputs = Vec::new();
    for x in &inputs {
        let label = oracle.factual(x)?;
        let d = boundary_distance(&hidden, x, norm1)?;
        let cf = oracle.counterfactual(x)?;
        let _ = writeln!(
            t,
            "  x = {}: label {}, a^T x - b = {}, ||a||^* = {}, d = {}, v = {}, x_CF = {}",
            vec_str(x.as_slice()),
            label_str(label),
            num(hidden.margin(x)?),
            num(dn),
            num(d),
            vec_str(v.as_slice()),
            vec_str(cf.as_slice())
        );
        cf_outputs.push(cf);
    }
    for cf in &cf_outputs {
        let mut row = cf.as_slice().to_vec();
        row.push(-1.0);
        let _ = writeln!(t, "  system row [x_CF, -1] = {}", vec_str(&row));
    }
    let cf_recovered = solve_hyperplane_from_boundary_points(&cf_outputs, None)?;
    let _ = writeln!(
        t,
        "  solution (a, b) = {}, rescaled to a_1 = 2: {}",
        vec_str(&cf_recovered.params()),
        vec_str(&scaled_params(&cf_recovered, 2.0))
    );
    let mut algo = Oracle::new(hidden.clone(), norm1, TieBreakPolicy::Vertex)?;
    let r = extract_cf_nondifferentiable(&mut algo)?;
    let cf_queries = r.queries_cf;
    let _ = writeln!(
        t,
        "  basis algorithm: {} CF queries, recovered {}, residual {:.3e}",
        r.queries_cf,
        vec_str(&scaled_params(&r.recovered, 2.0)),
        r.equivalence_residual
    );

    let spec = RobustnessSpec::new(NormKind::L1, 1.0)?;
    let _ = writeln!(t, "robust counterfactual example: norm1 = {norm1}, norm2 = {}, rho = {}", spec.norm2, num(spec.rho));
    let mut oracle = Oracle::new(hidden.clone(), norm1, TieBreakPolicy::Vertex)?.with_robustness(spec)?;
    let dn2 = norm_eval(hidden.a(), spec.norm2.dual());
    let mut obs = Vec::new();
    let mut rcf_outputs = Vec::new();
    for x in &inputs {
        let label = oracle.factual(x)?;
        let q = label.sign();
        let d = (hidden.b() - hidden.a().dot(x) - q * spec.rho * dn2) / dn;
        let out = oracle.robust_counterfactual(x)?;
        let _ = writeln!(
            t,
            "  x = {}: label {}, ||a||_norm2^* = {}, d = {}, v = {}, x_RCF = {}",
            vec_str(x.as_slice()),
            label_str(label),
            num(dn2),
            num(d),
            vec_str(v.as_slice()),
            vec_str(out.as_slice())
        );
        obs.push(RcfObservation { input: x.clone(), label, output: out.clone() });
        rcf_outputs.push(out);
    }
    let candidates = enumerate_rcf_candidates(&obs, norm1, &spec)?;
    for c in &candidates {
        let status = match &c.rejection {
            None if c.consistent => "kept".to_string(),
            None => "rejected".to_string(),
            Some(why) => format!("rejected: {why}"),
        };
        let _ = writeln!(t, "  candidate (a, b) = {}: {status}", vec_str(&c.hyperplane.params()));
    }
    let rcf_recovered = candidates
        .iter()
        .find(|c| c.consistent)
        .map(|c| c.hyperplane.clone())
        .ok_or(crate::Error::NoConsistentOrientation { candidates: candidates.len() })?;
    let _ = writeln!(t, "  final (a, b) rescaled to a_1 = 1: {}", vec_str(&scaled_params(&rcf_recovered, 1.0)));
    let mut algo = Oracle::new(hidden, norm1, TieBreakPolicy::Vertex)?.with_robustness(spec)?;
    let r = extract_rcf_nondifferentiable(&mut algo)?;
    let _ = writeln!(
        t,
        "  basis algorithm: {} RCF + {} factual queries, recovered {}, residual {:.3e}",
        r.queries_rcf,
        r.queries_factual,
        vec_str(&scaled_params(&r.recovered, 1.0)),
        r.equivalence_residual
    );

    Ok(DemoReport {
        text: t,
        cf_outputs,
        cf_recovered,
        cf_algorithm_queries: cf_queries,
        rcf_outputs,
        rcf_candidates: candidates,
        rcf_recovered,
        rcf_algorithm_queries: (r.queries_rcf, r.queries_factual),
    })
}
