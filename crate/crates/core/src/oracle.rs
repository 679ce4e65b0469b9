//! The hidden linear classifier and its query surface.
//!
//! Counterfactuals and robust counterfactuals are computed in closed form
//! as `x + d v`, where `v` maximizes `a^T v` over the norm-1 unit ball.
//! When that maximizer is not unique a [`TieBreakPolicy`] picks the point
//! of the optimal face. Every query is appended to a [`QueryLedger`].

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{dual_maximizer_of, max_abs, norm_of, NormKind, Vector};

/// Classifier `h(x) = +1` iff `a^T x - b >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HyperplaneRepr", into = "HyperplaneRepr")]
pub struct Hyperplane {
    a: Vector,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct HyperplaneRepr {
    a: Vec<f64>,
    b: f64,
}

impl TryFrom<HyperplaneRepr> for Hyperplane {
    type Error = Error;
    fn try_from(r: HyperplaneRepr) -> Result<Self> {
        Hyperplane::new(Vector::new(r.a)?, r.b)
    }
}

impl From<Hyperplane> for HyperplaneRepr {
    fn from(h: Hyperplane) -> Self {
        HyperplaneRepr { a: h.a.into_inner(), b: h.b }
    }
}

impl Hyperplane {
    pub fn new(a: Vector, b: f64) -> Result<Self> {
        if a.is_zero() {
            return Err(Error::ZeroWeights);
        }
        if !b.is_finite() {
            return Err(Error::NonFinite { index: a.dim(), value: b });
        }
        Ok(Self { a, b })
    }

    pub fn from_parts(a: &[f64], b: f64) -> Result<Self> {
        Self::new(Vector::from_slice(a)?, b)
    }

    pub fn a(&self) -> &Vector {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Signed value `a^T x - b`.
    pub fn margin(&self, x: &Vector) -> Result<f64> {
        x.check_dim(self.dim())?;
        Ok(self.a.dot(x) - self.b)
    }

    /// `(lambda a, lambda b)`; the zero set is unchanged for `lambda != 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.a.scale(lambda), self.b * lambda)
    }

    /// The stacked parameter vector `(a, b)`.
    pub fn params(&self) -> Vec<f64> {
        let mut z = self.a.as_slice().to_vec();
        z.push(self.b);
        z
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("hyperplane serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Robustness ball `S = { s : ||s||_{norm2} <= rho }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSpec {
    pub norm2: NormKind,
    pub rho: f64,
}

impl RobustnessSpec {
    pub fn new(norm2: NormKind, rho: f64) -> Result<Self> {
        let s = Self { norm2, rho };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.norm2.validate()?;
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidRadius(self.rho));
        }
        Ok(())
    }
}

/// Which optimal counterfactual the oracle reports when the optimal set is a face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakPolicy {
    #[default]
    Vertex,
    FaceInterior(f64),
    Seeded(u64),
}

impl TieBreakPolicy {
    pub fn validate(&self) -> Result<()> {
        if let TieBreakPolicy::FaceInterior(theta) = self {
            if !(*theta > 0.0 && *theta < 1.0) {
                return Err(Error::InvalidTheta(*theta));
            }
        }
        Ok(())
    }
}

/// Binary class label; `Yes` is `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    No,
    Yes,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Yes => 1.0,
            Label::No => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Yes => Label::No,
            Label::No => Label::Yes,
        }
    }

    fn from_margin(m: f64) -> Self {
        if m >= 0.0 {
            Label::Yes
        } else {
            Label::No
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign() as i8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Label::Yes),
            -1 => Ok(Label::No),
            other => Err(serde::de::Error::custom(format!("label must be -1 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Factual,
    Cf,
    Rcf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryOutput {
    Label(Label),
    Point(Vector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub seq: usize,
    pub kind: QueryKind,
    pub input: Vector,
    pub output: QueryOutput,
    /// Factual label at `input`, when an earlier factual query observed it.
    pub label: Option<Label>,
}

impl QueryRecord {
    pub fn output_point(&self) -> Option<&Vector> {
        match &self.output {
            QueryOutput::Point(v) => Some(v),
            QueryOutput::Label(_) => None,
        }
    }
}

fn point_key(x: &Vector) -> Vec<u64> {
    x.as_slice().iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Ordered record of every query made against an oracle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryLedger {
    records: Vec<QueryRecord>,
    known_labels: HashMap<Vec<u64>, Label>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, kind: QueryKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    /// Label observed by a factual query at exactly `x`, if any.
    pub fn known_label(&self, x: &Vector) -> Option<Label> {
        self.known_labels.get(&point_key(x)).copied()
    }

    pub fn record_factual(&mut self, x: Vector, label: Label) {
        self.known_labels.entry(point_key(&x)).or_insert(label);
        let seq = self.records.len();
        self.records.push(QueryRecord { seq, kind: QueryKind::Factual, input: x, output: QueryOutput::Label(label), label: Some(label) });
    }

    /// Appends a CF or RCF record, copying the factual label at `input` if known.
    pub fn record_point(&mut self, kind: QueryKind, input: Vector, output: Vector) {
        debug_assert!(kind != QueryKind::Factual);
        let label = self.known_label(&input);
        let seq = self.records.len();
        self.records.push(QueryRecord { seq, kind, input, output: QueryOutput::Point(output), label });
    }

    /// Appends a record read from an external source, keeping its sequence order.
    pub fn push_record(&mut self, mut rec: QueryRecord) -> Result<()> {
        rec.seq = self.records.len();
        match (&rec.kind, &rec.output) {
            (QueryKind::Factual, QueryOutput::Label(l)) => {
                if rec.label.is_some_and(|r| r != *l) {
                    return Err(Error::InconsistentLedger(format!("record {} has mismatched label fields", rec.seq)));
                }
                rec.label = Some(*l);
                self.known_labels.entry(point_key(&rec.input)).or_insert(*l);
            }
            (QueryKind::Factual, QueryOutput::Point(_)) => {
                return Err(Error::InconsistentLedger(format!("factual record {} has a point output", rec.seq)));
            }
            (_, QueryOutput::Label(_)) => {
                return Err(Error::InconsistentLedger(format!("record {} must have a point output", rec.seq)));
            }
            (_, QueryOutput::Point(p)) => {
                if p.dim() != rec.input.dim() {
                    return Err(Error::DimensionMismatch { expected: rec.input.dim(), got: p.dim() });
                }
                if rec.label.is_none() {
                    rec.label = self.known_label(&rec.input);
                }
            }
        }
        self.records.push(rec);
        Ok(())
    }

    /// Rejects ledgers whose records disagree about the label of a point or
    /// mix dimensions.
    pub fn validate(&self) -> Result<()> {
        let mut seen: HashMap<Vec<u64>, Label> = HashMap::new();
        let dim = self.records.first().map(|r| r.input.dim());
        for r in &self.records {
            if Some(r.input.dim()) != dim {
                return Err(Error::DimensionMismatch { expected: dim.unwrap_or(0), got: r.input.dim() });
            }
            if let Some(l) = r.label {
                let prev = *seen.entry(point_key(&r.input)).or_insert(l);
                if prev != l {
                    return Err(Error::InconsistentLedger(format!("point {:?} labeled both ways", r.input.as_slice())));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.input.dim())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut ledger = QueryLedger::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            ledger.push_record(serde_json::from_str(&line)?)?;
        }
        ledger.validate()?;
        Ok(ledger)
    }

    pub fn from_jsonl(s: &str) -> Result<Self> {
        Self::read_jsonl(s.as_bytes())
    }
}

pub fn classify(h: &Hyperplane, x: &Vector) -> Result<Label> {
    Ok(Label::from_margin(h.margin(x)?))
}

pub fn factual_query(h: &Hyperplane, x: &Vector, ledger: &mut QueryLedger) -> Result<Label> {
    let l = classify(h, x)?;
    ledger.record_factual(x.clone(), l);
    Ok(l)
}

/// Signed `d = (b - a^T x) / ||a||_{norm1}^*`.
pub fn boundary_distance(h: &Hyperplane, x: &Vector, norm1: NormKind) -> Result<f64> {
    let m = h.margin(x)?;
    Ok(-m / norm_of(h.a.as_slice(), norm1.dual()))
}

fn sgn_plus(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn seeded_rng(seed: u64, x: &Vector) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for v in x.as_slice() {
        h = splitmix(h ^ (v + 0.0).to_bits());
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Unit-ball maximizer of `a^T v` selected by `policy`; `x` seeds the
/// pseudorandom policy so outputs are a pure function of the query.
pub(crate) fn optimal_direction(a: &Vector, norm1: NormKind, policy: TieBreakPolicy, x: &Vector) -> Result<Vec<f64>> {
    let a = a.as_slice();
    let vertex = dual_maximizer_of(a, norm1)?;
    match (norm1, policy) {
        (_, TieBreakPolicy::Vertex) | (NormKind::L2 | NormKind::Lp(_), _) => Ok(vertex),
        (NormKind::L1, policy) => {
            let m = max_abs(a);
            let tied: Vec<usize> = (0..a.len()).filter(|&j| a[j].abs() == m).collect();
            if tied.len() < 2 {
                return Ok(vertex);
            }
            let mut v = vec![0.0; a.len()];
            match policy {
                TieBreakPolicy::FaceInterior(theta) => {
                    v[tied[0]] = theta * sgn_plus(a[tied[0]]);
                    v[tied[1]] = (1.0 - theta) * sgn_plus(a[tied[1]]);
                }
                TieBreakPolicy::Seeded(seed) => {
                    let mut rng = seeded_rng(seed, x);
                    // exponential weights give a uniform point of the simplex
                    let w: Vec<f64> = tied.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                    let total: f64 = w.iter().sum();
                    for (j, wj) in tied.iter().zip(w) {
                        v[*j] = sgn_plus(a[*j]) * wj / total;
                    }
                }
                TieBreakPolicy::Vertex => unreachable!(),
            }
            Ok(v)
        }
        (NormKind::Linf, policy) => {
            if a.iter().all(|v| *v != 0.0) {
                return Ok(vertex);
            }
            let mut v = vertex;
            let mut rng = match policy {
                TieBreakPolicy::Seeded(seed) => Some(seeded_rng(seed, x)),
                _ => None,
            };
            for (j, aj) in a.iter().enumerate() {
                if *aj == 0.0 {
                    v[j] = match (&policy, rng.as_mut()) {
                        (TieBreakPolicy::FaceInterior(theta), _) => 2.0 * theta - 1.0,
                        (_, Some(r)) => r.random_range(-1.0..=1.0),
                        _ => unreachable!(),
                    };
                }
            }
            Ok(v)
        }
    }
}

fn step(x: &Vector, d: f64, v: &[f64]) -> Vector {
    Vector::from_raw(x.as_slice().iter().zip(v).map(|(xi, vi)| xi + d * vi).collect())
}

fn cf_point(h: &Hyperplane, x: &Vector, norm1: NormKind, policy: TieBreakPolicy) -> Result<Vector> {
    norm1.validate()?;
    policy.validate()?;
    let d = boundary_distance(h, x, norm1)?;
    if d == 0.0 {
        return Ok(x.clone());
    }
    let v = optimal_direction(&h.a, norm1, policy, x)?;
    Ok(step(x, d, &v))
}

fn rcf_point(h: &Hyperplane, x: &Vector, norm1: NormKind, spec: &RobustnessSpec, policy: TieBreakPolicy) -> Result<Vector> {
    norm1.validate()?;
    spec.validate()?;
    policy.validate()?;
    let q = classify(h, x)?.sign();
    let a = h.a.as_slice();
    let d = (h.b - h.a.dot(x) - q * spec.rho * norm_of(a, spec.norm2.dual())) / norm_of(a, norm1.dual());
    let v = optimal_direction(&h.a, norm1, policy, x)?;
    Ok(step(x, d, &v))
}

/// Closest point (under `norm1`) on the decision boundary.
pub fn counterfactual_query(h: &Hyperplane, x: &Vector, norm1: NormKind, policy: TieBreakPolicy, ledger: &mut QueryLedger) -> Result<Vector> {
    let out = cf_point(h, x, norm1, policy)?;
    ledger.record_point(QueryKind::Cf, x.clone(), out.clone());
    Ok(out)
}

/// Closest point whose whole `spec` ball lies on the opposite side of the boundary.
pub fn robust_counterfactual_query(
    h: &Hyperplane,
    x: &Vector,
    norm1: NormKind,
    spec: &RobustnessSpec,
    policy: TieBreakPolicy,
    ledger: &mut QueryLedger,
) -> Result<Vector> {
    let out = rcf_point(h, x, norm1, spec, policy)?;
    ledger.record_point(QueryKind::Rcf, x.clone(), out.clone());
    Ok(out)
}

/// A hidden classifier with a fixed query configuration and its ledger.
///
/// The norm-1 kind and robustness spec are public knowledge; the hyperplane
/// is reachable only through queries (and [`Oracle::hidden`] for evaluation).
#[derive(Debug, Clone)]
pub struct Oracle {
    hidden: Hyperplane,
    norm1: NormKind,
    robustness: Option<RobustnessSpec>,
    policy: TieBreakPolicy,
    ledger: QueryLedger,
}

impl Oracle {
    pub fn new(hidden: Hyperplane, norm1: NormKind, policy: TieBreakPolicy) -> Result<Self> {
        norm1.validate()?;
        policy.validate()?;
        Ok(Self { hidden, norm1, robustness: None, policy, ledger: QueryLedger::new() })
    }

    pub fn with_robustness(mut self, spec: RobustnessSpec) -> Result<Self> {
        spec.validate()?;
        self.robustness = Some(spec);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.hidden.dim()
    }

    pub fn norm1(&self) -> NormKind {
        self.norm1
    }

    pub fn robustness(&self) -> Option<RobustnessSpec> {
        self.robustness
    }

    pub fn policy(&self) -> TieBreakPolicy {
        self.policy
    }

    pub fn hidden(&self) -> &Hyperplane {
        &self.hidden
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> QueryLedger {
        self.ledger
    }

    pub fn factual(&mut self, x: &Vector) -> Result<Label> {
        factual_query(&self.hidden, x, &mut self.ledger)
    }

    pub fn counterfactual(&mut self, x: &Vector) -> Result<Vector> {
        counterfactual_query(&self.hidden, x, self.norm1, self.policy, &mut self.ledger)
    }

    pub fn robust_counterfactual(&mut self, x: &Vector) -> Result<Vector> {
        let spec = self.robustness.ok_or(Error::MissingRobustness)?;
        robust_counterfactual_query(&self.hidden, x, self.norm1, &spec, self.policy, &mut self.ledger)
    }
}
