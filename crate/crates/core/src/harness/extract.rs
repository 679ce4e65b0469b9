use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{gaussian_vector, Attack, ScenarioConfig};
use crate::error::Result;
use crate::extraction::{
    extract_cf_differentiable, extract_cf_nondifferentiable, extract_rcf_differentiable,
    extract_rcf_nondifferentiable, hyperplanes_equivalent, DegeneratePath, ExtractionReport,
};
use crate::norms::{dot, Vector};
use crate::oracle::{splitmix, Hyperplane, Oracle, QueryLedger};

/// Equivalence residual accepted as a successful recovery.
pub const RECOVERY_TOL: f64 = 1e-6;
/// Required fraction of off-band points classified identically.
pub const AGREEMENT_TARGET: f64 = 1.0 - 1e-6;
/// Points this close to the hidden boundary, relative to scale, are skipped.
const BAND: f64 = 1e-6;

/// Query counts an attack is expected to spend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budget {
    pub cf: usize,
    pub rcf: usize,
    /// `None` when factual queries are only used for orientation.
    pub factual: Option<usize>,
}

pub fn expected_budget(attack: Attack, p: usize) -> Budget {
    match attack {
        Attack::CfDiff => Budget { cf: 1, rcf: 0, factual: None },
        Attack::CfNondiff => Budget { cf: p + 1, rcf: 0, factual: None },
        Attack::RcfDiff => Budget { cf: 0, rcf: 1, factual: Some(1) },
        Attack::RcfNondiff => Budget { cf: 0, rcf: p + 1, factual: Some(p + 1) },
    }
}

/// Shared evaluation points, drawn once per dimension and seed.
#[derive(Debug, Clone)]
pub struct AgreementPoints {
    dim: usize,
    flat: Vec<f64>,
}

impl AgreementPoints {
    pub fn new(dim: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0xA5A5_0000) ^ dim as u64);
        Self { dim, flat: gaussian_vector(&mut rng, dim * count, 3.0) }
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    /// Agreement of `recovered` with `hidden` over points off the hidden
    /// boundary band, and the number of points used.
    pub fn agreement(&self, hidden: &Hyperplane, recovered: &Hyperplane) -> (f64, usize) {
        let (ha, hb) = (hidden.a().as_slice(), hidden.b());
        let (ra, rb) = (recovered.a().as_slice(), recovered.b());
        let an = dot(ha, ha).sqrt();
        let (mut used, mut agree) = (0usize, 0usize);
        for x in self.flat.chunks_exact(self.dim) {
            let m = dot(ha, x) - hb;
            let scale = an * x.iter().fold(1.0f64, |s, v| s.max(v.abs())) + hb.abs();
            if m.abs() <= BAND * scale {
                continue;
            }
            used += 1;
            if (m >= 0.0) == (dot(ra, x) - rb >= 0.0) {
                agree += 1;
            }
        }
        if used == 0 {
            (1.0, 0)
        } else {
            (agree as f64 / used as f64, used)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    pub hidden: Hyperplane,
    pub report: ExtractionReport,
    pub agreement: f64,
    pub agreement_points: usize,
    pub equivalent: bool,
    pub within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetTable {
    pub expected: Budget,
    pub observed_min: Budget,
    pub observed_max: Budget,
    pub total_cf: usize,
    pub total_rcf: usize,
    pub total_factual: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub attack: Attack,
    pub dimension: usize,
    pub seed: u64,
    pub trials: Vec<TrialReport>,
    pub budget: BudgetTable,
    pub equivalent_trials: usize,
    pub rasters: Vec<String>,
    pub pass: bool,
}

impl RunReport {
    /// Lines describing every failed check.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.trials {
            if !t.within_budget {
                let r = &t.report;
                out.push(format!(
                    "trial {}: budget expected {:?}, observed cf={} rcf={} factual={}",
                    t.trial, self.budget.expected, r.queries_cf, r.queries_rcf, r.queries_factual
                ));
            }
            if !t.equivalent {
                out.push(format!(
                    "trial {}: recovery residual {:.3e}, agreement {:.9}",
                    t.trial, t.report.equivalence_residual, t.agreement
                ));
            }
        }
        out
    }
}

fn observed(r: &ExtractionReport, attack: Attack) -> Budget {
    let factual = r.queries_factual - r.orientation_queries;
    Budget { cf: r.queries_cf, rcf: r.queries_rcf, factual: attack.uses_rcf().then_some(factual) }
}

fn within(expected: Budget, obs: Budget, path: DegeneratePath) -> bool {
    // degenerate starts may finish early, never late
    let fits = |e: usize, o: usize| if path == DegeneratePath::None { o == e } else { o <= e };
    fits(expected.cf, obs.cf)
        && fits(expected.rcf, obs.rcf)
        && match (expected.factual, obs.factual) {
            (Some(e), Some(o)) => fits(e, o),
            _ => true,
        }
}

/// Starting point for the single-query attacks.
fn start_point(config: &ScenarioConfig, trial: usize) -> Result<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(config.trial_seed(trial) ^ 0x5151));
    Vector::new(gaussian_vector(&mut rng, config.dimension, 2.0))
}

/// Runs the configured attack for one trial and returns its report together
/// with the full query ledger.
pub fn run_trial(config: &ScenarioConfig, trial: usize) -> Result<(Hyperplane, ExtractionReport, QueryLedger)> {
    let hidden = config.hidden_for_trial(trial)?;
    let mut oracle = Oracle::new(hidden.clone(), config.norm1, config.policy_for_trial(trial))?;
    if let Some(spec) = config.robustness {
        oracle = oracle.with_robustness(spec)?;
    }
    let report = match config.attack {
        Attack::CfDiff => extract_cf_differentiable(&mut oracle, &start_point(config, trial)?)?,
        Attack::CfNondiff => extract_cf_nondifferentiable(&mut oracle)?,
        Attack::RcfDiff => extract_rcf_differentiable(&mut oracle, &start_point(config, trial)?)?,
        Attack::RcfNondiff => extract_rcf_nondifferentiable(&mut oracle)?,
    };
    Ok((hidden, report, oracle.into_ledger()))
}

/// Runs every trial of `config` and checks budgets and recoveries.
pub fn run_extract(config: &ScenarioConfig) -> Result<RunReport> {
    config.validate()?;
    let points = AgreementPoints::new(config.dimension, config.agreement_samples, config.seed);
    run_extract_with(config, &points)
}

/// As [`run_extract`], scoring agreement on caller-provided points.
pub fn run_extract_with(config: &ScenarioConfig, points: &AgreementPoints) -> Result<RunReport> {
    config.validate()?;
    let expected = expected_budget(config.attack, config.dimension);
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let (hidden, report, _) = run_trial(config, trial)?;
            let (agreement, used) = points.agreement(&hidden, &report.recovered);
            let eq = hyperplanes_equivalent(&hidden, &report.recovered, RECOVERY_TOL)?;
            let within_budget = within(expected, observed(&report, config.attack), report.degenerate_path);
            Ok(TrialReport {
                trial,
                hidden,
                equivalent: eq.equivalent && !eq.orientation_flipped && agreement >= AGREEMENT_TARGET,
                agreement,
                agreement_points: used,
                within_budget,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let obs: Vec<Budget> = trials.iter().map(|t| observed(&t.report, config.attack)).collect();
    let fold = |f: fn(usize, usize) -> usize, init: usize| {
        let pick = |g: fn(&Budget) -> usize| obs.iter().map(g).fold(init, f);
        Budget {
            cf: pick(|b| b.cf),
            rcf: pick(|b| b.rcf),
            factual: expected.factual.map(|_| pick(|b| b.factual.unwrap_or(0))),
        }
    };
    let budget = BudgetTable {
        expected,
        observed_min: fold(usize::min, usize::MAX),
        observed_max: fold(usize::max, 0),
        total_cf: trials.iter().map(|t| t.report.queries_cf).sum(),
        total_rcf: trials.iter().map(|t| t.report.queries_rcf).sum(),
        total_factual: trials.iter().map(|t| t.report.queries_factual).sum(),
        pass: trials.iter().all(|t| t.within_budget),
    };
    let equivalent_trials = trials.iter().filter(|t| t.equivalent).count();
    let pass = budget.pass && equivalent_trials == trials.len();
    Ok(RunReport {
        attack: config.attack,
        dimension: config.dimension,
        seed: config.seed,
        trials,
        budget,
        equivalent_trials,
        rasters: Vec::new(),
        pass,
    })
}
