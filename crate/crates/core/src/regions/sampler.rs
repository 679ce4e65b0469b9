use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::compile::Compiled;
use super::model::UncertaintyModel;
use crate::error::{Error, Result};
use crate::linalg::decompose;
use crate::oracle::Hyperplane;

/// Proposal budget before giving up.
pub const MAX_PROPOSALS: u64 = 10_000_000;
/// Row violation tolerated when accepting a proposal.
const ACCEPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub samples: Vec<Hyperplane>,
    pub proposals: u64,
}

impl SampleSet {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.samples.len() as f64 / self.proposals as f64
        }
    }
}

/// Rejection sampler over unit vectors `(a, b)` in the span of the model's
/// equality rows.
///
/// Returns up to `n` consistent hyperplanes. Fails only when no proposal
/// at all is accepted within the budget.
pub fn sample_consistent_hyperplanes(model: &UncertaintyModel, n: usize, seed: u64) -> Result<SampleSet> {
    let compiled = Compiled::new(model, true)?;
    let dim = model.dim + 1;
    let basis = decompose(&compiled.equalities(), dim).nullspace;
    if basis.is_empty() {
        return Err(Error::SamplerExhausted(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    let mut proposals = 0u64;
    let mut z = vec![0.0; dim];
    while samples.len() < n && proposals < MAX_PROPOSALS {
        proposals += 1;
        z.fill(0.0);
        for col in &basis {
            let g: f64 = StandardNormal.sample(&mut rng);
            z.iter_mut().zip(col).for_each(|(zi, ci)| *zi += g * ci);
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        z.iter_mut().for_each(|v| *v /= norm);
        if compiled.max_violation(&z) > ACCEPT_TOL {
            continue;
        }
        if let Ok(h) = Hyperplane::from_parts(&z[..model.dim], z[model.dim]) {
            samples.push(h);
        }
    }
    if samples.is_empty() {
        return Err(Error::SamplerExhausted(proposals));
    }
    Ok(SampleSet { samples, proposals })
}
