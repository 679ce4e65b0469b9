use serde::Serialize;

use super::config::{RasterSpec, ScenarioConfig};
use super::extract::run_trial;
use crate::error::{Error, Result};
use crate::norms::Vector;
use crate::oracle::{classify, Label, QueryLedger};
use crate::regions::{
    augment_rcf_model, model_from_ledger, raster, sample_consistent_hyperplanes, ModelKind, Raster, RegionLabel,
    UncertaintyModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellCounts {
    pub yes: usize,
    pub no: usize,
    pub unknown: usize,
}

impl CellCounts {
    pub fn of(r: &Raster) -> Self {
        Self { yes: r.count(RegionLabel::Yes), no: r.count(RegionLabel::No), unknown: r.count(RegionLabel::Unknown) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerCheck {
    pub samples: usize,
    pub acceptance_rate: f64,
    /// Decided cells contradicted by some sampled hyperplane.
    pub violations: usize,
    /// No proposal was accepted: the consistent set has measure zero on the
    /// sampled manifold, so the check was skipped.
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionsReport {
    pub kind: ModelKind,
    pub relaxed: bool,
    pub rows: usize,
    pub cells: Option<CellCounts>,
    pub sampler: Option<SamplerCheck>,
    #[serde(skip)]
    pub raster: Option<Raster>,
    #[serde(skip)]
    pub model: Option<UncertaintyModel>,
    pub pass: bool,
}

/// Decided cells of `r` contradicted by any hyperplane sampled from `model`.
pub fn sampler_violations(model: &UncertaintyModel, r: &Raster, samples: usize, seed: u64) -> Result<SamplerCheck> {
    let set = match sample_consistent_hyperplanes(model, samples, seed) {
        Ok(set) => set,
        Err(Error::SamplerExhausted(_)) => {
            return Ok(SamplerCheck { samples: 0, acceptance_rate: 0.0, violations: 0, exhausted: true });
        }
        Err(e) => return Err(e),
    };
    let mut violations = 0;
    for row in 0..r.resolution {
        for col in 0..r.resolution {
            let want = match r.get(row, col) {
                RegionLabel::Yes => Label::Yes,
                RegionLabel::No => Label::No,
                RegionLabel::Unknown => continue,
            };
            let x = Vector::new(r.center(row, col).to_vec())?;
            for h in &set.samples {
                if classify(h, &x)? != want && h.margin(&x)?.abs() > 1e-6 * (1.0 + x.max_abs()) {
                    violations += 1;
                    break;
                }
            }
        }
    }
    Ok(SamplerCheck { samples: set.samples.len(), acceptance_rate: set.acceptance_rate(), violations, exhausted: false })
}

/// Builds the region model of `ledger`, rasterizes it when configured and
/// cross-checks decided cells against sampled consistent hyperplanes.
pub fn run_regions(config: &ScenarioConfig, ledger: &QueryLedger) -> Result<RegionsReport> {
    let model = if ledger.is_empty() {
        UncertaintyModel::empty(config.dimension, config.norm1)?
    } else {
        model_from_ledger(ledger, config.norm1, config.robustness)?
    };
    if model.dim != config.dimension {
        return Err(Error::DimensionMismatch { expected: config.dimension, got: model.dim });
    }
    let model = if config.augment && model.kind == ModelKind::Rcf { augment_rcf_model(&model, true)? } else { model };
    let grid = match &config.raster {
        Some(RasterSpec { lo, hi, resolution }) => Some(raster(&model, *lo, *hi, *resolution)?),
        None => None,
    };
    let sampler = match (&grid, config.samples) {
        (Some(r), Some(n)) => Some(sampler_violations(&model, r, n, config.seed)?),
        _ => None,
    };
    let pass = sampler.as_ref().is_none_or(|s| s.violations == 0);
    Ok(RegionsReport {
        kind: model.kind,
        relaxed: model.relaxed(),
        rows: model.num_rows(),
        cells: grid.as_ref().map(CellCounts::of),
        sampler,
        raster: grid,
        model: Some(model),
        pass,
    })
}

/// Runs trial 0 of the configured attack and certifies regions from its
/// ledger.
pub fn run_raster(config: &ScenarioConfig) -> Result<RegionsReport> {
    config.validate()?;
    let (_, _, ledger) = run_trial(config, 0)?;
    run_regions(config, &ledger)
}
