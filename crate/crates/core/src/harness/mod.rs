//! Scenario configs, batch extraction runs, region certification and the
//! worked demo, as driven by the `cfx` binary.

mod canonical;
mod config;
mod demo;
mod extract;
mod regions;

pub use canonical::to_canonical_json;
pub use config::{random_hidden, Attack, HiddenSpec, ModelShape, RasterSpec, ScenarioConfig, SEED_ENV};
pub use demo::{run_demo, DemoReport};
pub use extract::{
    expected_budget, run_extract, run_extract_with, run_trial, AgreementPoints, Budget, BudgetTable, RunReport,
    TrialReport, AGREEMENT_TARGET, RECOVERY_TOL,
};
pub use regions::{run_raster, run_regions, sampler_violations, CellCounts, RegionsReport, SamplerCheck};
