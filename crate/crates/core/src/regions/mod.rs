//! Certification of forced classifications from a query ledger.
//!
//! A ledger constrains the hidden parameters `z = (a, b)` to a cone. A point
//! `x` is forced to `No` when `a^T x - b <= 0` for every `z` in that cone and
//! to `Yes` when `a^T x - b >= 0` for every one of them.

mod compile;
mod membership;
mod model;
mod raster;
mod sampler;

pub use compile::{Compiled, ConicRow};
pub use membership::{
    dual_certificate, membership, membership_dual, membership_with, DualCertificate, DualEngine, MembershipEngine,
    RegionOptions,
};
pub use model::{
    augment_rcf_model, model_from_ledger, DualNormEquality, LinearConstraint, ModelKind, NormConstraint, RcfRecord,
    RowOrigin, Sense, Side, SubgradientConstraint, UncertaintyModel,
};
pub use raster::{raster, raster_dual, Raster};
pub use sampler::{sample_consistent_hyperplanes, SampleSet};

use serde::{Deserialize, Serialize};

/// Classification forced by the ledger, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionLabel {
    Yes,
    No,
    Unknown,
}

impl RegionLabel {
    pub fn code(self) -> char {
        match self {
            RegionLabel::Yes => 'Y',
            RegionLabel::No => 'N',
            RegionLabel::Unknown => 'U',
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.code())
    }
}

#[cfg(test)]
mod tests;
