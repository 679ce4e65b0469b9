//! Query oracles, extraction attacks and region certification for hidden
//! linear classifiers explained through counterfactuals.

pub mod error;
pub mod extraction;
pub mod harness;
pub mod linalg;
pub mod norms;
pub mod oracle;
pub mod regions;
pub mod solver;
pub mod tolerance;

pub use error::{Error, Result};
pub use norms::{NormKind, Vector};
pub use oracle::{Hyperplane, Label, Oracle, QueryKind, QueryLedger, RobustnessSpec, TieBreakPolicy};
pub use tolerance::Tolerance;
