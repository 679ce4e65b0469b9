//! Numerical tolerances shared by every module.

use serde::{Deserialize, Serialize};

/// Absolute-plus-relative comparison tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-9, rel: 1e-9 }
    }
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    /// Allowed slack for a quantity whose natural magnitude is `scale`.
    #[inline]
    pub fn bound(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale.abs()
    }

    #[inline]
    pub fn is_zero(&self, value: f64, scale: f64) -> bool {
        value.abs() <= self.bound(scale)
    }

    #[inline]
    pub fn eq(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.bound(a.abs().max(b.abs()))
    }
}

/// Relative residual threshold below which a Gram-Schmidt candidate is skipped.
pub const GRAM_SCHMIDT_SKIP: f64 = 1e-12;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Margin realizing strict inequalities in region tests under `||(a,b)||_inf <= 1`.
pub const REGION_EPSILON: f64 = 1e-7;
