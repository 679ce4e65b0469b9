//! Rank-revealing dense linear algebra on top of an SVD.

use nalgebra::DMatrix;

use crate::tolerance::RANK_THRESHOLD;

/// Result of decomposing a dense system.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub rank: usize,
    /// Orthonormal basis of the right nullspace.
    pub nullspace: Vec<Vec<f64>>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    cutoff: f64,
}

/// Rows of an `m x n` matrix padded with zero rows to at least `n` rows so the
/// SVD exposes the complete right singular basis.
fn to_matrix(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    let m = rows.len().max(ncols);
    DMatrix::from_fn(m, ncols, |i, j| rows.get(i).map_or(0.0, |r| r[j]))
}

pub fn decompose(rows: &[Vec<f64>], ncols: usize) -> Decomposition {
    let mat = to_matrix(rows, ncols);
    let svd = mat.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, s| m.max(*s));
    let cutoff = if smax == 0.0 { f64::INFINITY } else { RANK_THRESHOLD * smax };
    let vt = svd.v_t.as_ref().expect("requested v_t");
    let mut rank = 0;
    let mut nullspace = Vec::new();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > cutoff {
            rank += 1;
        } else {
            nullspace.push(vt.row(k).iter().copied().collect());
        }
    }
    Decomposition { rank, nullspace, svd, cutoff }
}

impl Decomposition {
    /// Minimum-norm least-squares solution of `M z = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.svd.u.as_ref().expect("requested u").nrows();
        let b = nalgebra::DVector::from_fn(m, |i, _| rhs.get(i).copied().unwrap_or(0.0));
        let eps = if self.cutoff.is_finite() { self.cutoff } else { f64::MAX };
        let x = self.svd.solve(&b, eps).expect("u and v_t computed");
        x.iter().copied().collect()
    }
}

pub fn rank(rows: &[Vec<f64>], ncols: usize) -> usize {
    decompose(rows, ncols).rank
}

/// Maximum absolute entry of `M z - rhs`.
pub fn residual(rows: &[Vec<f64>], z: &[f64], rhs: &[f64]) -> f64 {
    rows.iter()
        .zip(rhs)
        .map(|(r, b)| (crate::norms::dot(r, z) - b).abs())
        .fold(0.0, f64::max)
}
