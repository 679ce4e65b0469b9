use rayon::prelude::*;
use serde::Serialize;

use super::membership::{DualEngine, MembershipEngine, RegionOptions};
use super::model::UncertaintyModel;
use super::RegionLabel;
use crate::error::{Error, Result};
use crate::norms::Vector;
use crate::oracle::Hyperplane;

/// Row-major grid of labels at cell centers; row `r` is the `r`-th step
/// along `x2`, column `c` the `c`-th step along `x1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Raster {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub resolution: usize,
    pub labels: Vec<RegionLabel>,
}

impl Raster {
    pub fn cell_size(&self) -> [f64; 2] {
        let n = self.resolution as f64;
        [(self.hi[0] - self.lo[0]) / n, (self.hi[1] - self.lo[1]) / n]
    }

    pub fn center(&self, row: usize, col: usize) -> [f64; 2] {
        cell_center(self.lo, self.hi, self.resolution, row, col)
    }

    pub fn get(&self, row: usize, col: usize) -> RegionLabel {
        self.labels[row * self.resolution + col]
    }

    pub fn count(&self, label: RegionLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Cells with `label` whose center is farther than `band_cells` cell
    /// diagonals from the boundary of `h`.
    pub fn count_outside_band(&self, label: RegionLabel, h: &Hyperplane, band_cells: f64) -> usize {
        let [dx, dy] = self.cell_size();
        let band = band_cells * (dx * dx + dy * dy).sqrt();
        let an = h.a().as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut n = 0;
        for r in 0..self.resolution {
            for c in 0..self.resolution {
                let [x1, x2] = self.center(r, c);
                let dist = (h.a().get(0) * x1 + h.a().get(1) * x2 - h.b()).abs() / an;
                if self.get(r, c) == label && dist > band {
                    n += 1;
                }
            }
        }
        n
    }

    /// Number of cells where the two rasters disagree.
    pub fn disagreements(&self, other: &Raster) -> usize {
        self.labels.iter().zip(&other.labels).filter(|(a, b)| a != b).count()
    }

    /// `x1,x2,label` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x1,x2,label\n");
        for r in 0..self.resolution {
            for c in 0..self.resolution {
                let [x1, x2] = self.center(r, c);
                out.push_str(&format!("{x1},{x2},{}\n", self.get(r, c).code()));
            }
        }
        out
    }
}

fn cell_center(lo: [f64; 2], hi: [f64; 2], n: usize, row: usize, col: usize) -> [f64; 2] {
    let dx = (hi[0] - lo[0]) / n as f64;
    let dy = (hi[1] - lo[1]) / n as f64;
    [lo[0] + (col as f64 + 0.5) * dx, lo[1] + (row as f64 + 0.5) * dy]
}

fn check_grid(model: &UncertaintyModel, lo: [f64; 2], hi: [f64; 2], resolution: usize) -> Result<()> {
    if model.dim != 2 {
        return Err(Error::RasterDimension(model.dim));
    }
    if resolution == 0 || !(lo[0] < hi[0] && lo[1] < hi[1]) {
        return Err(Error::InvalidArgument("raster needs lo < hi and a positive resolution".into()));
    }
    Ok(())
}

fn grid<F>(lo: [f64; 2], hi: [f64; 2], resolution: usize, label: F) -> Result<Raster>
where
    F: Fn(&Vector) -> Result<RegionLabel> + Sync,
{
    let labels = (0..resolution * resolution)
        .into_par_iter()
        .map(|k| {
            let [x1, x2] = cell_center(lo, hi, resolution, k / resolution, k % resolution);
            label(&Vector::from_raw(vec![x1, x2]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Raster { lo, hi, resolution, labels })
}

/// Primal membership labels on a `resolution x resolution` grid over the box
/// `[lo, hi]`.
pub fn raster(model: &UncertaintyModel, lo: [f64; 2], hi: [f64; 2], resolution: usize) -> Result<Raster> {
    check_grid(model, lo, hi, resolution)?;
    let engine = MembershipEngine::new(model, RegionOptions::default())?;
    grid(lo, hi, resolution, |x| engine.label(x))
}

/// Same grid labeled by the dual test.
pub fn raster_dual(model: &UncertaintyModel, lo: [f64; 2], hi: [f64; 2], resolution: usize) -> Result<Raster> {
    check_grid(model, lo, hi, resolution)?;
    let engine = DualEngine::new(model, RegionOptions::default())?;
    grid(lo, hi, resolution, |x| engine.label(x))
}
