//! Reduced-reference texture features computed on the reference cloud.
//!
//! * CFGD (color fluctuation over geometric distance): per point, the mean of
//!   `|ΔY| / d` over its K nearest neighbors, averaged over all points.
//! * CBMV (color block mean variance): the population standard deviation of
//!   luma inside each occupied voxel, averaged over occupied voxels.
//!
//! Both use luma only. Per-point and per-voxel terms are computed
//! independently and reduced in index order with compensated summation, so
//! results do not depend on thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accum::compensated_sum;
use crate::cloud::{PointCloud, Rgb};
use crate::error::{Error, Result};
use crate::spatial::{build_knn, build_voxel_grid, KnnIndex, VoxelGrid, VoxelSize};

pub const DEFAULT_NEIGHBORS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LumaStandard {
    #[default]
    Bt709,
    Bt601,
}

impl LumaStandard {
    /// R, G, B weights in units of 1/10000.
    const fn weights(self) -> [u32; 3] {
        match self {
            Self::Bt709 => [2126, 7152, 722],
            Self::Bt601 => [2990, 5870, 1140],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bt709 => "bt709",
            Self::Bt601 => "bt601",
        }
    }

    /// Luma of an 8-bit RGB triple. Integer weights make gray inputs exact.
    pub fn luma(self, rgb: Rgb) -> f64 {
        let [wr, wg, wb] = self.weights();
        let acc = wr * rgb[0] as u32 + wg * rgb[1] as u32 + wb * rgb[2] as u32;
        acc as f64 / 10_000.0
    }
}

/// BT.709 luma.
pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    LumaStandard::Bt709.luma([r, g, b])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub cfgd: f64,
    pub cbmv: f64,
    #[serde(rename = "K")]
    pub neighbors: usize,
    #[serde(rename = "V")]
    pub voxel_size: VoxelSize,
    pub luma_standard: LumaStandard,
}

impl FeatureVector {
    /// Feature values in GLM input order (CFGD, CBMV).
    pub fn values(&self) -> [f64; 2] {
        [self.cfgd, self.cbmv]
    }
}

pub fn lumas(cloud: &PointCloud, standard: LumaStandard) -> Result<Vec<f64>> {
    Ok(cloud
        .require_color()?
        .iter()
        .map(|&c| standard.luma(c))
        .collect())
}

pub fn cfgd(cloud: &PointCloud, index: &KnnIndex<'_>, k: usize) -> Result<f64> {
    let y = lumas(cloud, LumaStandard::default())?;
    cfgd_from_lumas(&y, index, k)
}

/// CFGD over precomputed luma values. Coincident neighbors (d = 0) are
/// dropped from both the sum and the neighbor count; a point whose
/// neighbors are all coincident contributes 0.
pub fn cfgd_from_lumas(y: &[f64], index: &KnnIndex<'_>, k: usize) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::DegenerateCloud {
            required: 2,
            found: y.len(),
        });
    }
    if k == 0 {
        return Err(Error::OutOfRange("neighbor count K must be positive".into()));
    }
    debug_assert_eq!(index.len(), y.len());

    let per_point: Vec<f64> = (0..y.len())
        .into_par_iter()
        .map(|i| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for nb in index.neighbors_of(i, k) {
                if nb.dist2 > 0.0 {
                    sum += (y[i] - y[nb.index]).abs() / nb.distance();
                    n += 1;
                }
            }
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        })
        .collect();

    Ok(compensated_sum(per_point) / y.len() as f64)
}

pub fn cbmv(cloud: &PointCloud, grid: &VoxelGrid) -> Result<f64> {
    let y = lumas(cloud, LumaStandard::default())?;
    Ok(cbmv_from_lumas(&y, grid))
}

pub fn cbmv_from_lumas(y: &[f64], grid: &VoxelGrid) -> f64 {
    let stds: Vec<f64> = grid
        .occupied()
        .par_iter()
        .map(|voxel| {
            let d = voxel.points.len() as f64;
            let mu = compensated_sum(voxel.points.iter().map(|&i| y[i])) / d;
            let ss = compensated_sum(voxel.points.iter().map(|&i| (y[i] - mu).powi(2)));
            (ss / d).sqrt()
        })
        .collect();
    compensated_sum(stds) / grid.occupied_count() as f64
}

/// Computes both features from one luma pass.
pub fn extract_features(
    cloud: &PointCloud,
    k: usize,
    voxel_size: VoxelSize,
    standard: LumaStandard,
) -> Result<FeatureVector> {
    let y = lumas(cloud, standard)?;
    let index = build_knn(cloud);
    let cfgd = cfgd_from_lumas(&y, &index, k)?;
    let grid = build_voxel_grid(cloud, voxel_size);
    let cbmv = cbmv_from_lumas(&y, &grid);
    Ok(FeatureVector {
        cfgd,
        cbmv,
        neighbors: k,
        voxel_size,
        luma_standard: standard,
    })
}
