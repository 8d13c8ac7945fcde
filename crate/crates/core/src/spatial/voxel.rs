//! Uniform voxelization over a cloud's bounding cube.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Voxels per axis. The grid has `n³` cells over the bounding cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
#[derive(Default)]
pub enum VoxelSize {
    V8,
    V16,
    V32,
    #[default]
    V64,
}

impl VoxelSize {
    pub const ALL: [VoxelSize; 4] = [Self::V8, Self::V16, Self::V32, Self::V64];

    pub fn per_axis(self) -> u32 {
        match self {
            Self::V8 => 8,
            Self::V16 => 16,
            Self::V32 => 32,
            Self::V64 => 64,
        }
    }
}

impl TryFrom<u32> for VoxelSize {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            8 => Ok(Self::V8),
            16 => Ok(Self::V16),
            32 => Ok(Self::V32),
            64 => Ok(Self::V64),
            _ => Err(Error::OutOfRange(format!(
                "voxel size {v}; expected one of 8, 16, 32, 64"
            ))),
        }
    }
}

impl From<VoxelSize> for u32 {
    fn from(v: VoxelSize) -> u32 {
        v.per_axis()
    }
}

impl fmt::Display for VoxelSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.per_axis())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Voxel {
    /// Linear id `(ix * n + iy) * n + iz`.
    pub id: u32,
    /// Member point indices, ascending.
    pub points: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct VoxelGrid {
    size: VoxelSize,
    cube_min: [f64; 3],
    edge: f64,
    voxel_of: Vec<u32>,
    occupied: Vec<Voxel>,
}

/// Axis-aligned bounding cube: centered on the bounding box, edge equal to
/// the largest box extent.
pub fn bounding_cube(cloud: &PointCloud) -> ([f64; 3], f64) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for i in 0..cloud.len() {
        let p = cloud.position_f64(i);
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let edge = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let min = std::array::from_fn(|a| (lo[a] + hi[a]) / 2.0 - edge / 2.0);
    (min, edge)
}

/// Cell index along one axis. A zero edge maps everything to cell 0.
#[inline]
pub fn axis_cell(coord: f64, cube_min: f64, edge: f64, n: u32) -> u32 {
    if edge <= 0.0 {
        return 0;
    }
    let c = (n as f64 * (coord - cube_min) / edge).floor();
    c.clamp(0.0, (n - 1) as f64) as u32
}

pub fn build_voxel_grid(cloud: &PointCloud, size: VoxelSize) -> VoxelGrid {
    let n = size.per_axis();
    let (cube_min, edge) = bounding_cube(cloud);

    let voxel_of: Vec<u32> = (0..cloud.len())
        .map(|i| {
            let p = cloud.position_f64(i);
            let [x, y, z] = std::array::from_fn(|a| axis_cell(p[a], cube_min[a], edge, n));
            (x * n + y) * n + z
        })
        .collect();

    let mut order: Vec<usize> = (0..voxel_of.len()).collect();
    order.sort_by_key(|&i| (voxel_of[i], i));

    let mut occupied: Vec<Voxel> = Vec::new();
    for i in order {
        let id = voxel_of[i];
        match occupied.last_mut() {
            Some(v) if v.id == id => v.points.push(i),
            _ => occupied.push(Voxel { id, points: vec![i] }),
        }
    }

    VoxelGrid {
        size,
        cube_min,
        edge,
        voxel_of,
        occupied,
    }
}

impl VoxelGrid {
    pub fn size(&self) -> VoxelSize {
        self.size
    }

    pub fn cube_min(&self) -> [f64; 3] {
        self.cube_min
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    /// Non-empty voxels in ascending id order.
    pub fn occupied(&self) -> &[Voxel] {
        &self.occupied
    }

    /// Number of non-empty voxels.
    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn voxel_of(&self, point: usize) -> u32 {
        self.voxel_of[point]
    }

    pub fn cell_coords(&self, id: u32) -> [u32; 3] {
        let n = self.size.per_axis();
        [id / (n * n), (id / n) % n, id % n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_share_one_voxel() {
        let c = PointCloud::new(vec![[3.5, -1.0, 2.0]; 7], None).unwrap();
        let g = build_voxel_grid(&c, VoxelSize::V64);
        assert_eq!(g.occupied_count(), 1);
        assert_eq!(g.occupied()[0].points.len(), 7);
    }

    #[test]
    fn cube_corners_land_in_distinct_corner_voxels() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        let c = PointCloud::new(pts, None).unwrap();
        let g = build_voxel_grid(&c, VoxelSize::V8);
        assert_eq!(g.occupied_count(), 8);
        for v in g.occupied() {
            assert_eq!(v.points.len(), 1);
            assert!(g.cell_coords(v.id).iter().all(|&c| c == 0 || c == 7));
        }
    }

    #[test]
    fn flat_cloud_uses_cube_not_box() {
        // Extent 8 along x, 0 along y and z: the cube is centered so y, z
        // fall in the middle cell.
        let c = PointCloud::new(vec![[0.0, 0.0, 0.0], [8.0, 0.0, 0.0]], None).unwrap();
        let g = build_voxel_grid(&c, VoxelSize::V8);
        assert_eq!(g.cell_coords(g.voxel_of(0)), [0, 4, 4]);
        assert_eq!(g.cell_coords(g.voxel_of(1)), [7, 4, 4]);
    }

    #[test]
    fn voxel_size_parsing() {
        assert_eq!(VoxelSize::try_from(32).unwrap(), VoxelSize::V32);
        assert_eq!(VoxelSize::try_from(12).unwrap_err().kind(), "OutOfRange");
    }
}
