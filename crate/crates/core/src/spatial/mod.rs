//! Geometric substrate for the texture features: exact KNN and voxel grids.

mod knn;
mod voxel;

pub use knn::{build_knn, KnnIndex, Neighbor};
pub use voxel::{axis_cell, bounding_cube, build_voxel_grid, Voxel, VoxelGrid, VoxelSize};
