//! Voxel grid, triangle rasterization, ellipsoid splatting and grid post-processing.

pub mod compare;
pub mod filter;
pub mod grid;
pub mod raster;
pub mod splat;

pub use crate::geometry::Triangle;
pub use compare::{grid_compare, pearson, GridComparison};
pub use filter::laplacian_filter;
pub use grid::{
    quantize_intensity, AccumulatorMode, Accumulators, GridGeometry, VoxelGrid, DEFAULT_MAX_VOXELS,
    MAX_INTEGER_WEIGHT,
};
pub use raster::{rasterize_triangle, rasterize_triangle_with};
pub use splat::{
    collect_spheroid_voxels, splat_ellipsoid, visit_spheroid_voxels, SplatScratch, SplatStats,
};
