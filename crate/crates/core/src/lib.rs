//! Transient non-line-of-sight reconstruction.
//!
//! A time-resolved dataset records, for every laser spot `l` and wall pixel
//! `p` on a relay wall, the photon arrivals after three bounces
//! (laser → wall → hidden scene → wall → sensor). Each nonzero bin constrains
//! the hidden surface to an ellipsoid with foci `l` and `p`. Back-projection
//! accumulates those ellipsoids into a voxel grid, either per voxel
//! ([`Method::Traditional`]) or by rasterizing a tessellated ellipsoid per
//! measurement ([`Method::Fast`]).
//!
//! The library is generic over the scalar type through [`Real`]; the aliases
//! at the crate root fix it to `f64` (and `f32` with an `F32` suffix).
//!
//! ```
//! use nlos_core::{reconstruct, ReconstructionConfig, Dataset};
//! # fn demo(ds: &Dataset) -> nlos_core::Result<()> {
//! let (grid, stats) = reconstruct(ds, &ReconstructionConfig::fast(64))?;
//! println!("{} ellipsoids, peak voxel {}", stats.ellipsoids_emitted, grid.argmax());
//! # Ok(()) }
//! ```

pub mod backprojection;
pub mod bench;
pub mod ellipsoid;
pub mod error;
pub mod geometry;
pub mod io;
pub mod scalar;
pub mod transient;
pub mod voxel;

pub use backprojection::{
    auto_bounds, reconstruct, reconstruct_fast, reconstruct_pipeline, reconstruct_traditional,
    BoundsSpec, Epsilon, Method, ReconstructionConfig, ReconstructionStats,
};
pub use ellipsoid::{
    build_sphere_atlas, ellipsoid_from_measurement, select_tessellation_level,
    shell_overlap_oracle, LevelChoice, ProlateSpheroid, SphereAtlas, TessellatedSphere,
};
pub use error::{Error, Result};
pub use geometry::{Aabb, Triangle, Vec3};
pub use scalar::Real;
pub use transient::{
    simulate_dataset, simulate_dataset_with, HiddenScene, ShotNoise, SimulationOptions,
    SurfaceSample, TemporalAxis, TransientDataset,
};
pub use voxel::{
    grid_compare, laplacian_filter, AccumulatorMode, GridComparison, GridGeometry, VoxelGrid,
};

pub type Point = Vec3<f64>;
pub type Box3 = Aabb<f64>;
pub type Dataset = TransientDataset<f64>;
pub type Scene = HiddenScene<f64>;
pub type Spheroid = ProlateSpheroid<f64>;
pub type Atlas = SphereAtlas<f64>;
pub type Grid = VoxelGrid<f64>;
pub type Config = ReconstructionConfig<f64>;

pub type PointF32 = Vec3<f32>;
pub type DatasetF32 = TransientDataset<f32>;
pub type SceneF32 = HiddenScene<f32>;
pub type GridF32 = VoxelGrid<f32>;
pub type ConfigF32 = ReconstructionConfig<f32>;
