//! On-disk formats: binary datasets and volumes, TOML scenes, PLY/PGM exports and text reports.

mod binary;
pub mod dataset;
pub mod export;
pub mod report;
pub mod scene;
pub mod volume;

pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset};
pub use export::{
    encode_pgm, export_ply, export_slices, slice_image, thresholded_points, write_ply, PlyFormat,
};
pub use report::{write_report, Report};
pub use scene::{parse_scene, read_scene, SPEED_OF_LIGHT};
pub use volume::{decode_volume, encode_volume, read_volume, read_volume_matching, write_volume};
