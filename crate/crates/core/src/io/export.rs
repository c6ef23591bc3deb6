//! Point-cloud and image exports of a reconstructed volume.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::voxel::VoxelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Voxel centres whose value is at least `threshold · max`, paired with the
/// normalized confidence. An all-zero grid yields nothing.
pub fn thresholded_points<T: Real>(
    grid: &VoxelGrid<T>,
    threshold: f64,
) -> Result<Vec<([f64; 3], f64)>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let max = grid.max_value().as_f64();
    if !(max > 0.0) {
        return Ok(Vec::new());
    }
    let g = grid.geometry();
    Ok((0..grid.len())
        .filter_map(|i| {
            let v = grid.value(i).as_f64();
            (v >= threshold * max).then(|| {
                (
                    g.voxel_center(g.coords(i)).cast::<f64>().to_array(),
                    v / max,
                )
            })
        })
        .collect())
}

/// Writes a PLY point cloud and returns the vertex count.
pub fn write_ply<W: Write>(
    out: &mut W,
    grid: &VoxelGrid<impl Real>,
    threshold: f64,
    format: PlyFormat,
) -> Result<usize> {
    let points = thresholded_points(grid, threshold)?;
    let tag = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut buf = Vec::new();
    write!(
        buf,
        "ply\nformat {tag} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty double confidence\nend_header\n",
        points.len()
    )
    .expect("write to Vec");
    for (p, c) in &points {
        match format {
            PlyFormat::Ascii => {
                writeln!(buf, "{} {} {} {}", p[0], p[1], p[2], c).expect("write to Vec")
            }
            PlyFormat::BinaryLittleEndian => {
                for v in [p[0], p[1], p[2], *c] {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out.write_all(&buf).map_err(|e| Error::io("<ply>", e))?;
    Ok(points.len())
}

pub fn export_ply(
    grid: &VoxelGrid<impl Real>,
    threshold: f64,
    format: PlyFormat,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let n = write_ply(&mut w, grid, threshold, format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}

/// Renders layer `layer` along `axis` (0 = x, 1 = y, 2 = z) as an 8-bit
/// image. Returns `(width, height, pixels)` with rows top to bottom.
pub fn slice_image<T: Real>(
    grid: &VoxelGrid<T>,
    axis: usize,
    layer: usize,
) -> Result<(usize, usize, Vec<u8>)> {
    if axis > 2 {
        return Err(Error::invalid(format!(
            "slice axis {axis} is not 0, 1 or 2"
        )));
    }
    let g = grid.geometry();
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    let (a, b) = (a.min(b), a.max(b));
    let (w, h) = (g.dims[a], g.dims[b]);
    if layer >= g.dims[axis] {
        return Err(Error::invalid(format!("layer {layer} out of range")));
    }
    let max = grid.max_value().as_f64();
    let mut px = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let mut c = [0usize; 3];
            c[axis] = layer;
            c[a] = col;
            c[b] = h - 1 - row;
            let v = grid.value(g.index(c[0], c[1], c[2])).as_f64();
            px.push(if max > 0.0 {
                (255.0 * v / max).round().clamp(0.0, 255.0) as u8
            } else {
                0
            });
        }
    }
    Ok((w, h, px))
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Writes one binary PGM per layer along `axis` into `dir`, returning the paths.
pub fn export_slices<T: Real>(
    grid: &VoxelGrid<T>,
    axis: usize,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if axis > 2 {
        return Err(Error::invalid(format!(
            "slice axis {axis} is not 0, 1 or 2"
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = ['x', 'y', 'z'][axis];
    (0..grid.geometry().dims[axis])
        .map(|layer| {
            let (w, h, px) = slice_image(grid, axis, layer)?;
            let path = dir.join(format!("slice_{name}_{layer:04}.pgm"));
            std::fs::write(&path, encode_pgm(w, h, &px)).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Vec3};
    use crate::voxel::AccumulatorMode;

    fn grid() -> VoxelGrid<f64> {
        let b = Aabb::new(Vec3::zero(), Vec3::new(1.0, 0.5, 0.25));
        let mut g = VoxelGrid::new(&b, 8, AccumulatorMode::Float).unwrap();
        for i in 0..g.len() {
            g.add(i, (i % 10) as f64).unwrap();
        }
        g
    }

    #[test]
    fn threshold_one_keeps_argmax_only() {
        let mut g = VoxelGrid::new(
            &Aabb::new(Vec3::zero(), Vec3::splat(1.0)),
            4,
            AccumulatorMode::Float,
        )
        .unwrap();
        g.add(5, 2.0).unwrap();
        g.add(9, 1.0).unwrap();
        let pts = thresholded_points(&g, 1.0).unwrap();
        assert_eq!(pts.len(), 1);
        let c = g.geometry().voxel_center([1, 1, 0]);
        assert_eq!(pts[0].0, c.to_array());
        assert_eq!(pts[0].1, 1.0);
    }

    #[test]
    fn vertex_count_matches_recount() {
        let g = grid();
        let mut buf = Vec::new();
        let n = write_ply(&mut buf, &g, 0.3, PlyFormat::Ascii).unwrap();
        let expected = g.values().iter().filter(|v| **v >= 0.3 * 9.0).count();
        assert!(expected > 0 && expected < g.len());
        assert_eq!(n, expected);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(&format!("element vertex {expected}\n")));
        let body = text.split("end_header\n").nth(1).unwrap();
        assert_eq!(body.lines().count(), expected);

        let mut bin = Vec::new();
        assert_eq!(
            write_ply(&mut bin, &g, 0.3, PlyFormat::BinaryLittleEndian).unwrap(),
            expected
        );
        let header_end = bin.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        assert_eq!(bin.len() - header_end, expected * 32);
    }

    #[test]
    fn zero_grid_exports_empty() {
        let g = VoxelGrid::<f64>::new(
            &Aabb::new(Vec3::zero(), Vec3::splat(1.0)),
            3,
            AccumulatorMode::Integer,
        )
        .unwrap();
        let mut buf = Vec::new();
        assert_eq!(write_ply(&mut buf, &g, 0.0, PlyFormat::Ascii).unwrap(), 0);
        assert!(String::from_utf8(buf)
            .unwrap()
            .contains("element vertex 0\n"));
        let dir = tempfile::tempdir().unwrap();
        let paths = export_slices(&g, 2, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        for p in paths {
            let bytes = std::fs::read(p).unwrap();
            assert!(bytes.starts_with(b"P5\n3 3\n255\n"));
            assert!(bytes[11..].iter().all(|b| *b == 0));
        }
    }

    #[test]
    fn slices_are_max_normalized() {
        let g = grid();
        let dims = g.geometry().dims;
        let mut brightest = 0u8;
        for axis in 0..3 {
            for layer in 0..dims[axis] {
                let (w, h, px) = slice_image(&g, axis, layer).unwrap();
                assert_eq!(px.len(), w * h);
                brightest = brightest.max(*px.iter().max().unwrap());
            }
        }
        assert_eq!(brightest, 255);
    }

    #[test]
    fn threshold_out_of_range() {
        assert!(thresholded_points(&grid(), 1.5).is_err());
        assert!(thresholded_points(&grid(), -0.1).is_err());
    }

    #[test]
    fn unwritable_path() {
        let e = export_ply(&grid(), 0.5, PlyFormat::Ascii, "/nonexistent-dir/x.ply").unwrap_err();
        assert!(matches!(e, Error::Io { .. }));
    }
}
