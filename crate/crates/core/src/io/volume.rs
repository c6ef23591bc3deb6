//! `NLVG` voxel volume container.
//!
//! Layout, all little-endian: magic `"NLVG"`, version u16 (= 1), resolution
//! 3 × u32, bounds min then max 6 × f64, mode u8 (0 integer, 1 float), then
//! `Nx·Ny·Nz` accumulators (u32 or f64) with x varying fastest.

use std::path::Path;

use super::binary::{put_f64, put_u16, put_u32, read_file, write_file, ByteReader};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Real;
use crate::voxel::compare::check_same_geometry;
use crate::voxel::{Accumulators, GridGeometry, VoxelGrid};

pub const VOLUME_MAGIC: [u8; 4] = *b"NLVG";
pub const VOLUME_VERSION: u16 = 1;

pub fn encode_volume<T: Real>(grid: &VoxelGrid<T>) -> Vec<u8> {
    let g = grid.geometry();
    let width = match grid.accumulators() {
        Accumulators::Integer(_) => 4,
        Accumulators::Float(_) => 8,
    };
    let mut out = Vec::with_capacity(71 + width * grid.len());
    out.extend_from_slice(&VOLUME_MAGIC);
    put_u16(&mut out, VOLUME_VERSION);
    for d in g.dims {
        put_u32(&mut out, d as u32);
    }
    for v in [g.min, g.max] {
        for k in 0..3 {
            put_f64(&mut out, v[k].as_f64());
        }
    }
    match grid.accumulators() {
        Accumulators::Integer(v) => {
            out.push(0);
            v.iter().for_each(|x| put_u32(&mut out, *x));
        }
        Accumulators::Float(v) => {
            out.push(1);
            v.iter().for_each(|x| put_f64(&mut out, x.as_f64()));
        }
    }
    out
}

pub fn decode_volume<T: Real>(bytes: &[u8]) -> Result<VoxelGrid<T>> {
    let mut r = ByteReader::new(bytes);
    r.magic(VOLUME_MAGIC)?;
    let version_at = r.offset();
    let version = r.u16()?;
    if version != VOLUME_VERSION {
        return Err(Error::UnsupportedVersion {
            offset: version_at,
            found: version,
        });
    }
    let dims_at = r.offset();
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let mut corners = [Vec3::<T>::zero(); 2];
    for c in corners.iter_mut() {
        *c = Vec3::new(
            T::lit(r.finite_f64("bound")?),
            T::lit(r.finite_f64("bound")?),
            T::lit(r.finite_f64("bound")?),
        );
    }
    let geometry = GridGeometry::from_bounds(corners[0], corners[1], dims).map_err(|e| {
        Error::InvalidField {
            offset: dims_at,
            message: e.to_string(),
        }
    })?;
    let mode_at = r.offset();
    let mode = r.u8()?;
    let n = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64));
    let n = n.ok_or_else(|| Error::InvalidField {
        offset: dims_at,
        message: "resolution overflows".into(),
    })?;
    let values = match mode {
        0 => {
            r.require(n * 4)?;
            Accumulators::Integer((0..n).map(|_| r.u32()).collect::<Result<_>>()?)
        }
        1 => {
            r.require(n * 8)?;
            let mut v = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let at = r.offset();
                let x = r.f64()?;
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(Error::InvalidField {
                        offset: at,
                        message: format!("accumulator {x} invalid"),
                    });
                }
                v.push(T::lit(x));
            }
            Accumulators::Float(v)
        }
        m => {
            return Err(Error::InvalidField {
                offset: mode_at,
                message: format!("unknown mode tag {m}"),
            })
        }
    };
    r.finish()?;
    VoxelGrid::from_parts(geometry, values)
}

pub fn write_volume<T: Real>(grid: &VoxelGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_volume(grid))
}

pub fn read_volume<T: Real>(path: impl AsRef<Path>) -> Result<VoxelGrid<T>> {
    decode_volume(&read_file(path.as_ref())?)
}

/// Reads a volume and checks that it has the expected geometry.
pub fn read_volume_matching<T: Real>(
    path: impl AsRef<Path>,
    expected: &GridGeometry<T>,
) -> Result<VoxelGrid<T>> {
    let grid = read_volume(path)?;
    check_same_geometry(grid.geometry(), expected)?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::voxel::AccumulatorMode;

    type V = Vec3<f64>;

    fn grid(mode: AccumulatorMode) -> VoxelGrid<f64> {
        let mut g = VoxelGrid::new(
            &Aabb::new(V::new(-0.3, 0.1, 0.0), V::new(1.1, 0.9, 0.7)),
            7,
            mode,
        )
        .unwrap();
        for i in 0..g.len() {
            g.add(i, ((i * 13) % 9) as f64).unwrap();
        }
        g
    }

    #[test]
    fn round_trips_both_modes() {
        for mode in [AccumulatorMode::Integer, AccumulatorMode::Float] {
            let g = grid(mode);
            let bytes = encode_volume(&g);
            let back: VoxelGrid<f64> = decode_volume(&bytes).unwrap();
            assert_eq!(back, g);
            assert_eq!(encode_volume(&back), bytes);
        }
    }

    #[test]
    fn malformed_inputs_are_typed_errors() {
        let bytes = encode_volume(&grid(AccumulatorMode::Float));
        let mut bad = bytes.clone();
        bad[0] = b'Z';
        assert!(matches!(
            decode_volume::<f64>(&bad),
            Err(Error::MalformedMagic { .. })
        ));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            decode_volume::<f64>(&bad),
            Err(Error::UnsupportedVersion { .. })
        ));
        let mut bad = bytes.clone();
        bad[66] = 7;
        assert!(matches!(
            decode_volume::<f64>(&bad),
            Err(Error::InvalidField { offset: 66, .. })
        ));
        assert!(matches!(
            decode_volume::<f64>(&bytes[..100]),
            Err(Error::TruncatedPayload { .. })
        ));
        for cut in (0..bytes.len()).step_by(97) {
            assert!(decode_volume::<f64>(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn geometry_mismatch_on_reread() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.nlvg");
        let g = grid(AccumulatorMode::Integer);
        write_volume(&g, &path).unwrap();
        assert_eq!(read_volume_matching(&path, g.geometry()).unwrap(), g);
        let other = GridGeometry::from_bounds(V::zero(), V::splat(1.0), [2, 2, 2]).unwrap();
        assert!(matches!(
            read_volume_matching(&path, &other),
            Err(Error::GeometryMismatch(_))
        ));
    }
}
