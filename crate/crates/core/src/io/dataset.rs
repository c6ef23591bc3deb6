//! `NLTD` transient dataset container.
//!
//! Layout, all little-endian:
//!
//! | field            | type            |
//! |------------------|-----------------|
//! | magic `"NLTD"`   | 4 bytes         |
//! | version          | u16 (= 1)       |
//! | S, P, T          | 3 × u32         |
//! | c, t0, dt        | 3 × f64 (SI)    |
//! | laser positions  | S × 3 × f64     |
//! | laser offsets    | S × f64         |
//! | wall positions   | P × 3 × f64     |
//! | camera offsets   | P × f64         |
//! | intensity        | S·P·T × f32, shot-major, then pixel, then bin |

use std::path::Path;

use super::binary::{put_f32, put_f64, put_u16, put_u32, read_file, write_file, ByteReader};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Real;
use crate::transient::{LaserSampling, TemporalAxis, TransientDataset, WallSampling};

pub const DATASET_MAGIC: [u8; 4] = *b"NLTD";
pub const DATASET_VERSION: u16 = 1;

pub fn encode_dataset<T: Real>(ds: &TransientDataset<T>) -> Vec<u8> {
    let (s, p, t) = (ds.shots(), ds.pixels(), ds.bins());
    let mut out = Vec::with_capacity(42 + 32 * (s + p) + 4 * ds.len());
    out.extend_from_slice(&DATASET_MAGIC);
    put_u16(&mut out, DATASET_VERSION);
    for n in [s, p, t] {
        put_u32(&mut out, n as u32);
    }
    for v in [ds.axis.c, ds.axis.t0, ds.axis.dt] {
        put_f64(&mut out, v.as_f64());
    }
    let put_points = |out: &mut Vec<u8>, pts: &[Vec3<T>]| {
        for q in pts {
            for k in 0..3 {
                put_f64(out, q[k].as_f64());
            }
        }
    };
    put_points(&mut out, &ds.lasers.positions);
    ds.lasers
        .laser_offsets
        .iter()
        .for_each(|v| put_f64(&mut out, v.as_f64()));
    put_points(&mut out, &ds.wall.positions);
    ds.wall
        .camera_offsets
        .iter()
        .for_each(|v| put_f64(&mut out, v.as_f64()));
    ds.intensity().iter().for_each(|v| put_f32(&mut out, *v));
    out
}

pub fn decode_dataset<T: Real>(bytes: &[u8]) -> Result<TransientDataset<T>> {
    let mut r = ByteReader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let version_at = r.offset();
    let version = r.u16()?;
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion {
            offset: version_at,
            found: version,
        });
    }
    let counts_at = r.offset();
    let (s, p, t) = (r.u32()? as u64, r.u32()? as u64, r.u32()? as u64);
    let c = r.finite_f64("c")?;
    let t0 = r.finite_f64("t0")?;
    let dt = r.finite_f64("dt")?;
    let axis = TemporalAxis::new(T::lit(t0), T::lit(dt), t as usize, T::lit(c)).map_err(|e| {
        Error::InvalidField {
            offset: counts_at,
            message: e.to_string(),
        }
    })?;

    let cells = s.checked_mul(p).and_then(|sp| sp.checked_mul(t));
    let needed = cells
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(32 * (s + p)))
        .ok_or_else(|| Error::InvalidField {
            offset: counts_at,
            message: "S*P*T overflows".into(),
        })?;
    r.require(needed)?;

    let read_points = |r: &mut ByteReader, n: u64, what: &str| -> Result<Vec<Vec3<T>>> {
        (0..n)
            .map(|_| {
                Ok(Vec3::new(
                    T::lit(r.finite_f64(what)?),
                    T::lit(r.finite_f64(what)?),
                    T::lit(r.finite_f64(what)?),
                ))
            })
            .collect()
    };
    let read_offsets = |r: &mut ByteReader, n: u64, what: &str| -> Result<Vec<T>> {
        (0..n)
            .map(|_| {
                let at = r.offset();
                let v = r.finite_f64(what)?;
                if v < 0.0 {
                    return Err(Error::InvalidField {
                        offset: at,
                        message: format!("{what} {v} is negative"),
                    });
                }
                Ok(T::lit(v))
            })
            .collect()
    };
    let laser_pos = read_points(&mut r, s, "laser position")?;
    let laser_off = read_offsets(&mut r, s, "laser offset")?;
    let wall_pos = read_points(&mut r, p, "wall position")?;
    let wall_off = read_offsets(&mut r, p, "camera offset")?;

    let n = cells.unwrap_or(0) as usize;
    let mut intensity = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.offset();
        let v = r.f32()?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::NegativeIntensity {
                offset: at,
                value: v,
            });
        }
        intensity.push(v);
    }
    r.finish()?;

    let wall = WallSampling::new(wall_pos, wall_off)?;
    let lasers = LaserSampling::new(laser_pos, laser_off)?;
    TransientDataset::new(axis, wall, lasers, intensity)
}

pub fn write_dataset<T: Real>(ds: &TransientDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_dataset(ds))
}

pub fn read_dataset<T: Real>(path: impl AsRef<Path>) -> Result<TransientDataset<T>> {
    decode_dataset(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Vec3<f64>;

    fn sample() -> TransientDataset<f64> {
        let axis = TemporalAxis::new(1e-9, 3.3e-11, 5, 299_792_458.0).unwrap();
        let wall = WallSampling::new(
            vec![V::new(0.1, 0.2, 0.0), V::new(-0.3, 0.4, 0.0)],
            vec![1e-9, 2e-9],
        )
        .unwrap();
        let lasers = LaserSampling::new(vec![V::new(0.0, 0.0, 0.0)], vec![5e-10]).unwrap();
        let intensity = (0..10).map(|i| i as f32 * 0.125).collect();
        TransientDataset::new(axis, wall, lasers, intensity).unwrap()
    }

    #[test]
    fn round_trip() {
        let ds = sample();
        let bytes = encode_dataset(&ds);
        let back: TransientDataset<f64> = decode_dataset(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode_dataset(&back), bytes);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_dataset(&sample());
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            decode_dataset::<f64>(&bytes),
            Err(Error::MalformedMagic { offset: 0, .. })
        ));
    }

    #[test]
    fn bad_version() {
        let mut bytes = encode_dataset(&sample());
        bytes[4] = 9;
        assert!(matches!(
            decode_dataset::<f64>(&bytes),
            Err(Error::UnsupportedVersion {
                offset: 4,
                found: 9
            })
        ));
    }

    #[test]
    fn truncated_payload() {
        let bytes = encode_dataset(&sample());
        let e = decode_dataset::<f64>(&bytes[..bytes.len() - 3]);
        assert!(
            matches!(e, Err(Error::TruncatedPayload { needed: 3, .. })),
            "{e:?}"
        );
        for cut in 0..bytes.len() {
            assert!(decode_dataset::<f64>(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn negative_intensity_names_offset() {
        let mut bytes = encode_dataset(&sample());
        let at = bytes.len() - 4;
        bytes[at..].copy_from_slice(&(-1.0f32).to_le_bytes());
        match decode_dataset::<f64>(&bytes) {
            Err(Error::NegativeIntensity { offset, value }) => {
                assert_eq!(offset as usize, at);
                assert_eq!(value, -1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn huge_counts_do_not_allocate() {
        let mut bytes = encode_dataset(&sample());
        bytes[6..10].copy_from_slice(&u32::MAX.to_le_bytes());
        bytes[10..14].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_dataset::<f64>(&bytes).is_err());
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_dataset(&sample());
        bytes.push(0);
        assert!(matches!(
            decode_dataset::<f64>(&bytes),
            Err(Error::InvalidField { .. })
        ));
    }
}
