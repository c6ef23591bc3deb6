//! TOML scene description.
//!
//! ```toml
//! laser_origin = [0.0, -1.0, -0.5]
//! camera_origin = [0.0, -1.0, -0.5]
//!
//! [wall]
//! origin = [-0.5, -0.5, 0.0]
//! edge_u = [1.0, 0.0, 0.0]
//! edge_v = [0.0, 1.0, 0.0]
//! pixels = [16, 16]
//!
//! [lasers]                  # either `points = [[x, y, z], ...]` or a grid
//! grid = { origin = [-0.4, -0.4, 0.0], edge_u = [0.8, 0.0, 0.0], edge_v = [0.0, 0.8, 0.0], count = [4, 2] }
//!
//! [temporal]                # optional; t0 and bins default to "auto", dt to 10 ps
//! t0 = "auto"
//! dt = 6.67e-11
//! bins = 256
//! c = 299792458.0
//!
//! [[hidden.samples]]
//! position = [0.0, 0.0, 0.6]
//! normal = [0.0, 0.0, -1.0]
//! area = 0.01
//! albedo = 1.0
//!
//! [[hidden.rectangles]]     # sampled with `density` (samples per m²) or `samples = [nu, nv]`
//! origin = [-0.1, -0.1, 0.5]
//! edge_u = [0.2, 0.0, 0.0]
//! edge_v = [0.0, 0.2, 0.0]
//! density = 2500.0
//! albedo = 0.8
//! ```
//!
//! Rectangle normals are `normalize(edge_u × edge_v)`; set `flip_normal = true`
//! to reverse them. A rectangle with density `ρ` gets `round(|u|·√ρ)` by
//! `round(|v|·√ρ)` samples at cell centres.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Real;
use crate::transient::{AxisSpec, HiddenScene, SurfaceSample, WallGrid};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Bin width used when the scene has no `[temporal]` block, in seconds.
pub const DEFAULT_BIN_WIDTH: f64 = 1e-11;

type P3 = [f64; 3];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    laser_origin: P3,
    camera_origin: P3,
    wall: RectFile,
    lasers: LasersFile,
    temporal: Option<TemporalFile>,
    #[serde(default)]
    hidden: HiddenFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RectFile {
    origin: P3,
    edge_u: P3,
    edge_v: P3,
    pixels: [usize; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LasersFile {
    points: Option<Vec<P3>>,
    grid: Option<LaserGridFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaserGridFile {
    origin: P3,
    edge_u: P3,
    edge_v: P3,
    count: [usize; 2],
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AutoOr<V> {
    Value(V),
    Keyword(String),
}

impl<V: Copy> AutoOr<V> {
    fn resolve(&self, field: &str) -> Result<Option<V>> {
        match self {
            AutoOr::Value(v) => Ok(Some(*v)),
            AutoOr::Keyword(s) if s == "auto" => Ok(None),
            AutoOr::Keyword(s) => Err(semantic(
                field,
                format!("expected a number or \"auto\", found {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemporalFile {
    t0: Option<AutoOr<f64>>,
    dt: f64,
    bins: Option<AutoOr<usize>>,
    c: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HiddenFile {
    #[serde(default)]
    samples: Vec<SampleFile>,
    #[serde(default)]
    rectangles: Vec<HiddenRectFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleFile {
    position: P3,
    normal: P3,
    area: f64,
    #[serde(default = "unit_albedo")]
    albedo: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HiddenRectFile {
    origin: P3,
    edge_u: P3,
    edge_v: P3,
    density: Option<f64>,
    samples: Option<[usize; 2]>,
    #[serde(default = "unit_albedo")]
    albedo: f64,
    #[serde(default)]
    flip_normal: bool,
}

fn unit_albedo() -> f64 {
    1.0
}

fn semantic(field: &str, message: impl Into<String>) -> Error {
    Error::SceneSemantic {
        field: field.to_string(),
        message: message.into(),
    }
}

fn v3<T: Real>(p: P3) -> Vec3<T> {
    Vec3::new(T::lit(p[0]), T::lit(p[1]), T::lit(p[2]))
}

fn finite(field: &str, p: &[f64]) -> Result<()> {
    if p.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(semantic(field, "non-finite value"))
    }
}

/// Samples a parallelogram at cell centres, `u` index fastest.
fn grid_points(origin: P3, u: P3, v: P3, nu: usize, nv: usize) -> Vec<Vec3<f64>> {
    let (o, u, v) = (v3::<f64>(origin), v3::<f64>(u), v3::<f64>(v));
    let mut out = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            let fu = (i as f64 + 0.5) / nu as f64;
            let fv = (j as f64 + 0.5) / nv as f64;
            out.push(o + u * fu + v * fv);
        }
    }
    out
}

fn rectangle_samples(idx: usize, r: &HiddenRectFile) -> Result<Vec<SurfaceSample<f64>>> {
    let field = format!("hidden.rectangles[{idx}]");
    finite(&field, &[r.origin, r.edge_u, r.edge_v].concat())?;
    let (u, v) = (v3::<f64>(r.edge_u), v3::<f64>(r.edge_v));
    let cross = u.cross(v);
    let area = cross.norm();
    let normal = cross
        .normalized()
        .filter(|_| area > 0.0)
        .ok_or_else(|| semantic(&field, "rectangle has zero area"))?;
    let normal = if r.flip_normal { -normal } else { normal };
    let (nu, nv) = match (r.density, r.samples) {
        (Some(rho), None) => {
            if !(rho.is_finite() && rho > 0.0) {
                return Err(semantic(
                    &format!("{field}.density"),
                    "density must be positive",
                ));
            }
            let s = rho.sqrt();
            (
                (u.norm() * s).round() as usize,
                (v.norm() * s).round() as usize,
            )
        }
        (None, Some([nu, nv])) => (nu, nv),
        _ => {
            return Err(semantic(
                &field,
                "exactly one of `density` or `samples` is required",
            ))
        }
    };
    if nu == 0 || nv == 0 {
        return Err(semantic(
            &field,
            format!("sampling yields {nu}x{nv} samples"),
        ));
    }
    let cell = area / (nu * nv) as f64;
    Ok(grid_points(r.origin, r.edge_u, r.edge_v, nu, nv)
        .into_iter()
        .map(|position| SurfaceSample {
            position,
            normal,
            area: cell,
            albedo: r.albedo,
        })
        .collect())
}

/// Parses a scene from TOML text.
pub fn parse_scene<T: Real>(text: &str) -> Result<HiddenScene<T>> {
    let file: SceneFile = toml::from_str(text).map_err(|e| Error::SceneParse(e.to_string()))?;
    finite("laser_origin", &file.laser_origin)?;
    finite("camera_origin", &file.camera_origin)?;
    finite(
        "wall",
        &[file.wall.origin, file.wall.edge_u, file.wall.edge_v].concat(),
    )?;

    let laser_points: Vec<Vec3<f64>> = match (&file.lasers.points, &file.lasers.grid) {
        (Some(points), None) => {
            finite("lasers.points", &points.concat())?;
            points.iter().map(|p| v3(*p)).collect()
        }
        (None, Some(g)) => {
            finite("lasers.grid", &[g.origin, g.edge_u, g.edge_v].concat())?;
            grid_points(g.origin, g.edge_u, g.edge_v, g.count[0], g.count[1])
        }
        _ => {
            return Err(semantic(
                "lasers",
                "exactly one of `points` or `grid` is required",
            ))
        }
    };

    let axis = match &file.temporal {
        Some(t) => AxisSpec {
            t0: t
                .t0
                .as_ref()
                .map_or(Ok(None), |a| a.resolve("temporal.t0"))?,
            dt: t.dt,
            bins: t
                .bins
                .as_ref()
                .map_or(Ok(None), |a| a.resolve("temporal.bins"))?,
            c: t.c.unwrap_or(SPEED_OF_LIGHT),
        },
        None => AxisSpec {
            t0: None,
            dt: DEFAULT_BIN_WIDTH,
            bins: None,
            c: SPEED_OF_LIGHT,
        },
    };
    if !(axis.dt.is_finite() && axis.dt > 0.0) {
        return Err(semantic("temporal.dt", "must be positive"));
    }

    let mut hidden = Vec::new();
    for (i, s) in file.hidden.samples.iter().enumerate() {
        let field = format!("hidden.samples[{i}]");
        finite(&field, &[s.position, s.normal].concat())?;
        let n = v3::<f64>(s.normal);
        let normal = n
            .normalized()
            .ok_or_else(|| semantic(&field, "zero normal"))?;
        hidden.push(SurfaceSample {
            position: v3(s.position),
            normal,
            area: s.area,
            albedo: s.albedo,
        });
    }
    for (i, r) in file.hidden.rectangles.iter().enumerate() {
        hidden.extend(rectangle_samples(i, r)?);
    }

    let scene = HiddenScene {
        wall_grid: WallGrid {
            origin: v3(file.wall.origin),
            edge_u: v3(file.wall.edge_u),
            edge_v: v3(file.wall.edge_v),
            pixels: file.wall.pixels,
        },
        laser_points,
        laser_origin: v3(file.laser_origin),
        camera_origin: v3(file.camera_origin),
        hidden_surfaces: hidden,
        axis,
    };
    scene.validate()?;
    Ok(cast_scene(&scene))
}

fn cast_scene<T: Real>(s: &HiddenScene<f64>) -> HiddenScene<T> {
    let c = |v: Vec3<f64>| v.cast::<T>();
    HiddenScene {
        wall_grid: WallGrid {
            origin: c(s.wall_grid.origin),
            edge_u: c(s.wall_grid.edge_u),
            edge_v: c(s.wall_grid.edge_v),
            pixels: s.wall_grid.pixels,
        },
        laser_points: s.laser_points.iter().map(|p| c(*p)).collect(),
        laser_origin: c(s.laser_origin),
        camera_origin: c(s.camera_origin),
        hidden_surfaces: s
            .hidden_surfaces
            .iter()
            .map(|h| SurfaceSample {
                position: c(h.position),
                normal: c(h.normal),
                area: T::lit(h.area),
                albedo: T::lit(h.albedo),
            })
            .collect(),
        axis: AxisSpec {
            t0: s.axis.t0.map(T::lit),
            dt: T::lit(s.axis.dt),
            bins: s.axis.bins,
            c: T::lit(s.axis.c),
        },
    }
}

pub fn read_scene<T: Real>(path: impl AsRef<Path>) -> Result<HiddenScene<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
laser_origin = [0.0, -1.0, -1.0]
camera_origin = [0.0, -1.0, -1.0]

[wall]
origin = [-0.5, -0.5, 0.0]
edge_u = [1.0, 0.0, 0.0]
edge_v = [0.0, 1.0, 0.0]
pixels = [4, 4]

[lasers]
points = [[0.0, 0.0, 0.0]]

[temporal]
t0 = 0.0
dt = 1e-10
bins = 128

[[hidden.samples]]
position = [0.0, 0.0, 0.5]
normal = [0.0, 0.0, -2.0]
area = 0.01
"#;

    #[test]
    fn minimal_scene() {
        let s: HiddenScene<f64> = parse_scene(MINIMAL).unwrap();
        s.validate().unwrap();
        assert_eq!(s.wall_grid.pixels, [4, 4]);
        assert_eq!(s.laser_points.len(), 1);
        assert_eq!(s.hidden_surfaces[0].normal, Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(s.hidden_surfaces[0].albedo, 1.0);
        assert_eq!(s.axis.c, SPEED_OF_LIGHT);
        assert_eq!(s.axis.bins, Some(128));
        let f: HiddenScene<f32> = parse_scene(MINIMAL).unwrap();
        assert_eq!(f.hidden_surfaces.len(), 1);
    }

    #[test]
    fn rectangle_density() {
        let text = MINIMAL.replace(
            "[[hidden.samples]]",
            "[[hidden.rectangles]]\norigin = [0.0, 0.0, 0.4]\nedge_u = [1.0, 0.0, 0.0]\nedge_v = [0.0, 0.5, 0.0]\ndensity = 100.0\n\n[[hidden.samples]]",
        );
        let s: HiddenScene<f64> = parse_scene(&text).unwrap();
        let rect: Vec<_> = s.hidden_surfaces[1..].to_vec();
        assert_eq!(rect.len(), 50);
        for r in &rect {
            assert!((r.area - 0.01).abs() < 1e-15);
            assert_eq!(r.normal, Vec3::new(0.0, 0.0, 1.0));
        }
        let total: f64 = rect.iter().map(|r| r.area).sum();
        assert!((total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auto_temporal_fields() {
        let text = MINIMAL
            .replace("t0 = 0.0", "t0 = \"auto\"")
            .replace("bins = 128\n", "");
        let s: HiddenScene<f64> = parse_scene(&text).unwrap();
        assert_eq!(s.axis.t0, None);
        assert_eq!(s.axis.bins, None);
        let axis = s.resolve_axis().unwrap();
        let (lo, hi) = s.arrival_range();
        assert!(axis.time_to_bin(lo).is_some());
        assert!(axis.time_to_bin(hi).is_some());
    }

    #[test]
    fn missing_temporal_block_is_fitted() {
        let start = MINIMAL.find("[temporal]").unwrap();
        let end = MINIMAL.find("[[hidden.samples]]").unwrap();
        let text = format!("{}{}", &MINIMAL[..start], &MINIMAL[end..]);
        let s: HiddenScene<f64> = parse_scene(&text).unwrap();
        assert_eq!(s.axis.dt, DEFAULT_BIN_WIDTH);
        let axis = s.resolve_axis().unwrap();
        let (lo, hi) = s.arrival_range();
        assert!((axis.t0 - (lo - axis.dt)).abs() < 1e-18);
        assert_eq!(axis.bins, ((hi - axis.t0) / axis.dt).floor() as usize + 2);
    }

    #[test]
    fn laser_grid() {
        let text = MINIMAL.replace(
            "points = [[0.0, 0.0, 0.0]]",
            "grid = { origin = [0.0, 0.0, 0.0], edge_u = [0.4, 0.0, 0.0], edge_v = [0.0, 0.2, 0.0], count = [4, 2] }",
        );
        let s: HiddenScene<f64> = parse_scene(&text).unwrap();
        assert_eq!(s.laser_points.len(), 8);
        assert!((s.laser_points[0].x - 0.05).abs() < 1e-12);
        assert!((s.laser_points[7].y - 0.15).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_context() {
        let e = parse_scene::<f64>("laser_origin = [0.0, 0.0\n").unwrap_err();
        assert!(
            matches!(e, Error::SceneParse(ref m) if m.contains("line")),
            "{e}"
        );

        let e = parse_scene::<f64>(&MINIMAL.replace("area = 0.01", "area = 0.01\nbogus = 1"))
            .unwrap_err();
        assert!(
            matches!(e, Error::SceneParse(ref m) if m.contains("bogus")),
            "{e}"
        );

        let e = parse_scene::<f64>(
            &MINIMAL.replace("edge_v = [0.0, 1.0, 0.0]", "edge_v = [2.0, 0.0, 0.0]"),
        )
        .unwrap_err();
        assert!(matches!(e, Error::SceneSemantic { .. }), "{e}");

        let e = parse_scene::<f64>(&MINIMAL.replace("points = [[0.0, 0.0, 0.0]]", "points = []"))
            .unwrap_err();
        assert!(matches!(e, Error::SceneSemantic { .. }), "{e}");

        let e = parse_scene::<f64>(&MINIMAL.replace("bins = 128", "bins = \"many\"")).unwrap_err();
        assert!(
            matches!(e, Error::SceneSemantic { ref field, .. } if field == "temporal.bins"),
            "{e}"
        );
    }
}
