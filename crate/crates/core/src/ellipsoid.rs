//! Prolate spheroids `E(l, p, d)` and the tessellated unit-sphere atlas used
//! to voxelize them.
//!
//! A measurement with foci `l`, `p` and path length `d` defines the surface
//! `{y : |y - l| + |y - p| = d}`. It is the image of the unit sphere under the
//! affine map `y = center + R diag(a, b, b) u`, where `a = d/2`,
//! `b = sqrt(a^2 - f^2)`, `f = |l - p|/2` and the first column of `R` points
//! from `l` to `p`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Triangle, Vec3};
use crate::scalar::Real;

/// Highest tessellation level the atlas accepts.
pub const MAX_ATLAS_LEVEL: usize = 7;

/// Relative margin for the `d > |l - p|` degeneracy test.
pub const DEGENERACY_FACTOR: f64 = 1e-9;

/// Affine map `x -> linear * x + translation`; `linear` is row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine3<T> {
    pub linear: [[T; 3]; 3],
    pub translation: Vec3<T>,
}

impl<T: Real> Affine3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            linear: [[o, z, z], [z, o, z], [z, z, o]],
            translation: Vec3::zero(),
        }
    }

    /// Builds the map from the images of the three basis vectors.
    pub fn from_columns(cols: [Vec3<T>; 3], translation: Vec3<T>) -> Self {
        let mut linear = [[T::zero(); 3]; 3];
        for (j, c) in cols.iter().enumerate() {
            for i in 0..3 {
                linear[i][j] = c[i];
            }
        }
        Self {
            linear,
            translation,
        }
    }

    #[inline]
    pub fn apply(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.linear;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        ) + self.translation
    }

    /// Homogeneous 4×4 form.
    pub fn to_matrix4(&self) -> [[T; 4]; 4] {
        let mut out = [[T::zero(); 4]; 4];
        for i in 0..3 {
            out[i][..3].copy_from_slice(&self.linear[i]);
            out[i][3] = self.translation[i];
        }
        out[3][3] = T::one();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProlateSpheroid<T> {
    pub focus_a: Vec3<T>,
    pub focus_b: Vec3<T>,
    /// Total path length `d = c t'`.
    pub path_length: T,
    pub semi_major: T,
    pub semi_minor: T,
    pub center: Vec3<T>,
    /// Orthonormal frame; `axes[0]` runs from `focus_a` to `focus_b`.
    pub axes: [Vec3<T>; 3],
    /// Unit sphere to spheroid.
    pub transform: Affine3<T>,
}

impl<T: Real> ProlateSpheroid<T> {
    /// Scale part of the transform, i.e. `(a, b, b)`.
    pub fn scale(&self) -> [T; 3] {
        [self.semi_major, self.semi_minor, self.semi_minor]
    }

    /// Largest singular value of the linear part (`a`).
    pub fn max_scale(&self) -> T {
        self.semi_major
    }

    pub fn focal_distance(&self) -> T {
        self.focus_a.distance(self.focus_b)
    }

    /// `|y - focus_a| + |y - focus_b|`.
    #[inline]
    pub fn path_sum(&self, y: Vec3<T>) -> T {
        y.distance(self.focus_a) + y.distance(self.focus_b)
    }

    pub fn surface_point(&self, unit: Vec3<T>) -> Vec3<T> {
        self.transform.apply(unit)
    }

    /// Axis-aligned bounds of the surface.
    pub fn bounding_box(&self) -> Aabb<T> {
        let m = &self.transform.linear;
        let half = Vec3::new(
            (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[0][2] * m[0][2]).sqrt(),
            (m[1][0] * m[1][0] + m[1][1] * m[1][1] + m[1][2] * m[1][2]).sqrt(),
            (m[2][0] * m[2][0] + m[2][1] * m[2][1] + m[2][2] * m[2][2]).sqrt(),
        );
        Aabb::new(self.center - half, self.center + half)
    }
}

/// Spheroid with foci `l`, `p` and total path length `d`.
///
/// Fails with [`Error::DegenerateEllipsoid`] when `d <= |l - p| (1 + 1e-9)`
/// or `d <= 0`.
pub fn ellipsoid_from_measurement<T: Real>(
    l: Vec3<T>,
    p: Vec3<T>,
    d: T,
) -> Result<ProlateSpheroid<T>> {
    let focal = l.distance(p);
    let margin = focal * T::lit(DEGENERACY_FACTOR);
    if !(d > T::zero() && d > focal + margin && d.is_finite()) {
        return Err(Error::DegenerateEllipsoid {
            path_length: d.as_f64(),
            focal_distance: focal.as_f64(),
        });
    }
    let half = T::lit(0.5);
    let a = d * half;
    let f = focal * half;
    let b = ((a - f) * (a + f)).sqrt();
    let center = (l + p) * half;

    let axes = if focal > T::zero() {
        let e1 = (p - l) / focal;
        let helper = match [e1.x.abs(), e1.y.abs(), e1.z.abs()] {
            [x, y, z] if x <= y && x <= z => Vec3::new(T::one(), T::zero(), T::zero()),
            [_, y, z] if y <= z => Vec3::new(T::zero(), T::one(), T::zero()),
            _ => Vec3::new(T::zero(), T::zero(), T::one()),
        };
        let e2 = e1
            .cross(helper)
            .normalized()
            .expect("helper axis is not parallel to e1");
        let e3 = e1.cross(e2);
        [e1, e2, e3]
    } else {
        let (o, z) = (T::one(), T::zero());
        [Vec3::new(o, z, z), Vec3::new(z, o, z), Vec3::new(z, z, o)]
    };
    let transform = Affine3::from_columns([axes[0] * a, axes[1] * b, axes[2] * b], center);
    Ok(ProlateSpheroid {
        focus_a: l,
        focus_b: p,
        path_length: d,
        semi_major: a,
        semi_minor: b,
        center,
        axes,
        transform,
    })
}

/// Geodesic unit-sphere mesh at one subdivision level.
#[derive(Debug, Clone, PartialEq)]
pub struct TessellatedSphere<T> {
    pub level: usize,
    pub vertices: Vec<Vec3<T>>,
    pub faces: Vec<[u32; 3]>,
    /// Largest gap between the unit sphere and the mesh (chordal sagitta).
    pub alpha: T,
}

impl<T: Real> TessellatedSphere<T> {
    pub fn triangle_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangles(&self) -> impl Iterator<Item = Triangle<T>> + '_ {
        self.faces.iter().map(move |f| {
            Triangle::new(
                self.vertices[f[0] as usize],
                self.vertices[f[1] as usize],
                self.vertices[f[2] as usize],
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereAtlas<T> {
    levels: Vec<TessellatedSphere<T>>,
}

impl<T: Real> SphereAtlas<T> {
    pub fn levels(&self) -> &[TessellatedSphere<T>] {
        &self.levels
    }

    pub fn level(&self, o: usize) -> &TessellatedSphere<T> {
        &self.levels[o]
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn alphas(&self) -> Vec<T> {
        self.levels.iter().map(|s| s.alpha).collect()
    }
}

/// Icosahedron (level 0) refined by recursive 4-way splits with midpoints
/// pushed back onto the sphere; `20 * 4^o` triangles at level `o`.
pub fn build_sphere_atlas<T: Real>(max_level: usize) -> Result<SphereAtlas<T>> {
    if max_level > MAX_ATLAS_LEVEL {
        return Err(Error::invalid(format!(
            "tessellation level {max_level} exceeds the maximum of {MAX_ATLAS_LEVEL}"
        )));
    }
    let (mut vertices, mut faces) = icosahedron::<T>();
    let mut levels = Vec::with_capacity(max_level + 1);
    for level in 0..=max_level {
        if level > 0 {
            (vertices, faces) = subdivide(&vertices, &faces);
        }
        let alpha = mesh_alpha(&vertices, &faces);
        levels.push(TessellatedSphere {
            level,
            vertices: vertices.clone(),
            faces: faces.clone(),
            alpha,
        });
    }
    Ok(SphereAtlas { levels })
}

fn icosahedron<T: Real>() -> (Vec<Vec3<T>>, Vec<[u32; 3]>) {
    let phi = (T::one() + T::lit(5.0).sqrt()) * T::lit(0.5);
    let (o, z) = (T::one(), T::zero());
    let raw = [
        [-o, phi, z],
        [o, phi, z],
        [-o, -phi, z],
        [o, -phi, z],
        [z, -o, phi],
        [z, o, phi],
        [z, -o, -phi],
        [z, o, -phi],
        [phi, z, -o],
        [phi, z, o],
        [-phi, z, -o],
        [-phi, z, o],
    ];
    let vertices = raw
        .iter()
        .map(|v| Vec3::from_array(*v).normalized().expect("nonzero vertex"))
        .collect();
    // Counter-clockwise seen from outside.
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

fn subdivide<T: Real>(vertices: &[Vec3<T>], faces: &[[u32; 3]]) -> (Vec<Vec3<T>>, Vec<[u32; 3]>) {
    let mut out_v = vertices.to_vec();
    let mut out_f = Vec::with_capacity(faces.len() * 4);
    let mut midpoints: HashMap<(u32, u32), u32> = HashMap::with_capacity(faces.len() * 3 / 2);
    let mut midpoint = |i: u32, j: u32, verts: &mut Vec<Vec3<T>>| -> u32 {
        let key = if i < j { (i, j) } else { (j, i) };
        *midpoints.entry(key).or_insert_with(|| {
            let m = (verts[key.0 as usize] + verts[key.1 as usize])
                .normalized()
                .expect("antipodal edge endpoints");
            verts.push(m);
            (verts.len() - 1) as u32
        })
    };
    for &[a, b, c] in faces {
        let ab = midpoint(a, b, &mut out_v);
        let bc = midpoint(b, c, &mut out_v);
        let ca = midpoint(c, a, &mut out_v);
        out_f.push([a, ab, ca]);
        out_f.push([ab, b, bc]);
        out_f.push([ca, bc, c]);
        out_f.push([ab, bc, ca]);
    }
    (out_v, out_f)
}

/// Max over faces of `1 - dist(origin, face plane)`.
fn mesh_alpha<T: Real>(vertices: &[Vec3<T>], faces: &[[u32; 3]]) -> T {
    faces
        .iter()
        .map(|f| {
            let (a, b, c) = (
                vertices[f[0] as usize],
                vertices[f[1] as usize],
                vertices[f[2] as usize],
            );
            let n = (b - a)
                .cross(c - a)
                .normalized()
                .expect("non-degenerate sphere face");
            T::one() - n.dot(a).abs()
        })
        .fold(T::zero(), T::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelChoice {
    pub level: usize,
    /// No level met the threshold; the finest one was used.
    pub saturated: bool,
}

/// Coarsest level `o` with `alpha_o * a < epsilon`, clamped to the finest level.
pub fn select_tessellation_level<T: Real>(
    atlas: &SphereAtlas<T>,
    spheroid: &ProlateSpheroid<T>,
    epsilon: T,
) -> LevelChoice {
    select_level_for_scale(atlas, spheroid.max_scale(), epsilon)
}

pub fn select_level_for_scale<T: Real>(
    atlas: &SphereAtlas<T>,
    scale: T,
    epsilon: T,
) -> LevelChoice {
    match atlas.levels.iter().position(|s| s.alpha * scale < epsilon) {
        Some(level) => LevelChoice {
            level,
            saturated: false,
        },
        None => LevelChoice {
            level: atlas.max_level(),
            saturated: true,
        },
    }
}

/// Unit-sphere vertices mapped onto the spheroid.
pub fn transform_vertices<T: Real>(
    spheroid: &ProlateSpheroid<T>,
    sphere: &TessellatedSphere<T>,
) -> Vec<Vec3<T>> {
    sphere
        .vertices
        .iter()
        .map(|&v| spheroid.transform.apply(v))
        .collect()
}

/// World-space triangles of `sphere` mapped onto the spheroid, in face order.
pub fn transform_triangles<T: Real>(
    spheroid: &ProlateSpheroid<T>,
    sphere: &TessellatedSphere<T>,
) -> Vec<Triangle<T>> {
    let verts = transform_vertices(spheroid, sphere);
    sphere
        .faces
        .iter()
        .map(|f| {
            Triangle::new(
                verts[f[0] as usize],
                verts[f[1] as usize],
                verts[f[2] as usize],
            )
        })
        .collect()
}

/// Whether the shell `|F(y) - d| <= shell_halfwidth` meets `bx`, with
/// `F(y) = |y - focus_a| + |y - focus_b|`.
///
/// `F` is convex, so its maximum over the box is at a corner. The minimum is
/// the focal distance when the focal segment crosses the box; otherwise `F`
/// is smooth on the box and is minimized by cyclic golden-section line searches.
pub fn shell_overlap_oracle<T: Real>(
    spheroid: &ProlateSpheroid<T>,
    bx: &Aabb<T>,
    shell_halfwidth: T,
) -> bool {
    let d = spheroid.path_length;
    let f_max = bx
        .corners()
        .iter()
        .map(|&c| spheroid.path_sum(c))
        .fold(T::neg_infinity(), T::max);
    if d - f_max > shell_halfwidth {
        return false;
    }
    let f_min = min_path_sum(spheroid, bx);
    f_min - d <= shell_halfwidth
}

fn min_path_sum<T: Real>(s: &ProlateSpheroid<T>, bx: &Aabb<T>) -> T {
    let ext = bx.extent();
    let free: Vec<usize> = (0..3).filter(|&k| ext[k] > T::zero()).collect();
    if free.is_empty() {
        return s.path_sum(bx.min);
    }
    if bx.intersects_segment(s.focus_a, s.focus_b) {
        return s.focal_distance();
    }
    let tol = s.path_length * T::lit(1e-9);
    let mut y = bx.center();
    let mut best = s.path_sum(y);
    for _ in 0..200 {
        let before = best;
        for &k in &free {
            let (yk, fk) = golden_section(
                |t| {
                    let mut q = y;
                    set_axis(&mut q, k, t);
                    s.path_sum(q)
                },
                bx.min[k],
                bx.max[k],
                tol,
            );
            if fk < best {
                set_axis(&mut y, k, yk);
                best = fk;
            }
        }
        if before - best <= tol * T::lit(0.01) {
            break;
        }
    }
    best
}

fn set_axis<T: Real>(v: &mut Vec3<T>, k: usize, t: T) {
    match k {
        0 => v.x = t,
        1 => v.y = t,
        _ => v.z = t,
    }
}

/// Minimizes a convex 1-D function on `[lo, hi]`; returns the argmin and value.
fn golden_section<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, tol: T) -> (T, T) {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - (b - a) * inv_phi;
    let mut e = a + (b - a) * inv_phi;
    let (mut fc, mut fe) = (f(c), f(e));
    // F is 2-Lipschitz, so an interval of width tol/4 pins the value to tol/2.
    let width_tol = tol * T::lit(0.25);
    for _ in 0..200 {
        if b - a <= width_tol {
            break;
        }
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + (b - a) * inv_phi;
            fe = f(e);
        }
    }
    let candidates = [(lo, f(lo)), (hi, f(hi)), (c, fc), (e, fe)];
    candidates.into_iter().fold(
        (lo, T::infinity()),
        |acc, cand| if cand.1 < acc.1 { cand } else { acc },
    )
}
