use crate::ellipsoid::{
    select_tessellation_level, ProlateSpheroid, SphereAtlas, TessellatedSphere,
};
use crate::error::Result;
use crate::geometry::Vec3;
use crate::scalar::Real;
use crate::voxel::grid::{integer_weight, AccumulatorMode, GridGeometry, VoxelGrid};
use crate::voxel::raster::rasterize_voxel_space;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SplatStats {
    pub level: usize,
    pub saturated: bool,
    pub triangles: usize,
    /// Accumulator additions performed.
    pub voxel_touches: usize,
}

/// Reusable per-worker buffers for voxelizing spheroids.
#[derive(Debug, Clone, Default)]
pub struct SplatScratch<T> {
    vertices: Vec<Vec3<T>>,
    visited: Vec<usize>,
    marks: Vec<u64>,
    collected: Vec<usize>,
}

impl<T: Real> SplatScratch<T> {
    pub fn new() -> Self {
        Self {
            vertices: Vec::new(),
            visited: Vec::new(),
            marks: Vec::new(),
            collected: Vec::new(),
        }
    }

    /// Voxels from the last [`collect_spheroid_voxels`] call.
    pub fn touched(&self) -> &[usize] {
        &self.collected
    }
}

/// Rasterizes every triangle of `sphere` mapped onto `spheroid` and calls
/// `visit` for each emitted voxel index, in emission order. With `dedup`
/// only the first emission of every voxel is visited. Returns the number of
/// visits.
pub fn visit_spheroid_voxels<T: Real, F: FnMut(usize)>(
    geom: &GridGeometry<T>,
    spheroid: &ProlateSpheroid<T>,
    sphere: &TessellatedSphere<T>,
    dedup: bool,
    scratch: &mut SplatScratch<T>,
    mut visit: F,
) -> usize {
    let bb = spheroid.bounding_box();
    if (0..3).any(|k| bb.max[k] < geom.min[k] || bb.min[k] > geom.max[k]) {
        return 0;
    }
    scratch.vertices.clear();
    let inv = T::one() / geom.voxel_size();
    scratch.vertices.extend(
        sphere
            .vertices
            .iter()
            .map(|&u| (spheroid.transform.apply(u) - geom.min) * inv),
    );

    let SplatScratch {
        vertices,
        visited,
        marks,
        ..
    } = scratch;
    let faces = sphere.faces.iter().map(|f| {
        [
            vertices[f[0] as usize],
            vertices[f[1] as usize],
            vertices[f[2] as usize],
        ]
    });
    if !dedup {
        let mut count = 0;
        for q in faces {
            rasterize_voxel_space(geom.dims, q, |i| {
                count += 1;
                visit(i);
            });
        }
        return count;
    }
    let words = geom.len().div_ceil(64);
    if marks.len() < words {
        marks.resize(words, 0);
    }
    visited.clear();
    for q in faces {
        rasterize_voxel_space(geom.dims, q, |i| {
            let word = &mut marks[i / 64];
            let bit = 1u64 << (i % 64);
            if *word & bit == 0 {
                *word |= bit;
                visited.push(i);
                visit(i);
            }
        });
    }
    for &i in visited.iter() {
        marks[i / 64] = 0;
    }
    visited.len()
}

/// Like [`visit_spheroid_voxels`] but stores the visited indices in
/// `scratch`, readable through [`SplatScratch::touched`].
pub fn collect_spheroid_voxels<T: Real>(
    geom: &GridGeometry<T>,
    spheroid: &ProlateSpheroid<T>,
    sphere: &TessellatedSphere<T>,
    dedup: bool,
    scratch: &mut SplatScratch<T>,
) {
    let mut out = std::mem::take(&mut scratch.collected);
    out.clear();
    visit_spheroid_voxels(geom, spheroid, sphere, dedup, scratch, |i| out.push(i));
    scratch.collected = out;
}

/// Voxelizes one spheroid into `grid`, adding `weight` per covered voxel
/// (once per voxel when `dedup`, once per triangle emission otherwise).
///
/// The tessellation level is the coarsest with `alpha_o * a < epsilon`.
pub fn splat_ellipsoid<T: Real>(
    grid: &mut VoxelGrid<T>,
    spheroid: &ProlateSpheroid<T>,
    weight: T,
    atlas: &SphereAtlas<T>,
    epsilon: T,
    dedup: bool,
) -> Result<SplatStats> {
    let choice = select_tessellation_level(atlas, spheroid, epsilon);
    let sphere = atlas.level(choice.level);
    let mut stats = SplatStats {
        level: choice.level,
        saturated: choice.saturated,
        triangles: sphere.triangle_count(),
        voxel_touches: 0,
    };
    let int_weight = match grid.mode() {
        AccumulatorMode::Integer => Some(integer_weight(weight)?),
        AccumulatorMode::Float => None,
    };
    if weight == T::zero() {
        return Ok(stats);
    }
    let mut scratch = SplatScratch::new();
    collect_spheroid_voxels(grid.geometry(), spheroid, sphere, dedup, &mut scratch);
    for &i in scratch.touched() {
        match int_weight {
            Some(w) => grid.add_integer(i, w)?,
            None => grid.add_float(i, weight)?,
        }
    }
    stats.voxel_touches = scratch.touched().len();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::{build_sphere_atlas, ellipsoid_from_measurement, shell_overlap_oracle};
    use crate::error::Error;
    use crate::geometry::Aabb;

    type V = Vec3<f64>;

    fn setup(mode: AccumulatorMode) -> (VoxelGrid<f64>, SphereAtlas<f64>, ProlateSpheroid<f64>) {
        let grid = VoxelGrid::new(&Aabb::new(V::splat(-1.5), V::splat(1.5)), 32, mode).unwrap();
        let atlas = build_sphere_atlas(5).unwrap();
        let s =
            ellipsoid_from_measurement(V::new(-0.5, 0.0, 0.0), V::new(0.5, 0.0, 0.0), 2.2).unwrap();
        (grid, atlas, s)
    }

    #[test]
    fn zero_weight_leaves_grid_unchanged() {
        let (mut grid, atlas, s) = setup(AccumulatorMode::Integer);
        let before = grid.clone();
        let eps = grid.geometry().voxel_size();
        let st = splat_ellipsoid(&mut grid, &s, 0.0, &atlas, eps, true).unwrap();
        assert_eq!(grid, before);
        assert_eq!(st.voxel_touches, 0);
    }

    #[test]
    fn dedup_adds_weight_once() {
        let (mut grid, atlas, s) = setup(AccumulatorMode::Integer);
        let eps = grid.geometry().voxel_size();
        let st = splat_ellipsoid(&mut grid, &s, 7.0, &atlas, eps, true).unwrap();
        assert!(st.voxel_touches > 0);
        assert_eq!(grid.count_nonzero(), st.voxel_touches);
        assert!(grid.values().iter().all(|&v| v == 0.0 || v == 7.0));
        assert!(!st.saturated);
    }

    #[test]
    fn without_dedup_shared_edges_can_double_count() {
        let (mut a, atlas, s) = setup(AccumulatorMode::Integer);
        let mut b = a.clone();
        let eps = a.geometry().voxel_size();
        let sa = splat_ellipsoid(&mut a, &s, 1.0, &atlas, eps, true).unwrap();
        let sb = splat_ellipsoid(&mut b, &s, 1.0, &atlas, eps, false).unwrap();
        assert!(sb.voxel_touches >= sa.voxel_touches);
        assert_eq!(a.count_nonzero(), b.count_nonzero());
        let total: f64 = b.values().iter().sum();
        assert_eq!(total as usize, sb.voxel_touches);
    }

    #[test]
    fn integer_weight_validated() {
        let (mut grid, atlas, s) = setup(AccumulatorMode::Integer);
        assert!(matches!(
            splat_ellipsoid(&mut grid, &s, 300.0, &atlas, 0.1, true),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn splat_lies_inside_the_oracle_shell() {
        let (mut grid, atlas, s) = setup(AccumulatorMode::Integer);
        let geom = *grid.geometry();
        splat_ellipsoid(&mut grid, &s, 1.0, &atlas, geom.voxel_size(), true).unwrap();
        let hw = geom.half_diagonal();
        let oracle: Vec<bool> = (0..geom.len())
            .map(|i| shell_overlap_oracle(&s, &geom.voxel_box(geom.coords(i)), hw))
            .collect();
        let n = geom.dims[0] as i64;
        for i in 0..geom.len() {
            let hit = grid.value(i) > 0.0;
            if hit {
                assert!(oracle[i], "splat voxel {i} outside the shell");
            }
            if hit != oracle[i] {
                let [x, y, z] = geom.coords(i).map(|c| c as i64);
                let near_boundary = (-1..=1).any(|dz| {
                    (-1..=1).any(|dy| {
                        (-1..=1).any(|dx| {
                            let c = [x + dx, y + dy, z + dz];
                            c.iter().all(|&v| (0..n).contains(&v))
                                && oracle[geom.index(c[0] as usize, c[1] as usize, c[2] as usize)]
                                    != oracle[i]
                        })
                    })
                });
                assert!(
                    near_boundary,
                    "disagreement at {i} is not next to the shell boundary"
                );
            }
        }
    }

    #[test]
    fn scratch_marks_are_cleared_between_spheroids() {
        let (grid, atlas, s) = setup(AccumulatorMode::Integer);
        let mut scratch = SplatScratch::new();
        let sphere = atlas.level(3);
        collect_spheroid_voxels(grid.geometry(), &s, sphere, true, &mut scratch);
        let first = scratch.touched().to_vec();
        collect_spheroid_voxels(grid.geometry(), &s, sphere, true, &mut scratch);
        assert_eq!(first, scratch.touched());
    }
}
