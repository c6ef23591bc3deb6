//! Thin triangle voxelization by dominant-axis projection.
//!
//! Each triangle is projected onto the grid plane orthogonal to the largest
//! component of its normal. Every projected cell whose center falls inside the
//! triangle emits the voxel at the plane depth above that center. Centers on an
//! edge follow a top-left rule so two triangles sharing an edge never both emit
//! the same cell.

use crate::geometry::Triangle;
use crate::scalar::Real;
use crate::voxel::grid::GridGeometry;

/// Voxel indices covered by `tri`.
pub fn rasterize_triangle<T: Real>(geom: &GridGeometry<T>, tri: &Triangle<T>) -> Vec<usize> {
    let mut out = Vec::new();
    rasterize_triangle_with(geom, tri, |i| out.push(i));
    out
}

/// Calls `emit` once per covered voxel index.
pub fn rasterize_triangle_with<T: Real>(
    geom: &GridGeometry<T>,
    tri: &Triangle<T>,
    emit: impl FnMut(usize),
) {
    let q = [
        geom.to_voxel_space(tri.v0),
        geom.to_voxel_space(tri.v1),
        geom.to_voxel_space(tri.v2),
    ];
    rasterize_voxel_space(geom.dims, q, emit);
}

/// Same as [`rasterize_triangle_with`] with vertices already in voxel coordinates.
pub(crate) fn rasterize_voxel_space<T: Real>(
    dims: [usize; 3],
    q: [crate::geometry::Vec3<T>; 3],
    mut emit: impl FnMut(usize),
) {
    rasterize_into(dims, q, &mut emit);
}

fn rasterize_into<T: Real, F: FnMut(usize)>(
    dims: [usize; 3],
    q: [crate::geometry::Vec3<T>; 3],
    emit: &mut F,
) {
    // Triangles entirely outside the grid along any axis emit nothing.
    for (axis, &len) in dims.iter().enumerate() {
        let lo = q[0][axis].min(q[1][axis]).min(q[2][axis]);
        let hi = q[0][axis].max(q[1][axis]).max(q[2][axis]);
        if hi < T::zero() || lo >= T::from_usize_lossy(len) {
            return;
        }
    }
    let n = (q[1] - q[0]).cross(q[2] - q[0]);
    let k = n.dominant_axis();
    let nk = n[k].as_f64();
    if nk == 0.0 || !nk.is_finite() {
        return;
    }
    let (i, j) = ((k + 1) % 3, (k + 2) % 3);

    // Projected vertices on a fixed-point lattice. Integer edge functions make
    // the coverage test exact, so triangles sharing an edge never both claim
    // or both miss a cell center.
    let mut v = [[0i64; 2]; 3];
    for (dst, src) in v.iter_mut().zip(&q) {
        for (d, axis) in dst.iter_mut().zip([i, j]) {
            let x = src[axis].as_f64() * SUBCELLS as f64;
            if !x.is_finite() {
                return;
            }
            if x.abs() >= MAX_FIXED {
                // Far outside the grid: halve the triangle until the lattice
                // arithmetic cannot overflow.
                let m = [
                    (q[0] + q[1]) * T::lit(0.5),
                    (q[1] + q[2]) * T::lit(0.5),
                    (q[2] + q[0]) * T::lit(0.5),
                ];
                for t in [
                    [q[0], m[0], m[2]],
                    [m[0], q[1], m[1]],
                    [m[2], m[1], q[2]],
                    [m[0], m[1], m[2]],
                ] {
                    rasterize_into(dims, t, emit);
                }
                return;
            }
            // Rounds half away from zero without a libm call.
            *d = (x + 0.5f64.copysign(x)) as i64;
        }
    }
    let area =
        (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0]);
    if area == 0 {
        return;
    }
    if area < 0 {
        v.swap(1, 2);
    }

    let Some((ri0, ri1)) = cell_range(v, 0, dims[i]) else {
        return;
    };
    let Some((rj0, rj1)) = cell_range(v, 1, dims[j]) else {
        return;
    };

    // Depth of the unsnapped plane above a projected point, in voxel units.
    let (ni, nj) = (n[i].as_f64(), n[j].as_f64());
    let origin = [q[0][i].as_f64(), q[0][j].as_f64(), q[0][k].as_f64()];
    let (kx, ky) = (-ni / nk, -nj / nk);
    let k0 = origin[2] - kx * origin[0] - ky * origin[1];
    let depth_len = dims[k] as f64;
    let stride = [1, dims[0], dims[0] * dims[1]];

    // Lines run along the axis with the smaller memory stride.
    let along_i = stride[i] < stride[j];
    let (lines, cells) = if along_i {
        ((rj0, rj1), (ri0, ri1))
    } else {
        ((ri0, ri1), (rj0, rj1))
    };
    let (line_stride, cell_stride) = if along_i {
        (stride[j], stride[i])
    } else {
        (stride[i], stride[j])
    };
    let (line_k, cell_k) = if along_i { (ky, kx) } else { (kx, ky) };

    let mut bounds = [
        EdgeBound::new(v[0], v[1], along_i, lines.0),
        EdgeBound::new(v[1], v[2], along_i, lines.0),
        EdgeBound::new(v[2], v[0], along_i, lines.0),
    ];
    for line in lines.0..=lines.1 {
        let mut lo = cells.0 as i64;
        let mut hi = cells.1 as i64;
        for b in &bounds {
            match b.current() {
                Span::All => {}
                Span::Empty => hi = -1,
                Span::From(c) => lo = lo.max(c),
                Span::UpTo(c) => hi = hi.min(c),
            }
        }
        if lo <= hi {
            let mut depth = k0 + line_k * (line as f64 + 0.5) + cell_k * (lo as f64 + 0.5);
            let mut index = line * line_stride + lo as usize * cell_stride;
            for _ in lo..=hi {
                // Truncation equals floor for the non-negative depths kept here.
                if depth >= 0.0 && depth < depth_len {
                    emit(index + depth as usize * stride[k]);
                }
                depth += cell_k;
                index += cell_stride;
            }
        }
        bounds.iter_mut().for_each(EdgeBound::advance);
    }
}

/// Sub-cell resolution of the fixed-point lattice.
const SUBCELLS: i64 = 256;
const HALF: i64 = SUBCELLS / 2;
/// Bound on projected lattice coordinates. Edge function values stay below
/// `2^60`, within `i64`.
const MAX_FIXED: f64 = (1u64 << 28) as f64;

/// Cells whose centers lie within the vertices' extent on `axis`, clamped to `0..len`.
fn cell_range(v: [[i64; 2]; 3], axis: usize, len: usize) -> Option<(usize, usize)> {
    let lo = v.iter().map(|p| p[axis]).min()?;
    let hi = v.iter().map(|p| p[axis]).max()?;
    let first = ceil_div(lo - HALF, SUBCELLS).max(0);
    let last = (hi - HALF).div_euclid(SUBCELLS).min(len as i64 - 1);
    (first <= last).then(|| (first as usize, last as usize))
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -(-a).div_euclid(b)
}

/// Floor quotient and non-negative remainder for `m > 0`.
#[inline]
fn div_rem(a: i64, m: i64) -> (i64, i64) {
    let q = a.div_euclid(m);
    (q, a - q * m)
}

enum Span {
    All,
    Empty,
    From(i64),
    UpTo(i64),
}

/// Range of cells on the current line inside one directed edge of a
/// counter-clockwise triangle.
///
/// At cell `c` of line `l` the edge function is `f(l) - g * c`, and `f`
/// grows by a constant per line. The cell is covered when the value is
/// positive, or zero on a top or left edge. The bound `f / |g|` is tracked
/// as an exact quotient and remainder, so no division happens per line.
struct EdgeBound {
    f: i64,
    step: i64,
    g: i64,
    inclusive: bool,
    quotient: i64,
    remainder: i64,
    step_quotient: i64,
    step_remainder: i64,
}

impl EdgeBound {
    fn new(p: [i64; 2], q: [i64; 2], along_i: bool, first_line: usize) -> Self {
        let d = [q[0] - p[0], q[1] - p[1]];
        let inclusive = d[1] > 0 || (d[1] == 0 && d[0] < 0);
        let line = first_line as i64 * SUBCELLS + HALF;
        // Edge function d0 (y - p1) - d1 (x - p0) at cell centers.
        let (f, step, g) = if along_i {
            (
                d[0] * (line - p[1]) - d[1] * (HALF - p[0]),
                d[0] * SUBCELLS,
                d[1] * SUBCELLS,
            )
        } else {
            (
                d[0] * (HALF - p[1]) - d[1] * (line - p[0]),
                -d[1] * SUBCELLS,
                -d[0] * SUBCELLS,
            )
        };
        // For g < 0 the bound is on -f.
        let (tracked, tracked_step) = if g > 0 { (f, step) } else { (-f, -step) };
        let m = g.abs().max(1);
        let (quotient, remainder) = div_rem(tracked, m);
        let (step_quotient, step_remainder) = div_rem(tracked_step, m);
        Self {
            f,
            step,
            g,
            inclusive,
            quotient,
            remainder,
            step_quotient,
            step_remainder,
        }
    }

    fn current(&self) -> Span {
        let (q, exact) = (self.quotient, self.remainder == 0);
        match self.g.signum() {
            0 if self.f > 0 || (self.f == 0 && self.inclusive) => Span::All,
            0 => Span::Empty,
            // c < f / g, or c <= f / g on an inclusive edge.
            1 => Span::UpTo(if exact && !self.inclusive { q - 1 } else { q }),
            // c > -f / |g|, or c >= -f / |g| on an inclusive edge.
            _ => Span::From(if exact && self.inclusive { q } else { q + 1 }),
        }
    }

    fn advance(&mut self) {
        self.f += self.step;
        self.quotient += self.step_quotient;
        self.remainder += self.step_remainder;
        let m = self.g.abs().max(1);
        if self.remainder >= m {
            self.remainder -= m;
            self.quotient += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Vec3};
    use crate::voxel::grid::DEFAULT_MAX_VOXELS;
    use proptest::prelude::*;

    type V = Vec3<f64>;

    fn unit_grid(n: usize) -> GridGeometry<f64> {
        GridGeometry::fit(
            &Aabb::new(V::zero(), V::splat(n as f64)),
            n,
            DEFAULT_MAX_VOXELS,
        )
        .unwrap()
    }

    #[test]
    fn square_in_center_plane_covers_nine_cells_once() {
        let g = unit_grid(8);
        let z = 2.5;
        let t1 = Triangle::new(
            V::new(1.0, 1.0, z),
            V::new(4.0, 1.0, z),
            V::new(4.0, 4.0, z),
        );
        let t2 = Triangle::new(
            V::new(1.0, 1.0, z),
            V::new(4.0, 4.0, z),
            V::new(1.0, 4.0, z),
        );
        let mut all = rasterize_triangle(&g, &t1);
        all.extend(rasterize_triangle(&g, &t2));
        let mut uniq = all.clone();
        uniq.sort_unstable();
        uniq.dedup();
        // The shared diagonal passes through three cell centers; each is emitted once.
        assert_eq!(all.len(), 9);
        assert_eq!(uniq.len(), 9);
        for i in uniq {
            let [x, y, zz] = g.coords(i);
            assert_eq!(zz, 2);
            assert!((1..4).contains(&x) && (1..4).contains(&y));
        }
    }

    #[test]
    fn opposite_winding_gives_same_cells() {
        let g = unit_grid(8);
        let t = Triangle::new(
            V::new(0.3, 0.2, 1.7),
            V::new(6.1, 1.4, 2.2),
            V::new(2.2, 5.9, 3.1),
        );
        let r = Triangle::new(t.v0, t.v2, t.v1);
        assert_eq!(rasterize_triangle(&g, &t), rasterize_triangle(&g, &r));
    }

    #[test]
    fn degenerate_triangle_is_empty() {
        let g = unit_grid(4);
        let p = V::new(1.5, 1.5, 1.5);
        assert!(rasterize_triangle(&g, &Triangle::new(p, p, p)).is_empty());
        let line = Triangle::new(
            V::new(0.5, 0.5, 0.5),
            V::new(2.5, 2.5, 2.5),
            V::new(3.5, 3.5, 3.5),
        );
        assert!(rasterize_triangle(&g, &line).len() <= 1);
    }

    #[test]
    fn outside_grid_is_discarded() {
        let g = unit_grid(4);
        let t = Triangle::new(
            V::new(10.0, 10.0, 1.0),
            V::new(12.0, 10.0, 1.0),
            V::new(10.0, 12.0, 1.0),
        );
        assert!(rasterize_triangle(&g, &t).is_empty());
        // Plane above the grid: in-range columns but out-of-range depth.
        let t = Triangle::new(
            V::new(0.0, 0.0, 9.0),
            V::new(4.0, 0.0, 9.0),
            V::new(0.0, 4.0, 9.0),
        );
        assert!(rasterize_triangle(&g, &t).is_empty());
    }

    #[test]
    fn tilted_triangle_uses_dominant_axis() {
        let g = unit_grid(8);
        // Normal mostly along x: projected onto the y-z plane.
        let t = Triangle::new(
            V::new(3.2, 0.5, 0.5),
            V::new(3.6, 6.5, 0.5),
            V::new(3.9, 0.5, 6.5),
        );
        let cells = rasterize_triangle(&g, &t);
        assert!(!cells.is_empty());
        let mut cols: Vec<(usize, usize)> = cells
            .iter()
            .map(|&i| {
                let c = g.coords(i);
                (c[1], c[2])
            })
            .collect();
        let before = cols.len();
        cols.sort_unstable();
        cols.dedup();
        assert_eq!(before, cols.len(), "one voxel per projected column");
    }

    proptest! {
        #[test]
        fn split_parallelogram_is_watertight(
            a in prop::array::uniform2(0.0f64..12.0),
            u in prop::array::uniform2(-6.0f64..6.0),
            v in prop::array::uniform2(-6.0f64..6.0),
            z in 0.1f64..7.9,
            tilt in -0.4f64..0.4,
        ) {
            let g = unit_grid(16);
            let p = |s: f64, t: f64| {
                let (x, y) = (a[0] + s * u[0] + t * v[0], a[1] + s * u[1] + t * v[1]);
                V::new(x, y, z + tilt * (x - a[0]))
            };
            let (p0, p1, p2, p3) = (p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0));
            let cells = |t1: Triangle<f64>, t2: Triangle<f64>| {
                let mut all = rasterize_triangle(&g, &t1);
                all.extend(rasterize_triangle(&g, &t2));
                let n = all.len();
                all.sort_unstable();
                all.dedup();
                (n, all)
            };
            let (n1, c1) = cells(Triangle::new(p0, p1, p2), Triangle::new(p0, p2, p3));
            let (n2, c2) = cells(Triangle::new(p0, p1, p3), Triangle::new(p1, p2, p3));
            prop_assert_eq!(n1, c1.len());
            prop_assert_eq!(n2, c2.len());
            prop_assert_eq!(c1, c2);
        }

        #[test]
        fn emitted_voxels_hug_the_plane(
            a in prop::array::uniform3(0.0f64..16.0),
            b in prop::array::uniform3(0.0f64..16.0),
            c in prop::array::uniform3(0.0f64..16.0),
        ) {
            let g = unit_grid(16);
            let t = Triangle::new(V::from_array(a), V::from_array(b), V::from_array(c));
            let n = t.normal();
            prop_assume!(n.norm() > 1e-6);
            let n = n / n.norm();
            let bound = 3f64.sqrt() / 2.0 + 1e-9;
            for i in rasterize_triangle(&g, &t) {
                let center = g.voxel_center(g.coords(i));
                prop_assert!((center - t.v0).dot(n).abs() <= bound);
            }
        }
    }
}
