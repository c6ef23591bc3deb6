use rayon::prelude::*;

use crate::scalar::Real;
use crate::voxel::grid::{Accumulators, VoxelGrid};

/// Six-neighbor negative Laplacian `max(0, 6 v - Σ neighbors)` with zero
/// padding, normalized to `[0, 1]` by its maximum.
pub fn laplacian_filter<T: Real>(grid: &VoxelGrid<T>) -> VoxelGrid<T> {
    let geom = *grid.geometry();
    let [nx, ny, nz] = geom.dims;
    let input = grid.values();
    let six = T::lit(6.0);
    let mut out = vec![T::zero(); input.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slab)| {
            for y in 0..ny {
                for x in 0..nx {
                    let i = geom.index(x, y, z);
                    let mut sum = T::zero();
                    if x > 0 {
                        sum += input[i - 1];
                    }
                    if x + 1 < nx {
                        sum += input[i + 1];
                    }
                    if y > 0 {
                        sum += input[i - nx];
                    }
                    if y + 1 < ny {
                        sum += input[i + nx];
                    }
                    if z > 0 {
                        sum += input[i - nx * ny];
                    }
                    if z + 1 < nz {
                        sum += input[i + nx * ny];
                    }
                    slab[x + nx * y] = (six * input[i] - sum).max(T::zero());
                }
            }
        });
    let m = out.iter().copied().fold(T::zero(), T::max);
    if m > T::zero() {
        out.iter_mut().for_each(|v| *v /= m);
    }
    VoxelGrid::from_parts(geom, Accumulators::Float(out)).expect("filter output matches geometry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Vec3};
    use crate::voxel::grid::AccumulatorMode;

    type V = Vec3<f64>;

    fn grid(n: usize) -> VoxelGrid<f64> {
        VoxelGrid::new(
            &Aabb::new(V::zero(), V::splat(n as f64)),
            n,
            AccumulatorMode::Float,
        )
        .unwrap()
    }

    #[test]
    fn constant_grid_has_zero_interior() {
        let mut g = grid(5);
        for i in 0..g.len() {
            g.add_float(i, 3.0).unwrap();
        }
        let f = laplacian_filter(&g);
        let geom = *f.geometry();
        for z in 1..4 {
            for y in 1..4 {
                for x in 1..4 {
                    assert_eq!(f.value(geom.index(x, y, z)), 0.0);
                }
            }
        }
        // Boundary voxels see zero padding and respond.
        assert!(f.value(0) > 0.0);
    }

    #[test]
    fn impulse_response() {
        let mut g = grid(5);
        let geom = *g.geometry();
        let c = geom.index(2, 2, 2);
        g.add_float(c, 1.0).unwrap();
        let f = laplacian_filter(&g);
        assert_eq!(f.value(c), 1.0);
        assert_eq!(f.value(geom.index(1, 2, 2)), 0.0);
        assert_eq!(f.value(geom.index(2, 3, 2)), 0.0);
        assert_eq!(f.count_nonzero(), 1);
    }

    #[test]
    fn impulse_before_normalization_is_six() {
        // Two impulses of different height: the weaker one reads 6*0.5/6 after normalization.
        let mut g = grid(7);
        let geom = *g.geometry();
        g.add_float(geom.index(1, 1, 1), 1.0).unwrap();
        g.add_float(geom.index(5, 5, 5), 0.5).unwrap();
        let f = laplacian_filter(&g);
        assert_eq!(f.value(geom.index(5, 5, 5)), 0.5);
    }

    #[test]
    fn plane_response_peaks_on_plane() {
        let mut g = grid(8);
        let geom = *g.geometry();
        for y in 0..8 {
            for x in 0..8 {
                g.add_float(geom.index(x, y, 4), 1.0).unwrap();
            }
        }
        let f = laplacian_filter(&g);
        // Interior plane voxels score 6 - 4 = 2; corners see only two in-plane neighbours and score 4.
        assert_eq!(f.value(geom.index(3, 3, 4)), 0.5);
        assert_eq!(f.value(geom.index(0, 0, 4)), 1.0);
        for i in 0..f.len() {
            let on_plane = geom.coords(i)[2] == 4;
            assert_eq!(f.value(i) > 0.0, on_plane, "voxel {i}");
        }
    }

    #[test]
    fn zero_grid_stays_zero_and_output_in_unit_range() {
        let g = grid(4);
        let f = laplacian_filter(&g);
        assert!(f.values().iter().all(|&v| v == 0.0));
        let mut h = grid(4);
        for i in 0..h.len() {
            h.add_float(i, (i % 7) as f64).unwrap();
        }
        let f = laplacian_filter(&h);
        assert!(f.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(f.max_value(), 1.0);
    }

    #[test]
    fn integer_input_supported() {
        let mut g = VoxelGrid::<f64>::new(
            &Aabb::new(V::zero(), V::splat(3.0)),
            3,
            AccumulatorMode::Integer,
        )
        .unwrap();
        let c = g.geometry().index(1, 1, 1);
        g.add_integer(c, 10).unwrap();
        let f = laplacian_filter(&g);
        assert_eq!(f.mode(), AccumulatorMode::Float);
        assert_eq!(f.value(c), 1.0);
    }
}
