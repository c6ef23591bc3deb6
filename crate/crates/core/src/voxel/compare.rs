use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::voxel::grid::{GridGeometry, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridComparison<T> {
    pub mse: T,
    pub pearson: T,
    /// Chebyshev distance between the two argmax voxels.
    pub peak_offset: usize,
}

pub fn check_same_geometry<T: Real>(a: &GridGeometry<T>, b: &GridGeometry<T>) -> Result<()> {
    if a.dims != b.dims || a.min != b.min || a.max != b.max {
        return Err(Error::GeometryMismatch(format!(
            "{:?} [{:?}, {:?}] vs {:?} [{:?}, {:?}]",
            a.dims, a.min, a.max, b.dims, b.min, b.max
        )));
    }
    Ok(())
}

/// MSE and Pearson correlation of the max-normalized grids plus the peak displacement.
pub fn grid_compare<T: Real>(a: &VoxelGrid<T>, b: &VoxelGrid<T>) -> Result<GridComparison<T>> {
    check_same_geometry(a.geometry(), b.geometry())?;
    let x = a.normalized_values();
    let y = b.normalized_values();
    let n = T::from_usize_lossy(x.len());
    let mse = x
        .iter()
        .zip(&y)
        .map(|(p, q)| (*p - *q) * (*p - *q))
        .sum::<T>()
        / n;
    let pearson = pearson(&x, &y);
    let ca = a.geometry().coords(a.argmax());
    let cb = b.geometry().coords(b.argmax());
    let peak_offset = (0..3).map(|k| ca[k].abs_diff(cb[k])).max().unwrap_or(0);
    Ok(GridComparison {
        mse,
        pearson,
        peak_offset,
    })
}

/// Pearson correlation; two constant inputs correlate 1 if equal and 0 otherwise.
pub fn pearson<T: Real>(x: &[T], y: &[T]) -> T {
    if x == y {
        return T::one();
    }
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (p, q) in x.iter().zip(y) {
        let (dx, dy) = (*p - mx, *q - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return T::zero();
    }
    (sxy / (sxx.sqrt() * syy.sqrt()))
        .max(-T::one())
        .min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Vec3};
    use crate::voxel::grid::AccumulatorMode;

    type V = Vec3<f64>;

    fn ramp(scale: f64) -> VoxelGrid<f64> {
        let mut g = VoxelGrid::new(
            &Aabb::new(V::zero(), V::splat(1.0)),
            4,
            AccumulatorMode::Float,
        )
        .unwrap();
        for i in 0..g.len() {
            g.add_float(i, scale * ((i * 37) % 11) as f64).unwrap();
        }
        g
    }

    #[test]
    fn identical_grids() {
        let a = ramp(1.0);
        let c = grid_compare(&a, &a).unwrap();
        assert_eq!(c.mse, 0.0);
        assert!((c.pearson - 1.0).abs() < 1e-12);
        assert_eq!(c.peak_offset, 0);
    }

    #[test]
    fn scale_invariant() {
        let c = grid_compare(&ramp(1.0), &ramp(2.0)).unwrap();
        assert_eq!(c.mse, 0.0);
        assert!((c.pearson - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_grids_compare_equal() {
        let z = ramp(0.0);
        let c = grid_compare(&z, &z).unwrap();
        assert_eq!((c.mse, c.pearson, c.peak_offset), (0.0, 1.0, 0));
    }

    #[test]
    fn mismatch_rejected() {
        let a = ramp(1.0);
        let b = VoxelGrid::new(
            &Aabb::new(V::zero(), V::splat(1.0)),
            5,
            AccumulatorMode::Float,
        )
        .unwrap();
        assert!(matches!(
            grid_compare(&a, &b),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn peak_offset_is_chebyshev() {
        let mut a = VoxelGrid::new(
            &Aabb::new(V::zero(), V::splat(1.0)),
            8,
            AccumulatorMode::Float,
        )
        .unwrap();
        let mut b = a.clone();
        let g = *a.geometry();
        a.add_float(g.index(1, 2, 3), 1.0).unwrap();
        b.add_float(g.index(4, 3, 2), 1.0).unwrap();
        assert_eq!(grid_compare(&a, &b).unwrap().peak_offset, 3);
    }

    #[test]
    fn anticorrelated() {
        let x = [0.0f64, 1.0, 2.0];
        let y = [2.0, 1.0, 0.0];
        assert!((pearson(&x, &y) + 1.0).abs() < 1e-15);
    }
}
