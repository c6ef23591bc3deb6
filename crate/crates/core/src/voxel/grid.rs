use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::scalar::Real;

/// Default cap on `Nx * Ny * Nz`.
pub const DEFAULT_MAX_VOXELS: u64 = 1 << 28;

/// Largest integer weight a single splat may add.
pub const MAX_INTEGER_WEIGHT: u32 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccumulatorMode {
    /// 32-bit unsigned counters with weights in `0..=255`.
    Integer,
    Float,
}

/// Placement of a cubic-voxel grid: `dims` voxels spanning `[min, max]`, x fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
    pub dims: [usize; 3],
    voxel_size: T,
}

impl<T: Real> GridGeometry<T> {
    /// Fits `n` cubic voxels along the longest axis of `bounds`; shorter axes get
    /// `ceil(extent / edge)` voxels and are padded symmetrically.
    pub fn fit(bounds: &Aabb<T>, n: usize, max_voxels: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("linear resolution must be at least 1"));
        }
        if !bounds.is_nonempty() {
            return Err(Error::invalid(format!(
                "grid bounds must be non-empty, got {bounds:?}"
            )));
        }
        let ext = bounds.extent();
        let longest = ext.x.max(ext.y).max(ext.z);
        let edge = longest / T::from_usize_lossy(n);
        let mut dims = [0usize; 3];
        for k in 0..3 {
            dims[k] = if ext[k] == longest {
                n
            } else {
                let c = (ext[k] / edge - T::lit(1e-9)).ceil();
                c.to_usize().unwrap_or(usize::MAX).max(1)
            };
        }
        let requested = dims.iter().map(|&d| d as u128).product::<u128>();
        if requested > max_voxels as u128 {
            return Err(Error::ResolutionOverflow {
                requested,
                cap: max_voxels,
            });
        }
        let center = bounds.center();
        let half = |k: usize| T::from_usize_lossy(dims[k]) * edge * T::lit(0.5);
        let halfv = Vec3::new(half(0), half(1), half(2));
        Self::from_bounds(center - halfv, center + halfv, dims)
    }

    /// Geometry with explicit corners; the voxel edge is taken along x.
    pub fn from_bounds(min: Vec3<T>, max: Vec3<T>, dims: [usize; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        if !Aabb::new(min, max).is_nonempty() {
            return Err(Error::invalid("grid bounds must be non-empty"));
        }
        let voxel_size = (max.x - min.x) / T::from_usize_lossy(dims[0]);
        Ok(Self {
            min,
            max,
            dims,
            voxel_size,
        })
    }

    pub fn voxel_size(&self) -> T {
        self.voxel_size
    }

    pub fn bounds(&self) -> Aabb<T> {
        Aabb::new(self.min, self.max)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let yz = index / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    pub fn voxel_center(&self, c: [usize; 3]) -> Vec3<T> {
        let h = T::lit(0.5);
        self.min
            + Vec3::new(
                T::from_usize_lossy(c[0]) + h,
                T::from_usize_lossy(c[1]) + h,
                T::from_usize_lossy(c[2]) + h,
            ) * self.voxel_size
    }

    pub fn voxel_box(&self, c: [usize; 3]) -> Aabb<T> {
        let lo = self.min
            + Vec3::new(
                T::from_usize_lossy(c[0]),
                T::from_usize_lossy(c[1]),
                T::from_usize_lossy(c[2]),
            ) * self.voxel_size;
        Aabb::new(lo, lo + Vec3::splat(self.voxel_size))
    }

    /// Continuous voxel coordinates: voxel `i` covers `[i, i + 1)`.
    #[inline]
    pub fn to_voxel_space(&self, p: Vec3<T>) -> Vec3<T> {
        (p - self.min) / self.voxel_size
    }

    /// Voxel containing `p`, if inside the grid.
    pub fn voxel_of(&self, p: Vec3<T>) -> Option<[usize; 3]> {
        let q = self.to_voxel_space(p);
        let mut out = [0usize; 3];
        for k in 0..3 {
            let f = q[k].floor();
            if !(f >= T::zero() && f < T::from_usize_lossy(self.dims[k])) {
                return None;
            }
            out[k] = f.to_usize()?;
        }
        Some(out)
    }

    /// Half the voxel diagonal, `sqrt(3)/2 * edge`.
    pub fn half_diagonal(&self) -> T {
        self.voxel_size * T::lit(3f64.sqrt() * 0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Accumulators<T> {
    Integer(Vec<u32>),
    Float(Vec<T>),
}

/// Dense confidence volume.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<T> {
    geometry: GridGeometry<T>,
    values: Accumulators<T>,
}

impl<T: Real> VoxelGrid<T> {
    pub fn new(bounds: &Aabb<T>, n: usize, mode: AccumulatorMode) -> Result<Self> {
        Self::with_cap(bounds, n, mode, DEFAULT_MAX_VOXELS)
    }

    pub fn with_cap(
        bounds: &Aabb<T>,
        n: usize,
        mode: AccumulatorMode,
        max_voxels: u64,
    ) -> Result<Self> {
        Ok(Self::zeros(GridGeometry::fit(bounds, n, max_voxels)?, mode))
    }

    pub fn zeros(geometry: GridGeometry<T>, mode: AccumulatorMode) -> Self {
        let n = geometry.len();
        let values = match mode {
            AccumulatorMode::Integer => Accumulators::Integer(vec![0; n]),
            AccumulatorMode::Float => Accumulators::Float(vec![T::zero(); n]),
        };
        Self { geometry, values }
    }

    /// Wraps existing accumulators; the length must match the geometry and
    /// float values must be finite and non-negative.
    pub fn from_parts(geometry: GridGeometry<T>, values: Accumulators<T>) -> Result<Self> {
        let len = match &values {
            Accumulators::Integer(v) => v.len(),
            Accumulators::Float(v) => {
                if v.iter().any(|x| !(*x >= T::zero() && x.is_finite())) {
                    return Err(Error::invalid("float accumulators must be finite and >= 0"));
                }
                v.len()
            }
        };
        if len != geometry.len() {
            return Err(Error::GeometryMismatch(format!(
                "{len} accumulators for a grid of {} voxels",
                geometry.len()
            )));
        }
        Ok(Self { geometry, values })
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn mode(&self) -> AccumulatorMode {
        match self.values {
            Accumulators::Integer(_) => AccumulatorMode::Integer,
            Accumulators::Float(_) => AccumulatorMode::Float,
        }
    }

    pub fn accumulators(&self) -> &Accumulators<T> {
        &self.values
    }

    pub fn into_accumulators(self) -> Accumulators<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.geometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geometry.is_empty()
    }

    pub fn value(&self, index: usize) -> T {
        match &self.values {
            Accumulators::Integer(v) => T::lit(v[index] as f64),
            Accumulators::Float(v) => v[index],
        }
    }

    pub fn values(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    pub fn max_value(&self) -> T {
        match &self.values {
            Accumulators::Integer(v) => T::lit(v.iter().copied().max().unwrap_or(0) as f64),
            Accumulators::Float(v) => v.iter().copied().fold(T::zero(), T::max),
        }
    }

    /// Index of the largest value, first index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        let mut best_v = self.value(0);
        for i in 1..self.len() {
            let v = self.value(i);
            if v > best_v {
                best = i;
                best_v = v;
            }
        }
        best
    }

    /// Values divided by the maximum; an all-zero grid stays all-zero.
    pub fn normalized_values(&self) -> Vec<T> {
        let m = self.max_value();
        let vals = self.values();
        if m > T::zero() {
            vals.into_iter().map(|v| v / m).collect()
        } else {
            vals
        }
    }

    /// Float-mode copy normalized to `[0, 1]`.
    pub fn to_normalized(&self) -> Self {
        Self {
            geometry: self.geometry,
            values: Accumulators::Float(self.normalized_values()),
        }
    }

    /// Adds an integer weight after checking that the cell keeps headroom for one more maximal weight.
    pub fn add_integer(&mut self, index: usize, weight: u32) -> Result<()> {
        match &mut self.values {
            Accumulators::Integer(v) => {
                if weight > MAX_INTEGER_WEIGHT {
                    return Err(Error::invalid(format!(
                        "integer weight {weight} exceeds {MAX_INTEGER_WEIGHT}"
                    )));
                }
                if v[index] > u32::MAX - MAX_INTEGER_WEIGHT {
                    return Err(Error::IntegerOverflow { voxel: index });
                }
                v[index] += weight;
                Ok(())
            }
            Accumulators::Float(_) => Err(Error::invalid("integer add on a float grid")),
        }
    }

    pub fn add_float(&mut self, index: usize, weight: T) -> Result<()> {
        match &mut self.values {
            Accumulators::Float(v) => {
                v[index] += weight;
                Ok(())
            }
            Accumulators::Integer(_) => Err(Error::invalid("float add on an integer grid")),
        }
    }

    /// Adds `weight` in either mode; integer grids require an integral weight in `0..=255`.
    pub fn add(&mut self, index: usize, weight: T) -> Result<()> {
        match self.mode() {
            AccumulatorMode::Integer => self.add_integer(index, integer_weight(weight)?),
            AccumulatorMode::Float => self.add_float(index, weight),
        }
    }

    pub fn count_nonzero(&self) -> usize {
        (0..self.len())
            .filter(|&i| self.value(i) > T::zero())
            .count()
    }
}

/// Validates a weight for integer accumulation.
pub fn integer_weight<T: Real>(weight: T) -> Result<u32> {
    if weight >= T::zero()
        && weight <= T::lit(MAX_INTEGER_WEIGHT as f64)
        && weight.fract() == T::zero()
    {
        Ok(weight.to_u32().unwrap_or(0))
    } else {
        Err(Error::invalid(format!(
            "integer-mode weight must be an integer in 0..=255, got {weight}"
        )))
    }
}

/// Distance, in elements, at which scattered accesses are prefetched.
pub(crate) const PREFETCH_AHEAD: usize = 32;

/// Hints the cache to load `data[index]`. Out-of-range indices are ignored.
#[inline(always)]
pub(crate) fn prefetch<T>(data: &[T], index: usize) {
    #[cfg(target_arch = "x86_64")]
    if index < data.len() {
        // SAFETY: prefetching is a hint and never faults; the pointer is in bounds.
        unsafe {
            use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
            _mm_prefetch::<_MM_HINT_T0>(data.as_ptr().add(index).cast());
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = (data, index);
}

/// `round(255 * value / max)`, the integer weight of an intensity.
pub fn quantize_intensity(value: f32, max: f32) -> u32 {
    if max > 0.0 {
        ((value as f64 / max as f64) * MAX_INTEGER_WEIGHT as f64)
            .round()
            .clamp(0.0, 255.0) as u32
    } else {
        0
    }
}
