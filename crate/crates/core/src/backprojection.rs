//! Traditional per-voxel back-projection and fast ellipsoid-voxelization
//! back-projection over a [`TransientDataset`].
//!
//! The traditional method visits every voxel and sums the measurements whose
//! time bin matches the voxel's three-bounce travel time. The fast method
//! visits every nonzero measurement instead and voxelizes the spheroid of
//! points consistent with it, so its cost does not depend on the voxel count
//! beyond the rasterization of each spheroid.

use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::ellipsoid::{
    build_sphere_atlas, ellipsoid_from_measurement, select_tessellation_level, SphereAtlas,
};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::scalar::Real;
use crate::transient::{three_bounce_time, TransientDataset};
use crate::voxel::grid::{prefetch, PREFETCH_AHEAD};
use crate::voxel::splat::collect_spheroid_voxels;
use crate::voxel::{
    laplacian_filter, quantize_intensity, AccumulatorMode, Accumulators, GridGeometry,
    SplatScratch, VoxelGrid, DEFAULT_MAX_VOXELS, MAX_INTEGER_WEIGHT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Traditional,
    Fast,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Traditional => "traditional",
            Method::Fast => "fast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundsSpec<T> {
    /// Wall bounding box extruded into the hidden half-space, expanded by 10%.
    Auto,
    Explicit(Aabb<T>),
}

/// Tessellation error threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon<T> {
    VoxelSize,
    VoxelMultiple(T),
    Absolute(T),
}

impl<T: Real> Epsilon<T> {
    pub fn resolve(self, voxel_size: T) -> T {
        match self {
            Epsilon::VoxelSize => voxel_size,
            Epsilon::VoxelMultiple(m) => m * voxel_size,
            Epsilon::Absolute(e) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig<T> {
    pub bounds: BoundsSpec<T>,
    pub resolution: usize,
    pub method: Method,
    pub mode: AccumulatorMode,
    pub epsilon: Epsilon<T>,
    /// Measurements at or below `threshold * max intensity` are skipped.
    pub intensity_threshold: T,
    /// Multiply by `|l-x|^2 |x-p|^2` (traditional, float mode only).
    pub g_correction: bool,
    /// Add each spheroid's weight once per voxel (fast method).
    pub dedup: bool,
    pub max_tess_level: usize,
    /// Overrides the per-spheroid level selection with a fixed level.
    pub fixed_tess_level: Option<usize>,
    /// Worker count; `None` uses the global pool.
    pub threads: Option<usize>,
    pub max_voxels: u64,
}

impl<T: Real> Default for ReconstructionConfig<T> {
    fn default() -> Self {
        Self {
            bounds: BoundsSpec::Auto,
            resolution: 64,
            method: Method::Fast,
            mode: AccumulatorMode::Float,
            epsilon: Epsilon::VoxelSize,
            intensity_threshold: T::zero(),
            g_correction: false,
            dedup: true,
            max_tess_level: 5,
            fixed_tess_level: None,
            threads: None,
            max_voxels: DEFAULT_MAX_VOXELS,
        }
    }
}

impl<T: Real> ReconstructionConfig<T> {
    pub fn traditional(resolution: usize) -> Self {
        Self {
            method: Method::Traditional,
            resolution,
            ..Self::default()
        }
    }

    pub fn fast(resolution: usize) -> Self {
        Self {
            method: Method::Fast,
            resolution,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(Error::invalid("linear resolution must be at least 1"));
        }
        if !(self.intensity_threshold >= T::zero() && self.intensity_threshold < T::one()) {
            return Err(Error::invalid(format!(
                "intensity threshold must be in [0, 1), got {}",
                self.intensity_threshold
            )));
        }
        if self.g_correction && self.mode == AccumulatorMode::Integer {
            return Err(Error::ConfigConflict(
                "geometric correction requires float mode".into(),
            ));
        }
        if self.g_correction && self.method == Method::Fast {
            return Err(Error::ConfigConflict(
                "geometric correction applies to the traditional method only".into(),
            ));
        }
        if self.max_tess_level > crate::ellipsoid::MAX_ATLAS_LEVEL {
            return Err(Error::invalid(format!(
                "max tessellation level {} too large",
                self.max_tess_level
            )));
        }
        if let Some(o) = self.fixed_tess_level {
            if o > self.max_tess_level {
                return Err(Error::invalid(format!(
                    "fixed tessellation level {o} exceeds max level {}",
                    self.max_tess_level
                )));
            }
        }
        let eps_ok = match self.epsilon {
            Epsilon::VoxelSize => true,
            Epsilon::VoxelMultiple(m) | Epsilon::Absolute(m) => m > T::zero() && m.is_finite(),
        };
        if !eps_ok {
            return Err(Error::invalid("tessellation epsilon must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("thread count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReconstructionStats {
    pub ellipsoids_emitted: usize,
    pub ellipsoids_skipped_zero: usize,
    pub ellipsoids_degenerate: usize,
    pub triangles_total: usize,
    pub saturated_levels: usize,
    pub voxel_touches: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl ReconstructionStats {
    /// Mean triangles rasterized per emitted ellipsoid.
    pub fn triangles_per_ellipsoid(&self) -> f64 {
        if self.ellipsoids_emitted == 0 {
            0.0
        } else {
            self.triangles_total as f64 / self.ellipsoids_emitted as f64
        }
    }
}

/// Reconstruction box inferred from the wall: the wall's bounding box (its
/// thinnest axis taken as the wall normal) extruded along `+normal` by the
/// wall's largest lateral extent, then grown by 10%.
pub fn auto_bounds<T: Real>(ds: &TransientDataset<T>) -> Result<Aabb<T>> {
    let pts = ds
        .wall
        .positions
        .iter()
        .chain(&ds.lasers.positions)
        .copied();
    let wall =
        Aabb::from_points(pts).ok_or_else(|| Error::invalid("dataset has no wall samples"))?;
    let ext = wall.extent();
    let normal = (0..3).fold(0, |best, k| if ext[k] < ext[best] { k } else { best });
    let lateral = (0..3)
        .filter(|&k| k != normal)
        .map(|k| ext[k])
        .fold(T::zero(), T::max);
    if !(lateral > T::zero()) {
        return Err(Error::invalid(
            "cannot infer bounds from a point-like wall; pass explicit bounds",
        ));
    }
    let mut min = wall.min;
    let mut max = wall.max;
    let base = wall.center()[normal];
    let set = |v: &mut Vec3<T>, val: T| match normal {
        0 => v.x = val,
        1 => v.y = val,
        _ => v.z = val,
    };
    set(&mut min, base);
    set(&mut max, base + lateral);
    for k in 0..3 {
        if k != normal && !(ext[k] > T::zero()) {
            // Degenerate lateral axis (a line of pixels): give it the full lateral extent.
            let c = wall.center()[k];
            let h = lateral * T::lit(0.5);
            let (lo, hi) = (c - h, c + h);
            match k {
                0 => (min.x, max.x) = (lo, hi),
                1 => (min.y, max.y) = (lo, hi),
                _ => (min.z, max.z) = (lo, hi),
            }
        }
    }
    Ok(Aabb::new(min, max).expanded_by_fraction(T::lit(0.1)))
}

fn grid_geometry<T: Real>(
    ds: &TransientDataset<T>,
    cfg: &ReconstructionConfig<T>,
) -> Result<GridGeometry<T>> {
    let bounds = match cfg.bounds {
        BoundsSpec::Auto => auto_bounds(ds)?,
        BoundsSpec::Explicit(b) => b,
    };
    GridGeometry::fit(&bounds, cfg.resolution, cfg.max_voxels)
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs the configured method.
pub fn reconstruct<T: Real>(
    ds: &TransientDataset<T>,
    cfg: &ReconstructionConfig<T>,
) -> Result<(VoxelGrid<T>, ReconstructionStats)> {
    match cfg.method {
        Method::Traditional => reconstruct_traditional(ds, cfg),
        Method::Fast => reconstruct_fast(ds, cfg),
    }
}

/// Runs the configured method, optionally applies the Laplacian filter, and
/// returns a max-normalized float grid.
pub fn reconstruct_pipeline<T: Real>(
    ds: &TransientDataset<T>,
    cfg: &ReconstructionConfig<T>,
    filter: bool,
) -> Result<(VoxelGrid<T>, ReconstructionStats)> {
    let (grid, stats) = reconstruct(ds, cfg)?;
    let out = if filter {
        in_pool(cfg.threads, || laplacian_filter(&grid))?
    } else {
        grid.to_normalized()
    };
    Ok((out, stats))
}

/// For every voxel center `x`, sums `I[s][p][bin(t_s + τ(l→x→p) + t_p)]`
/// over all shots and pixels.
pub fn reconstruct_traditional<T: Real>(
    ds: &TransientDataset<T>,
    cfg: &ReconstructionConfig<T>,
) -> Result<(VoxelGrid<T>, ReconstructionStats)> {
    cfg.validate()?;
    if cfg.method != Method::Traditional {
        return Err(Error::ConfigConflict(
            "reconstruct_traditional called with the fast method".into(),
        ));
    }
    let start = Instant::now();
    let geom = grid_geometry(ds, cfg)?;
    let grid = in_pool(cfg.threads, || traditional_kernel(ds, cfg, &geom))??;
    let stats = ReconstructionStats {
        wall_time: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok((grid, stats))
}

fn traditional_kernel<T: Real>(
    ds: &TransientDataset<T>,
    cfg: &ReconstructionConfig<T>,
    geom: &GridGeometry<T>,
) -> Result<VoxelGrid<T>> {
    let [nx, ny, _] = geom.dims;
    let slab = nx * ny;
    let axis = ds.axis;
    let shots = ds.shots();
    let pixels = ds.pixels();
    let lasers = &ds.lasers;
    let wall = &ds.wall;

    // Calls `visit(s, p, bin, x)` for every in-range (shot, pixel) arrival at voxel center `x`.
    let for_each_hit = |x: Vec3<T>, visit: &mut dyn FnMut(usize, usize, usize)| {
        for s in 0..shots {
            let l = lasers.positions[s];
            let ts = lasers.laser_offsets[s];
            for p in 0..pixels {
                let t = three_bounce_time(l, x, wall.positions[p], axis.c)
                    + ts
                    + wall.camera_offsets[p];
                if let Some(k) = axis.time_to_bin(t) {
                    visit(s, p, k);
                }
            }
        }
    };

    match cfg.mode {
        AccumulatorMode::Float => {
            let mut values = vec![T::zero(); geom.len()];
            values
                .par_chunks_mut(slab)
                .enumerate()
                .for_each(|(z, out)| {
                    for y in 0..ny {
                        for x in 0..nx {
                            let c = geom.voxel_center([x, y, z]);
                            let mut acc = T::zero();
                            for_each_hit(c, &mut |s, p, k| {
                                let v = T::lit(ds.get(s, p, k) as f64);
                                if cfg.g_correction {
                                    let wp = wall.positions[p];
                                    let g_inv = (lasers.positions[s] - c).norm_squared()
                                        * (c - wp).norm_squared();
                                    acc += v * g_inv;
                                } else {
                                    acc += v;
                                }
                            });
                            out[x + nx * y] = acc;
                        }
                    }
                });
            VoxelGrid::from_parts(*geom, Accumulators::Float(values))
        }
        AccumulatorMode::Integer => {
            let imax = ds.max_intensity();
            let weights: Vec<u32> = ds
                .intensity()
                .iter()
                .map(|&v| quantize_intensity(v, imax))
                .collect();
            let mut values = vec![0u32; geom.len()];
            let overflow = AtomicUsize::new(usize::MAX);
            values
                .par_chunks_mut(slab)
                .enumerate()
                .for_each(|(z, out)| {
                    for y in 0..ny {
                        for x in 0..nx {
                            let c = geom.voxel_center([x, y, z]);
                            let mut acc = 0u32;
                            let mut over = false;
                            for_each_hit(c, &mut |s, p, k| {
                                let w = weights[ds.index(s, p, k)];
                                if w > 0 {
                                    if acc > u32::MAX - MAX_INTEGER_WEIGHT {
                                        over = true;
                                    } else {
                                        acc += w;
                                    }
                                }
                            });
                            if over {
                                overflow.fetch_min(geom.index(x, y, z), Ordering::Relaxed);
                            }
                            out[x + nx * y] = acc;
                        }
                    }
                });
            let voxel = overflow.into_inner();
            if voxel != usize::MAX {
                return Err(Error::IntegerOverflow { voxel });
            }
            VoxelGrid::from_parts(*geom, Accumulators::Integer(values))
        }
    }
}

struct FastContext<'a, T> {
    ds: &'a TransientDataset<T>,
    geom: GridGeometry<T>,
    atlas: SphereAtlas<T>,
    epsilon: T,
    cfg: &'a ReconstructionConfig<T>,
    imax: f32,
    cutoff: f32,
    emitted: AtomicUsize,
    skipped: AtomicUsize,
    degenerate: AtomicUsize,
    triangles: AtomicUsize,
    saturated: AtomicUsize,
    touches: AtomicUsize,
}

impl<T: Real> FastContext<'_, T> {
    /// Voxelizes every ellipsoid of one (shot, pixel) row, passing each
    /// spheroid's voxels and its integer and float weights to `sink`.
    fn process_row<F: FnMut(&[usize], u32, T)>(
        &self,
        row: usize,
        scratch: &mut SplatScratch<T>,
        mut sink: F,
    ) {
        let ds = self.ds;
        let (s, p) = (row / ds.pixels(), row % ds.pixels());
        let l = ds.lasers.positions[s];
        let wp = ds.wall.positions[p];
        let offset = ds.lasers.laser_offsets[s] + ds.wall.camera_offsets[p];
        let integer = self.cfg.mode == AccumulatorMode::Integer;
        let (mut emitted, mut skipped, mut degenerate, mut triangles, mut saturated, mut touches) =
            (0, 0, 0, 0, 0, 0);
        for (k, &value) in ds.row(s, p).iter().enumerate() {
            let qweight = if integer {
                quantize_intensity(value, self.imax)
            } else {
                0
            };
            if !(value > self.cutoff) || (integer && qweight == 0) {
                skipped += 1;
                continue;
            }
            let d = ds.axis.c * (ds.axis.bin_to_time(k) - offset);
            let Ok(spheroid) = ellipsoid_from_measurement(l, wp, d) else {
                degenerate += 1;
                continue;
            };
            let level = match self.cfg.fixed_tess_level {
                Some(o) => o,
                None => {
                    let choice = select_tessellation_level(&self.atlas, &spheroid, self.epsilon);
                    saturated += usize::from(choice.saturated);
                    choice.level
                }
            };
            let sphere = self.atlas.level(level);
            collect_spheroid_voxels(&self.geom, &spheroid, sphere, self.cfg.dedup, scratch);
            emitted += 1;
            triangles += sphere.triangle_count();
            touches += scratch.touched().len();
            sink(scratch.touched(), qweight, T::lit(value as f64));
        }
        self.emitted.fetch_add(emitted, Ordering::Relaxed);
        self.skipped.fetch_add(skipped, Ordering::Relaxed);
        self.degenerate.fetch_add(degenerate, Ordering::Relaxed);
        self.triangles.fetch_add(triangles, Ordering::Relaxed);
        self.saturated.fetch_add(saturated, Ordering::Relaxed);
        self.touches.fetch_add(touches, Ordering::Relaxed);
    }

    fn stats(&self, wall_time: f64) -> ReconstructionStats {
        ReconstructionStats {
            ellipsoids_emitted: self.emitted.load(Ordering::Relaxed),
            ellipsoids_skipped_zero: self.skipped.load(Ordering::Relaxed),
            ellipsoids_degenerate: self.degenerate.load(Ordering::Relaxed),
            triangles_total: self.triangles.load(Ordering::Relaxed),
            saturated_levels: self.saturated.load(Ordering::Relaxed),
            voxel_touches: self.touches.load(Ordering::Relaxed),
            wall_time,
        }
    }
}

/// For every measurement above the intensity cutoff, voxelizes the spheroid
/// `E(l, ψ(p), c (t_k - t_s - t_p))` and accumulates its weight: the raw
/// intensity in float mode, `round(255 I / I_max)` in integer mode.
pub fn reconstruct_fast<T: Real>(
    ds: &TransientDataset<T>,
    cfg: &ReconstructionConfig<T>,
) -> Result<(VoxelGrid<T>, ReconstructionStats)> {
    cfg.validate()?;
    if cfg.method != Method::Fast {
        return Err(Error::ConfigConflict(
            "reconstruct_fast called with the traditional method".into(),
        ));
    }
    let start = Instant::now();
    let geom = grid_geometry(ds, cfg)?;
    let atlas = build_sphere_atlas::<T>(cfg.max_tess_level)?;
    let imax = ds.max_intensity();
    let ctx = FastContext {
        ds,
        geom,
        atlas,
        epsilon: cfg.epsilon.resolve(geom.voxel_size()),
        cfg,
        imax,
        cutoff: (cfg.intensity_threshold.as_f64() * imax as f64) as f32,
        emitted: AtomicUsize::new(0),
        skipped: AtomicUsize::new(0),
        degenerate: AtomicUsize::new(0),
        triangles: AtomicUsize::new(0),
        saturated: AtomicUsize::new(0),
        touches: AtomicUsize::new(0),
    };
    let grid = in_pool(cfg.threads, || match cfg.mode {
        AccumulatorMode::Integer => fast_integer(&ctx),
        AccumulatorMode::Float => fast_float(&ctx),
    })??;
    Ok((grid, ctx.stats(start.elapsed().as_secs_f64())))
}

/// Atomic adds into a shared counter grid; order independent.
fn fast_integer<T: Real>(ctx: &FastContext<'_, T>) -> Result<VoxelGrid<T>> {
    let cells: Vec<AtomicU32> = (0..ctx.geom.len()).map(|_| AtomicU32::new(0)).collect();
    let rows = ctx.ds.shots() * ctx.ds.pixels();
    let overflow = (0..rows)
        .into_par_iter()
        .map_init(SplatScratch::new, |scratch, row| {
            let mut overflow = None;
            ctx.process_row(row, scratch, |voxels, w, _| {
                for (n, &i) in voxels.iter().enumerate() {
                    if let Some(&ahead) = voxels.get(n + PREFETCH_AHEAD) {
                        prefetch(&cells, ahead);
                    }
                    let r = cells[i].fetch_update(Ordering::Relaxed, Ordering::Relaxed, |v| {
                        (v <= u32::MAX - MAX_INTEGER_WEIGHT).then_some(v + w)
                    });
                    if r.is_err() {
                        overflow.get_or_insert(i);
                    }
                }
            });
            overflow
        });
    if let Some(voxel) = overflow.flatten().min() {
        return Err(Error::IntegerOverflow { voxel });
    }
    let values = cells.into_iter().map(AtomicU32::into_inner).collect();
    VoxelGrid::from_parts(ctx.geom, Accumulators::Integer(values))
}

/// One partial grid per worker over a contiguous range of rows, summed in worker order.
fn fast_float<T: Real>(ctx: &FastContext<'_, T>) -> Result<VoxelGrid<T>> {
    let rows = ctx.ds.shots() * ctx.ds.pixels();
    let workers = rayon::current_num_threads().clamp(1, rows.max(1));
    let len = ctx.geom.len();
    let partials: Vec<Vec<T>> = (0..workers)
        .into_par_iter()
        .map(|w| -> Result<Vec<T>> {
            let mut acc = vec![T::zero(); len];
            let mut scratch = SplatScratch::new();
            for row in (w * rows / workers)..((w + 1) * rows / workers) {
                ctx.process_row(row, &mut scratch, |voxels, _, weight| {
                    for (n, &i) in voxels.iter().enumerate() {
                        if let Some(&ahead) = voxels.get(n + PREFETCH_AHEAD) {
                            prefetch(&acc, ahead);
                        }
                        acc[i] += weight;
                    }
                });
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut iter = partials.into_iter();
    let mut total = iter.next().unwrap_or_else(|| vec![T::zero(); len]);
    for part in iter {
        total.iter_mut().zip(part).for_each(|(a, b)| *a += b);
    }
    VoxelGrid::from_parts(ctx.geom, Accumulators::Float(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transient::{LaserSampling, TemporalAxis, WallSampling};

    type V = Vec3<f64>;

    fn tiny_dataset() -> TransientDataset<f64> {
        let axis = TemporalAxis::new(0.0, 0.05, 80, 1.0).unwrap();
        let wall = WallSampling::new(
            vec![
                V::new(-0.5, -0.5, 0.0),
                V::new(0.5, -0.5, 0.0),
                V::new(-0.5, 0.5, 0.0),
                V::new(0.5, 0.5, 0.0),
            ],
            vec![0.0; 4],
        )
        .unwrap();
        let lasers =
            LaserSampling::new(vec![V::zero(), V::new(0.25, 0.0, 0.0)], vec![0.0; 2]).unwrap();
        TransientDataset::zeros(axis, wall, lasers)
    }

    #[test]
    fn auto_bounds_extrude_wall() {
        let ds = tiny_dataset();
        let b = auto_bounds(&ds).unwrap();
        assert!((b.min.x - -0.55).abs() < 1e-12 && (b.max.x - 0.55).abs() < 1e-12);
        assert!((b.min.z - -0.05).abs() < 1e-12 && (b.max.z - 1.05).abs() < 1e-12);
    }

    #[test]
    fn zero_dataset_gives_zero_grids() {
        let ds = tiny_dataset();
        let (g, _) = reconstruct_traditional(&ds, &ReconstructionConfig::traditional(8)).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        let (g, st) = reconstruct_fast(&ds, &ReconstructionConfig::fast(8)).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        assert_eq!(st.ellipsoids_skipped_zero, ds.len());
        assert_eq!(st.ellipsoids_emitted + st.ellipsoids_degenerate, 0);
    }

    #[test]
    fn stats_partition_all_measurements() {
        let mut ds = tiny_dataset();
        for (i, v) in ds.intensity_mut().iter_mut().enumerate() {
            *v = (i % 3) as f32;
        }
        let (_, st) = reconstruct_fast(&ds, &ReconstructionConfig::fast(8)).unwrap();
        assert_eq!(
            st.ellipsoids_emitted + st.ellipsoids_skipped_zero + st.ellipsoids_degenerate,
            ds.len()
        );
        assert!(st.ellipsoids_degenerate > 0);
    }

    #[test]
    fn config_conflicts() {
        let ds = tiny_dataset();
        let cfg = ReconstructionConfig {
            g_correction: true,
            mode: AccumulatorMode::Integer,
            ..ReconstructionConfig::traditional(4)
        };
        assert!(matches!(
            reconstruct(&ds, &cfg),
            Err(Error::ConfigConflict(_))
        ));
        assert!(matches!(
            reconstruct_fast(&ds, &ReconstructionConfig::traditional(4)),
            Err(Error::ConfigConflict(_))
        ));
        let cfg = ReconstructionConfig::<f64> {
            intensity_threshold: 1.0,
            ..ReconstructionConfig::fast(4)
        };
        assert!(cfg.validate().is_err());
        let cfg = ReconstructionConfig::<f64> {
            resolution: 0,
            ..ReconstructionConfig::fast(4)
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_bin_equals_single_splat() {
        let mut ds = tiny_dataset();
        let k = 40; // d = 2.0 with zero offsets
        let idx = ds.index(0, 1, k);
        ds.intensity_mut()[idx] = 3.0;
        let cfg = ReconstructionConfig::<f64>::fast(16);
        let (g, st) = reconstruct_fast(&ds, &cfg).unwrap();
        assert_eq!(st.ellipsoids_emitted, 1);

        let geom = *g.geometry();
        let mut direct = VoxelGrid::zeros(geom, AccumulatorMode::Float);
        let atlas = build_sphere_atlas(5).unwrap();
        let s =
            ellipsoid_from_measurement(ds.lasers.positions[0], ds.wall.positions[1], 2.0).unwrap();
        crate::voxel::splat_ellipsoid(&mut direct, &s, 3.0, &atlas, geom.voxel_size(), true)
            .unwrap();
        assert_eq!(g, direct);
    }

    #[test]
    fn float_traditional_is_linear() {
        let mut ds = tiny_dataset();
        for (i, v) in ds.intensity_mut().iter_mut().enumerate() {
            *v = ((i * 7) % 5) as f32 * 0.25;
        }
        let cfg = ReconstructionConfig::traditional(8);
        let (a, _) = reconstruct_traditional(&ds, &cfg).unwrap();
        let (b, _) = reconstruct_traditional(&ds.scaled(2.0), &cfg).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(2.0 * x, y);
        }
    }
}
