//! Time-resolved signal model and the three-bounce forward simulator.
//!
//! A measurement `I[s][p][k]` is the energy received at wall pixel `p` during
//! time bin `k` after laser shot `s` illuminated the virtual point light `l_s`.
//! Times are absolute: they include the laser-to-wall offset `t_s` and the
//! wall-to-camera offset `t_p`, which the dataset stores explicitly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::scalar::Real;

/// Minimum distance between path vertices before the geometry term is treated as singular (meters).
pub const DISTANCE_GUARD: f64 = 1e-6;

/// Tolerance on `|normal| == 1` for hidden surface samples.
pub const NORMAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalAxis<T> {
    pub t0: T,
    pub dt: T,
    pub bins: usize,
    /// Propagation speed in m/s.
    pub c: T,
}

impl<T: Real> TemporalAxis<T> {
    pub fn new(t0: T, dt: T, bins: usize, c: T) -> Result<Self> {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::invalid(format!(
                "bin width must be positive, got {dt}"
            )));
        }
        if bins == 0 {
            return Err(Error::invalid("temporal axis needs at least one bin"));
        }
        if !(c > T::zero() && c.is_finite()) {
            return Err(Error::invalid(format!(
                "propagation speed must be positive, got {c}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::invalid("t0 must be finite"));
        }
        Ok(Self { t0, dt, bins, c })
    }

    /// Nearest bin for time `t`, or `None` when it rounds outside `[0, bins)`.
    pub fn time_to_bin(&self, t: T) -> Option<usize> {
        let k = ((t - self.t0) / self.dt).round();
        if k >= T::zero() && k < T::from_usize_lossy(self.bins) {
            k.to_usize()
        } else {
            None
        }
    }

    pub fn bin_to_time(&self, k: usize) -> T {
        self.t0 + T::from_usize_lossy(k) * self.dt
    }
}

/// Wall pixels `ψ(p)` and their camera time offsets `t_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WallSampling<T> {
    pub positions: Vec<Vec3<T>>,
    pub camera_offsets: Vec<T>,
}

impl<T: Real> WallSampling<T> {
    pub fn new(positions: Vec<Vec3<T>>, camera_offsets: Vec<T>) -> Result<Self> {
        check_sampling("wall", &positions, &camera_offsets)?;
        Ok(Self {
            positions,
            camera_offsets,
        })
    }

    pub fn pixels(&self) -> usize {
        self.positions.len()
    }
}

/// Virtual point lights `l` on the wall and the laser time offsets `t_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserSampling<T> {
    pub positions: Vec<Vec3<T>>,
    pub laser_offsets: Vec<T>,
}

impl<T: Real> LaserSampling<T> {
    pub fn new(positions: Vec<Vec3<T>>, laser_offsets: Vec<T>) -> Result<Self> {
        check_sampling("laser", &positions, &laser_offsets)?;
        Ok(Self {
            positions,
            laser_offsets,
        })
    }

    pub fn shots(&self) -> usize {
        self.positions.len()
    }
}

fn check_sampling<T: Real>(what: &str, positions: &[Vec3<T>], offsets: &[T]) -> Result<()> {
    if positions.len() != offsets.len() {
        return Err(Error::invalid(format!(
            "{what} sampling has {} positions but {} offsets",
            positions.len(),
            offsets.len()
        )));
    }
    if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("{what} position {i} is not finite")));
    }
    if let Some(i) = offsets
        .iter()
        .position(|&t| !(t >= T::zero() && t.is_finite()))
    {
        return Err(Error::invalid(format!(
            "{what} offset {i} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// Dense `S × P × T` intensity tensor plus the acquisition geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientDataset<T> {
    pub axis: TemporalAxis<T>,
    pub wall: WallSampling<T>,
    pub lasers: LaserSampling<T>,
    intensity: Vec<f32>,
}

impl<T: Real> TransientDataset<T> {
    pub fn new(
        axis: TemporalAxis<T>,
        wall: WallSampling<T>,
        lasers: LaserSampling<T>,
        intensity: Vec<f32>,
    ) -> Result<Self> {
        let expected = lasers.shots() * wall.pixels() * axis.bins;
        if intensity.len() != expected {
            return Err(Error::invalid(format!(
                "intensity tensor has {} entries, expected S*P*T = {expected}",
                intensity.len()
            )));
        }
        if let Some(i) = intensity.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!(
                "intensity {i} is {} (must be finite and >= 0)",
                intensity[i]
            )));
        }
        Ok(Self {
            axis,
            wall,
            lasers,
            intensity,
        })
    }

    /// All-zero tensor with the given geometry.
    pub fn zeros(axis: TemporalAxis<T>, wall: WallSampling<T>, lasers: LaserSampling<T>) -> Self {
        let n = lasers.shots() * wall.pixels() * axis.bins;
        Self {
            axis,
            wall,
            lasers,
            intensity: vec![0.0; n],
        }
    }

    pub fn shots(&self) -> usize {
        self.lasers.shots()
    }

    pub fn pixels(&self) -> usize {
        self.wall.pixels()
    }

    pub fn bins(&self) -> usize {
        self.axis.bins
    }

    /// `S * P * T`.
    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    #[inline]
    pub fn index(&self, shot: usize, pixel: usize, bin: usize) -> usize {
        (shot * self.pixels() + pixel) * self.bins() + bin
    }

    #[inline]
    pub fn get(&self, shot: usize, pixel: usize, bin: usize) -> f32 {
        self.intensity[self.index(shot, pixel, bin)]
    }

    /// Time histogram for one (shot, pixel) pair.
    pub fn row(&self, shot: usize, pixel: usize) -> &[f32] {
        let start = self.index(shot, pixel, 0);
        &self.intensity[start..start + self.bins()]
    }

    pub fn intensity(&self) -> &[f32] {
        &self.intensity
    }

    /// Mutable access; callers must keep entries finite and non-negative.
    pub fn intensity_mut(&mut self) -> &mut [f32] {
        &mut self.intensity
    }

    pub fn max_intensity(&self) -> f32 {
        self.intensity.iter().copied().fold(0.0, f32::max)
    }

    pub fn nonzero_bins(&self) -> usize {
        self.intensity.iter().filter(|&&v| v != 0.0).count()
    }

    /// Fraction of tensor entries that are nonzero.
    pub fn sparsity(&self) -> f64 {
        if self.intensity.is_empty() {
            0.0
        } else {
            self.nonzero_bins() as f64 / self.intensity.len() as f64
        }
    }

    /// Every intensity multiplied by `k >= 0`.
    pub fn scaled(&self, k: f32) -> Self {
        let mut out = self.clone();
        out.intensity.iter_mut().for_each(|v| *v *= k);
        out
    }

    /// Dataset with shots reordered: output shot `i` is input shot `order[i]`.
    pub fn permute_shots(&self, order: &[usize]) -> Result<Self> {
        let s = self.shots();
        let mut seen = vec![false; s];
        if order.len() != s
            || order
                .iter()
                .any(|&i| i >= s || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::invalid("shot order must be a permutation"));
        }
        let row = self.pixels() * self.bins();
        let mut intensity = Vec::with_capacity(self.len());
        for &i in order {
            intensity.extend_from_slice(&self.intensity[i * row..(i + 1) * row]);
        }
        let lasers = LaserSampling {
            positions: order.iter().map(|&i| self.lasers.positions[i]).collect(),
            laser_offsets: order
                .iter()
                .map(|&i| self.lasers.laser_offsets[i])
                .collect(),
        };
        Ok(Self {
            axis: self.axis,
            wall: self.wall.clone(),
            lasers,
            intensity,
        })
    }
}

/// Regular grid of wall pixels: pixel `(i, j)` sits at
/// `origin + (i + 1/2)/nu * edge_u + (j + 1/2)/nv * edge_v`, `i` fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallGrid<T> {
    pub origin: Vec3<T>,
    pub edge_u: Vec3<T>,
    pub edge_v: Vec3<T>,
    pub pixels: [usize; 2],
}

impl<T: Real> WallGrid<T> {
    pub fn positions(&self) -> Vec<Vec3<T>> {
        let [nu, nv] = self.pixels;
        let mut out = Vec::with_capacity(nu * nv);
        for j in 0..nv {
            let fv = (T::from_usize_lossy(j) + T::lit(0.5)) / T::from_usize_lossy(nv);
            for i in 0..nu {
                let fu = (T::from_usize_lossy(i) + T::lit(0.5)) / T::from_usize_lossy(nu);
                out.push(self.origin + self.edge_u * fu + self.edge_v * fv);
            }
        }
        out
    }

    pub fn area(&self) -> T {
        self.edge_u.cross(self.edge_v).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample<T> {
    pub position: Vec3<T>,
    pub normal: Vec3<T>,
    pub area: T,
    pub albedo: T,
}

/// Temporal block of a scene; `None` fields are fitted to the scene geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec<T> {
    pub t0: Option<T>,
    pub dt: T,
    pub bins: Option<usize>,
    pub c: T,
}

impl<T: Real> From<TemporalAxis<T>> for AxisSpec<T> {
    fn from(a: TemporalAxis<T>) -> Self {
        Self {
            t0: Some(a.t0),
            dt: a.dt,
            bins: Some(a.bins),
            c: a.c,
        }
    }
}

/// Ground-truth hidden geometry plus the relay-wall acquisition setup.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenScene<T> {
    pub wall_grid: WallGrid<T>,
    pub laser_points: Vec<Vec3<T>>,
    pub laser_origin: Vec3<T>,
    pub camera_origin: Vec3<T>,
    pub hidden_surfaces: Vec<SurfaceSample<T>>,
    pub axis: AxisSpec<T>,
}

impl<T: Real> HiddenScene<T> {
    pub fn validate(&self) -> Result<()> {
        let sem = |field: &str, message: String| Error::SceneSemantic {
            field: field.into(),
            message,
        };
        let [nu, nv] = self.wall_grid.pixels;
        if nu == 0 || nv == 0 {
            return Err(sem("wall.pixels", "pixel counts must be positive".into()));
        }
        if !(self.wall_grid.area() > T::zero()) {
            return Err(sem("wall", "wall rectangle has zero area".into()));
        }
        if self.laser_points.is_empty() {
            return Err(sem("lasers", "at least one laser point is required".into()));
        }
        let tol = T::lit(NORMAL_TOLERANCE);
        for (i, s) in self.hidden_surfaces.iter().enumerate() {
            let field = format!("hidden sample {i}");
            if (s.normal.norm() - T::one()).abs() > tol {
                return Err(sem(
                    &field,
                    format!("normal has length {}", s.normal.norm()),
                ));
            }
            if !(s.area > T::zero() && s.area.is_finite()) {
                return Err(sem(&field, format!("area must be > 0, got {}", s.area)));
            }
            if !(s.albedo >= T::zero() && s.albedo <= T::one()) {
                return Err(sem(
                    &field,
                    format!("albedo must be in [0,1], got {}", s.albedo),
                ));
            }
            if !s.position.is_finite() {
                return Err(sem(&field, "position is not finite".into()));
            }
        }
        if !(self.axis.dt > T::zero()) || !(self.axis.c > T::zero()) {
            return Err(sem("temporal", "dt and c must be positive".into()));
        }
        if self.axis.bins == Some(0) {
            return Err(sem("temporal.bins", "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn wall_sampling(&self) -> WallSampling<T> {
        let positions = self.wall_grid.positions();
        let c = self.axis.c;
        let camera_offsets = positions
            .iter()
            .map(|&p| path_time(self.camera_origin, p, c))
            .collect();
        WallSampling {
            positions,
            camera_offsets,
        }
    }

    pub fn laser_sampling(&self) -> LaserSampling<T> {
        let c = self.axis.c;
        let laser_offsets = self
            .laser_points
            .iter()
            .map(|&l| path_time(self.laser_origin, l, c))
            .collect();
        LaserSampling {
            positions: self.laser_points.clone(),
            laser_offsets,
        }
    }

    /// Resolves `auto` entries of the temporal block: `t0` one bin before the
    /// earliest three-bounce arrival and enough bins to hold the latest one plus one.
    pub fn resolve_axis(&self) -> Result<TemporalAxis<T>> {
        let spec = self.axis;
        if let (Some(t0), Some(bins)) = (spec.t0, spec.bins) {
            return TemporalAxis::new(t0, spec.dt, bins, spec.c);
        }
        if self.hidden_surfaces.is_empty() {
            return Err(Error::SceneSemantic {
                field: "temporal".into(),
                message: "cannot fit an automatic time axis without hidden surfaces".into(),
            });
        }
        let (tmin, tmax) = self.arrival_range();
        let t0 = spec.t0.unwrap_or(tmin - spec.dt);
        let bins = match spec.bins {
            Some(b) => b,
            None => {
                let span = ((tmax - t0) / spec.dt).floor();
                if span < T::zero() {
                    1
                } else {
                    span.to_usize().unwrap_or(0) + 2
                }
            }
        };
        TemporalAxis::new(t0, spec.dt, bins, spec.c)
    }

    /// Earliest and latest absolute arrival times over all (shot, sample, pixel) paths.
    pub fn arrival_range(&self) -> (T, T) {
        let wall = self.wall_sampling();
        let lasers = self.laser_sampling();
        let c = self.axis.c;
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for (l, ts) in lasers.positions.iter().zip(&lasers.laser_offsets) {
            for x in &self.hidden_surfaces {
                let lx = *ts + path_time(*l, x.position, c);
                for (p, tp) in wall.positions.iter().zip(&wall.camera_offsets) {
                    let t = lx + path_time(x.position, *p, c) + *tp;
                    lo = lo.min(t);
                    hi = hi.max(t);
                }
            }
        }
        (lo, hi)
    }

    /// Bounding box of the hidden samples.
    pub fn hidden_bounds(&self) -> Option<Aabb<T>> {
        Aabb::from_points(self.hidden_surfaces.iter().map(|s| s.position))
    }

    /// Copy of the scene with every albedo multiplied by `k`.
    pub fn with_albedo_scale(&self, k: T) -> Self {
        let mut out = self.clone();
        out.hidden_surfaces.iter_mut().for_each(|s| s.albedo *= k);
        out
    }
}

/// `|a - b| / c`.
#[inline]
pub fn path_time<T: Real>(a: Vec3<T>, b: Vec3<T>, c: T) -> T {
    a.distance(b) / c
}

/// Travel time along `l -> x -> p`.
#[inline]
pub fn three_bounce_time<T: Real>(l: Vec3<T>, x: Vec3<T>, p: Vec3<T>, c: T) -> T {
    path_time(l, x, c) + path_time(x, p, c)
}

/// Inverse-square attenuation `1 / (|l-x|^2 |x-p|^2)`.
pub fn geometric_attenuation<T: Real>(l: Vec3<T>, x: Vec3<T>, p: Vec3<T>) -> Result<T> {
    let guard = T::lit(DISTANCE_GUARD);
    let d1 = (l - x).norm_squared();
    let d2 = (x - p).norm_squared();
    for d in [d1, d2] {
        if !(d >= guard * guard) {
            return Err(Error::DegenerateDistance {
                distance: d.sqrt().as_f64(),
                guard: DISTANCE_GUARD,
            });
        }
    }
    Ok(T::one() / (d1 * d2))
}

/// Poisson shot noise: each bin becomes `Poisson(photons * I) / photons`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotNoise {
    pub photons: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulationOptions {
    pub noise: Option<ShotNoise>,
}

pub fn simulate_dataset<T: Real>(scene: &HiddenScene<T>) -> Result<TransientDataset<T>> {
    simulate_dataset_with(scene, &SimulationOptions::default())
}

/// Renders the three-bounce transient for every (shot, pixel) pair.
///
/// Each hidden sample deposits `(albedo/π) cosθ_in cosθ_out G area` into the
/// nearest bin of its absolute arrival time; arrivals outside the axis are dropped.
pub fn simulate_dataset_with<T: Real>(
    scene: &HiddenScene<T>,
    opts: &SimulationOptions,
) -> Result<TransientDataset<T>> {
    scene.validate()?;
    if let Some(n) = opts.noise {
        if !(n.photons > 0.0 && n.photons.is_finite()) {
            return Err(Error::invalid("noise photon count must be positive"));
        }
    }
    let axis = scene.resolve_axis()?;
    let wall = scene.wall_sampling();
    let lasers = scene.laser_sampling();
    let pixels = wall.pixels();
    let bins = axis.bins;
    let inv_pi = T::FRAC_1_PI();

    let rows: Vec<Vec<f32>> = (0..lasers.shots() * pixels)
        .into_par_iter()
        .map(|row| -> Result<Vec<f32>> {
            let (s, p) = (row / pixels, row % pixels);
            let l = lasers.positions[s];
            let wp = wall.positions[p];
            let offset = lasers.laser_offsets[s] + wall.camera_offsets[p];
            let mut hist = vec![T::zero(); bins];
            for x in &scene.hidden_surfaces {
                let g = geometric_attenuation(l, x.position, wp)?;
                let to_l = l - x.position;
                let to_p = wp - x.position;
                let cos_in = clamp01(x.normal.dot(to_l) / to_l.norm());
                let cos_out = clamp01(x.normal.dot(to_p) / to_p.norm());
                let w = x.albedo * inv_pi * cos_in * cos_out * g * x.area;
                let t = offset + three_bounce_time(l, x.position, wp, axis.c);
                if let Some(k) = axis.time_to_bin(t) {
                    hist[k] += w;
                }
            }
            let mut out: Vec<f32> = hist
                .iter()
                .map(|v| v.to_f32().unwrap_or(f32::MAX))
                .collect();
            if let Some(noise) = opts.noise {
                let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
                rng.set_stream(row as u64);
                for v in out.iter_mut() {
                    let lambda = *v as f64 * noise.photons;
                    *v = if lambda > 0.0 {
                        let n = Poisson::new(lambda)
                            .map(|d| d.sample(&mut rng))
                            .unwrap_or(lambda);
                        (n / noise.photons) as f32
                    } else {
                        0.0
                    };
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    TransientDataset::new(axis, wall, lasers, rows.concat())
}

#[inline]
fn clamp01<T: Real>(v: T) -> T {
    v.max(T::zero()).min(T::one())
}
