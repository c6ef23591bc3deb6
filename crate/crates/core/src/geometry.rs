//! Small fixed-size vector and box types.

use std::ops::{Add, Div, Index, Mul, Neg, Sub};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    /// Converts between scalar types (e.g. `f64` scene data into an `f32` pipeline).
    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn component_min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn component_max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Index of the component with the largest magnitude (first wins on ties).
    pub fn dominant_axis(self) -> usize {
        let a = [self.x.abs(), self.y.abs(), self.z.abs()];
        let mut best = 0;
        for k in 1..3 {
            if a[k] > a[best] {
                best = k;
            }
        }
        best
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Axis-aligned box, `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Self { min, max }
    }

    /// Smallest box containing every point; `None` for an empty iterator.
    pub fn from_points<I: IntoIterator<Item = Vec3<T>>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Self::new(first, first);
        for p in it {
            b.min = b.min.component_min(p);
            b.max = b.max.component_max(p);
        }
        Some(b)
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    /// True when every extent is strictly positive and finite.
    pub fn is_nonempty(&self) -> bool {
        let e = self.extent();
        self.min.is_finite()
            && self.max.is_finite()
            && e.x > T::zero()
            && e.y > T::zero()
            && e.z > T::zero()
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// The eight corners, x varying fastest.
    pub fn corners(&self) -> [Vec3<T>; 8] {
        let mut out = [self.min; 8];
        for (i, c) in out.iter_mut().enumerate() {
            *c = Vec3::new(
                if i & 1 == 0 { self.min.x } else { self.max.x },
                if i & 2 == 0 { self.min.y } else { self.max.y },
                if i & 4 == 0 { self.min.z } else { self.max.z },
            );
        }
        out
    }

    /// Grows every side by `fraction / 2` of the corresponding extent.
    pub fn expanded_by_fraction(&self, fraction: T) -> Self {
        let pad = self.extent() * (fraction * T::lit(0.5));
        Self::new(self.min - pad, self.max + pad)
    }

    /// Whether the closed segment `a..b` meets the box (slab test).
    pub fn intersects_segment(&self, a: Vec3<T>, b: Vec3<T>) -> bool {
        let d = b - a;
        let mut t0 = T::zero();
        let mut t1 = T::one();
        for k in 0..3 {
            if d[k] == T::zero() {
                if a[k] < self.min[k] || a[k] > self.max[k] {
                    return false;
                }
            } else {
                let inv = T::one() / d[k];
                let mut lo = (self.min[k] - a[k]) * inv;
                let mut hi = (self.max[k] - a[k]) * inv;
                if lo > hi {
                    std::mem::swap(&mut lo, &mut hi);
                }
                t0 = t0.max(lo);
                t1 = t1.min(hi);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle<T> {
    pub v0: Vec3<T>,
    pub v1: Vec3<T>,
    pub v2: Vec3<T>,
}

impl<T: Real> Triangle<T> {
    pub const fn new(v0: Vec3<T>, v1: Vec3<T>, v2: Vec3<T>) -> Self {
        Self { v0, v1, v2 }
    }

    /// Unnormalized normal `(v1 - v0) × (v2 - v0)`; zero for degenerate triangles.
    pub fn normal(&self) -> Vec3<T> {
        (self.v1 - self.v0).cross(self.v2 - self.v0)
    }

    pub fn centroid(&self) -> Vec3<T> {
        (self.v0 + self.v1 + self.v2) / T::lit(3.0)
    }

    pub fn area(&self) -> T {
        self.normal().norm() * T::lit(0.5)
    }
}
