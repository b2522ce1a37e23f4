use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3 { x, y, z }
    }

    /// Rejects NaN and infinities.
    pub fn checked(x: f64, y: f64, z: f64) -> Result<Vec3> {
        if x.is_finite() && y.is_finite() && z.is_finite() {
            Ok(Vec3 { x, y, z })
        } else {
            Err(Error::NonFinite)
        }
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn splat(v: f64) -> Vec3 {
        Vec3::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit vector, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    #[inline]
    pub fn div_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x / o.x, self.y / o.y, self.z / o.z)
    }

    #[inline]
    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn abs(self) -> Vec3 {
        Vec3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn max_component(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn min_component(self) -> f64 {
        self.x.min(self.y).min(self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl IndexMut<usize> for Vec3 {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Axis-aligned box stored as centre and half extents.
///
/// Half extents are positive for every box built through [`Aabb::new`];
/// [`Aabb::from_min_max`] also admits flat boxes, which the index needs for
/// query boxes that are exactly planar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub center: Vec3,
    pub half: Vec3,
}

impl Aabb {
    pub fn new(center: Vec3, half: Vec3) -> Result<Aabb> {
        if !center.is_finite() || !half.is_finite() {
            return Err(Error::NonFinite);
        }
        if half.x <= 0.0 || half.y <= 0.0 || half.z <= 0.0 {
            return Err(Error::InvalidLattice(format!("box half extents {half:?} not positive")));
        }
        Ok(Aabb { center, half })
    }

    pub fn from_min_max(min: Vec3, max: Vec3) -> Aabb {
        Aabb { center: (min + max) * 0.5, half: (max - min) * 0.5 }
    }

    #[inline]
    pub fn min(&self) -> Vec3 {
        self.center - self.half
    }

    #[inline]
    pub fn max(&self) -> Vec3 {
        self.center + self.half
    }

    pub fn dims(&self) -> Vec3 {
        self.half * 2.0
    }

    pub fn diagonal(&self) -> f64 {
        self.dims().norm()
    }

    /// Closed overlap: touching faces count.
    pub fn overlaps(&self, o: &Aabb) -> bool {
        let (a0, a1, b0, b1) = (self.min(), self.max(), o.min(), o.max());
        a0.x <= b1.x && b0.x <= a1.x && a0.y <= b1.y && b0.y <= a1.y && a0.z <= b1.z && b0.z <= a1.z
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let (lo, hi) = (self.min(), self.max());
        lo.x <= p.x && p.x <= hi.x && lo.y <= p.y && p.y <= hi.y && lo.z <= p.z && p.z <= hi.z
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb::from_min_max(self.min().min(o.min()), self.max().max(o.max()))
    }

    pub fn translate(&self, d: Vec3) -> Aabb {
        Aabb { center: self.center + d, half: self.half }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [Vec3; 3],
}

impl Triangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3) -> Triangle {
        Triangle { v: [v0, v1, v2] }
    }

    /// Edge vectors f_i = v_{i+1} - v_i.
    pub fn edges(&self) -> [Vec3; 3] {
        let [a, b, c] = self.v;
        [b - a, c - b, a - c]
    }

    pub fn normal(&self) -> Vec3 {
        triangle_normal(self)
    }

    pub fn is_degenerate(&self) -> bool {
        self.normal().norm_sq() == 0.0
    }

    pub fn area(&self) -> f64 {
        0.5 * self.normal().norm()
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }

    pub fn aabb(&self) -> Aabb {
        triangle_aabb(self)
    }

    pub fn translate(&self, d: Vec3) -> Triangle {
        Triangle::new(self.v[0] + d, self.v[1] + d, self.v[2] + d)
    }

    pub fn edge_lengths(&self) -> [f64; 3] {
        let e = self.edges();
        [e[0].norm(), e[1].norm(), e[2].norm()]
    }
}

/// Plane `n·x + d = 0` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub d: f64,
}

impl Plane {
    pub fn from_triangle(t: &Triangle) -> Result<Plane> {
        let n = t.normal().normalized().ok_or(Error::DegenerateTriangle)?;
        Ok(Plane { normal: n, d: -n.dot(t.v[0]) })
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) + self.d
    }
}

/// (v1 - v0) x (v2 - v0), unnormalised.
pub fn triangle_normal(t: &Triangle) -> Vec3 {
    (t.v[1] - t.v[0]).cross(t.v[2] - t.v[0])
}

/// Tight bounds; a flat axis is thickened by 1e-9 * max(1, extent) on its max side.
pub fn triangle_aabb(t: &Triangle) -> Aabb {
    let lo = t.v[0].min(t.v[1]).min(t.v[2]);
    let mut hi = t.v[0].max(t.v[1]).max(t.v[2]);
    let extent = (hi - lo).max_component();
    let eps = 1e-9 * extent.max(1.0);
    if hi.x == lo.x {
        hi.x += eps;
    }
    if hi.y == lo.y {
        hi.y += eps;
    }
    if hi.z == lo.z {
        hi.z += eps;
    }
    Aabb::from_min_max(lo, hi)
}
