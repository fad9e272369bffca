//! Low-level 3-D geometry shared by the tracer and the ERP solver.
//!
//! Angles follow the array-steering convention: azimuth `θ` is measured
//! counter-clockwise from +x in the xy-plane, zenith `φ` is measured from +z.
//! A direction is therefore `(sinφ cosθ, sinφ sinθ, cosφ)`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset applied to secondary rays and segment ends to suppress self-hits.
pub const SELF_HIT_EPS: f64 = 1e-9;

/// Tolerance on the norm of a vector that is supposed to be a unit direction.
pub const UNIT_TOL: f64 = 1e-9;

/// Triangles with area at or below this value (m²) are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("expected a unit direction, got norm {0}")]
    NonUnitDirection(f64),
    #[error("degenerate triangle (area {0:e} m²)")]
    DegenerateTriangle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn midpoint(self, o: Vec3) -> Vec3 {
        (self + o) * 0.5
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Azimuth in `[0, 2π)` and zenith in `[0, π]`, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnglePair {
    pub azimuth: f64,
    pub zenith: f64,
}

impl AnglePair {
    pub fn new(azimuth: f64, zenith: f64) -> Self {
        Self { azimuth, zenith }
    }
}

pub fn direction_from_angles(a: AnglePair) -> Vec3 {
    let (sin_z, cos_z) = a.zenith.sin_cos();
    let (sin_a, cos_a) = a.azimuth.sin_cos();
    Vec3::new(sin_z * cos_a, sin_z * sin_a, cos_z)
}

/// Inverse of [`direction_from_angles`]. Azimuth is canonicalized to 0 at the
/// poles.
pub fn angles_from_direction(d: Vec3) -> Result<AnglePair, GeomError> {
    let n = d.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(GeomError::NonUnitDirection(n));
    }
    let horizontal = d.x.hypot(d.y);
    // atan2 on (horizontal, z) stays accurate near both poles where acos does not.
    let zenith = horizontal.atan2(d.z);
    let azimuth = if horizontal == 0.0 {
        0.0
    } else {
        let az = d.y.atan2(d.x);
        let wrapped = if az < 0.0 { az + TAU } else { az };
        // atan2 can return -0 or values that round to exactly 2π after the shift.
        if wrapped >= TAU {
            0.0
        } else {
            wrapped.max(0.0)
        }
    };
    debug_assert!((0.0..=PI).contains(&zenith));
    Ok(AnglePair { azimuth, zenith })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeomError> {
        let n = direction.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(GeomError::NonUnitDirection(n));
        }
        Ok(Self { origin, direction })
    }

    /// Ray from `from` toward `to`; `None` if the points coincide.
    pub fn toward(from: Vec3, to: Vec3) -> Option<Self> {
        (to - from).normalized().map(|direction| Self {
            origin: from,
            direction,
        })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
    pub material_id: usize,
}

impl Triangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3, material_id: usize) -> Result<Self, GeomError> {
        let t = Self {
            v0,
            v1,
            v2,
            material_id,
        };
        let area = t.area();
        if !(area > MIN_TRIANGLE_AREA) {
            return Err(GeomError::DegenerateTriangle(area));
        }
        Ok(t)
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.v1 - self.v0).cross(self.v2 - self.v0).norm()
    }

    /// Unit normal from the vertex winding (right-hand rule).
    pub fn normal(&self) -> Vec3 {
        (self.v1 - self.v0)
            .cross(self.v2 - self.v0)
            .normalized()
            .unwrap_or(Vec3::new(0.0, 0.0, 1.0))
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v0 + self.v1 + self.v2) / 3.0
    }

    /// Signed distance of `p` from the supporting plane, positive on the
    /// normal side.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        (p - self.v0).dot(self.normal())
    }

    /// Point from barycentric weights `(u, v)` on edges `v0→v1`, `v0→v2`.
    pub fn point_at(&self, u: f64, v: f64) -> Vec3 {
        self.v0 + (self.v1 - self.v0) * u + (self.v2 - self.v0) * v
    }

    pub fn translated(&self, t: Vec3) -> Triangle {
        Triangle {
            v0: self.v0 + t,
            v1: self.v1 + t,
            v2: self.v2 + t,
            material_id: self.material_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub point: Vec3,
}

/// Barycentric slack so points on a shared edge survive rounding on both
/// sides.
pub const BARY_TOL: f64 = 1e-12;

/// Möller–Trumbore ray/triangle test. Both faces are hit; hits closer than
/// [`SELF_HIT_EPS`] are ignored.
pub fn intersect(r: &Ray, t: &Triangle) -> Option<Hit> {
    let e1 = t.v1 - t.v0;
    let e2 = t.v2 - t.v0;
    let p = r.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = r.origin - t.v0;
    let u = s.dot(p) * inv;
    if !(-BARY_TOL..=1.0 + BARY_TOL).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = r.direction.dot(q) * inv;
    if v < -BARY_TOL || u + v > 1.0 + BARY_TOL {
        return None;
    }
    let distance = e2.dot(q) * inv;
    if distance <= SELF_HIT_EPS {
        return None;
    }
    Some(Hit {
        distance,
        point: r.at(distance),
    })
}

/// Reflection of `p` across the triangle's supporting plane.
pub fn mirror_point(p: Vec3, t: &Triangle) -> Vec3 {
    let n = t.normal();
    p - n * (2.0 * (p - t.v0).dot(n))
}

/// Specular reflection of a direction about a surface normal.
pub fn reflect(d: Vec3, normal: Vec3) -> Vec3 {
    d - normal * (2.0 * d.dot(normal))
}

/// Row-major 3×3 rotation used for rigid-motion checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(pub [[f64; 3]; 3]);

impl Rotation {
    /// Rotation by `angle` radians about unit `axis` (Rodrigues).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let k = axis.normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0));
        let (s, c) = angle.sin_cos();
        let v = 1.0 - c;
        Rotation([
            [c + k.x * k.x * v, k.x * k.y * v - k.z * s, k.x * k.z * v + k.y * s],
            [k.y * k.x * v + k.z * s, c + k.y * k.y * v, k.y * k.z * v - k.x * s],
            [k.z * k.x * v - k.y * s, k.z * k.y * v + k.x * s, c + k.z * k.z * v],
        ])
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
        )
    }
}
