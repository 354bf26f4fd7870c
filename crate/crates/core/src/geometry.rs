//! Small vector and triangle helpers shared by the mesh, shading and
//! view-factor code.
//!
//! Scene axes follow the solar convention used throughout the crate:
//! `x` points to geographic north, `y` to the west and `z` up.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Offset along a ray below which an intersection is treated as self-hit.
pub const RAY_EPSILON: f64 = 1e-6;

/// A flat triangle with cached plane data, used for ray queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [Vec3; 3],
}

impl Triangle {
    pub fn new(a: Vec3, b: Vec3, c: Vec3) -> Self {
        Self { v: [a, b, c] }
    }

    /// Unnormalized winding normal `e1 × e2`.
    pub fn cross(&self) -> Vec3 {
        (self.v[1] - self.v[0]).cross(&(self.v[2] - self.v[0]))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.cross().norm()
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }

    pub fn perimeter(&self) -> f64 {
        (self.v[1] - self.v[0]).norm() + (self.v[2] - self.v[1]).norm() + (self.v[0] - self.v[2]).norm()
    }

    /// Barycentric containment test for a point assumed to lie in the plane.
    pub fn contains_coplanar(&self, p: &Vec3) -> bool {
        let e0 = self.v[1] - self.v[0];
        let e1 = self.v[2] - self.v[0];
        let w = p - self.v[0];
        let d00 = e0.dot(&e0);
        let d01 = e0.dot(&e1);
        let d11 = e1.dot(&e1);
        let d20 = w.dot(&e0);
        let d21 = w.dot(&e1);
        let denom = d00 * d11 - d01 * d01;
        if denom.abs() < f64::MIN_POSITIVE {
            return false;
        }
        let v = (d11 * d20 - d01 * d21) / denom;
        let u = (d00 * d21 - d01 * d20) / denom;
        const TOL: f64 = 1e-12;
        v >= -TOL && u >= -TOL && u + v <= 1.0 + TOL
    }
}

/// Line/plane intersection parameter: the `l` for which
/// `origin + l·dir` lies on the plane through `point` with normal `normal`.
/// Returns `None` for rays parallel to the plane.
pub fn line_plane_parameter(origin: &Vec3, dir: &Vec3, point: &Vec3, normal: &Vec3) -> Option<f64> {
    let denom = normal.dot(dir);
    if denom.abs() < 1e-14 {
        return None;
    }
    Some(-normal.dot(&(origin - point)) / denom)
}

/// Distance along `dir` at which the ray hits `tri`, if it does so beyond
/// [`RAY_EPSILON`] and before `max_l`.
pub fn ray_hits_triangle(origin: &Vec3, dir: &Vec3, tri: &Triangle, normal: &Vec3, max_l: f64) -> Option<f64> {
    let l = line_plane_parameter(origin, dir, &tri.centroid(), normal)?;
    if l <= RAY_EPSILON || l >= max_l {
        return None;
    }
    let hit = origin + dir * l;
    tri.contains_coplanar(&hit).then_some(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_hits_overhead_triangle() {
        let tri = Triangle::new(
            Vec3::new(-1.0, -1.0, 2.0),
            Vec3::new(2.0, -1.0, 2.0),
            Vec3::new(-1.0, 2.0, 2.0),
        );
        let n = tri.cross().normalize();
        let l = ray_hits_triangle(&Vec3::zeros(), &Vec3::z(), &tri, &n, f64::INFINITY);
        assert!((l.unwrap() - 2.0).abs() < 1e-12);
        assert!(ray_hits_triangle(&Vec3::zeros(), &-Vec3::z(), &tri, &n, f64::INFINITY).is_none());
        assert!(ray_hits_triangle(&Vec3::zeros(), &Vec3::x(), &tri, &n, f64::INFINITY).is_none());
    }

    #[test]
    fn containment_edges() {
        let tri = Triangle::new(Vec3::zeros(), Vec3::x(), Vec3::y());
        assert!(tri.contains_coplanar(&Vec3::new(0.25, 0.25, 0.0)));
        assert!(!tri.contains_coplanar(&Vec3::new(0.75, 0.75, 0.0)));
        assert!((tri.perimeter() - (2.0 + 2f64.sqrt())).abs() < 1e-12);
    }
}
