//! Lie group structure of the Langevin operator: translations, dilations and the homogeneous norm.

use crate::linalg::Vec2;

/// A point `(t, x, v)` of the space-time group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

impl Point {
    pub const fn new(t: f64, x: f64, v: f64) -> Self {
        Point { t, x, v }
    }

    pub const fn origin() -> Self {
        Point::new(0.0, 0.0, 0.0)
    }

    pub fn space(&self) -> Vec2 {
        [self.x, self.v]
    }
}

/// `(tau, xi, eta) * (t, x, v) = (t + tau, x + xi + t*eta, v + eta)`.
pub fn compose(a: Point, b: Point) -> Point {
    Point::new(b.t + a.t, b.x + a.x + b.t * a.v, b.v + a.v)
}

pub fn inverse(p: Point) -> Point {
    Point::new(-p.t, -p.x + p.t * p.v, -p.v)
}

/// `delta_lambda(t, x, v) = (lambda^2 t, lambda^3 x, lambda v)`.
pub fn dilate(lambda: f64, p: Point) -> Point {
    Point::new(lambda * lambda * p.t, lambda * lambda * lambda * p.x, lambda * p.v)
}

/// Spatial part `D_lambda = diag(lambda^3, lambda)`.
pub fn spatial_dilation(lambda: f64, z: Vec2) -> Vec2 {
    [lambda * lambda * lambda * z[0], lambda * z[1]]
}

/// `|t|^{1/2} + |x|^{1/3} + |v|`.
pub fn homogeneous_norm(p: Point) -> f64 {
    p.t.abs().sqrt() + p.x.abs().cbrt() + p.v.abs()
}

/// Spatial homogeneous norm `|x|^{1/3} + |v|`.
pub fn spatial_norm(z: Vec2) -> f64 {
    z[0].abs().cbrt() + z[1].abs()
}

/// `d(p, q) = |q^{-1} * p|`.
pub fn distance(p: Point, q: Point) -> f64 {
    homogeneous_norm(compose(inverse(q), p))
}

/// Free transport `gamma^B_t(x, v) = (x + t v, v)`.
pub fn free_flow(t: f64, z: Vec2) -> Vec2 {
    [z[0] + t * z[1], z[1]]
}

/// `(tau, zeta)^{-1} * (t, z) = (t - tau, z - gamma^B_{t - tau}(zeta))`.
pub fn transition(tau: f64, zeta: Vec2, t: f64, z: Vec2) -> Point {
    let g = free_flow(t - tau, zeta);
    Point::new(t - tau, z[0] - g[0], z[1] - g[1])
}
