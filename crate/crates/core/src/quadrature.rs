//! Ten-point Gauss-Legendre rules on [-1, 1] and their maps to rectangles.

use crate::error::{Error, Result};

/// `(weight, node)` pairs on [-1, 1], as tabulated to nine digits.
pub const GAUSS_LEGENDRE_10: [(f64, f64); 10] = [
    (0.295524225, -0.148874339),
    (0.295524225, 0.148874339),
    (0.269266719, -0.433395394),
    (0.269266719, 0.433395394),
    (0.219086363, -0.679409568),
    (0.219086363, 0.679409568),
    (0.149451349, -0.865063367),
    (0.149451349, 0.865063367),
    (0.066671344, -0.973906529),
    (0.066671344, 0.973906529),
];

/// Integral of `f` over `[a, b]` by the affine-mapped 10-point rule.
pub fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    GAUSS_LEGENDRE_10.iter().map(|(w, x)| w * f(half * x + mid)).sum::<f64>() * half
}

/// Tensor-product rule over `[x0, x1] × [y0, y1]`. No NaN check.
pub fn integrate_rect(f: &impl Fn(f64, f64) -> f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (hx, mx) = (0.5 * (x1 - x0), 0.5 * (x1 + x0));
    let (hy, my) = (0.5 * (y1 - y0), 0.5 * (y1 + y0));
    let mut acc = 0.0;
    for (wi, xi) in GAUSS_LEGENDRE_10 {
        let x = hx * xi + mx;
        let mut row = 0.0;
        for (wj, yj) in GAUSS_LEGENDRE_10 {
            row += wj * f(x, hy * yj + my);
        }
        acc += wi * row;
    }
    acc * hx * hy
}

/// 10×10 tensor rule over the unit square. A non-finite result is an error.
pub fn gauss_legendre_integrate_2d(f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let v = integrate_rect(&f, 0.0, 1.0, 0.0, 1.0);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical("quadrature integrand produced a non-finite value".into()))
    }
}
