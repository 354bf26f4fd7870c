//! Diffuse view factors between triangular patches by the contour-integral
//! method, with centroid-ray occlusion.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ray_hits_triangle, Triangle, Vec3, RAY_EPSILON};
use crate::mesh::Patch;
use crate::quadrature::integrate_rect;

/// Dense patch-to-patch view factors. `f[(i, j)]` is the fraction of
/// radiation leaving `i` that arrives at `j`.
#[derive(Debug, Clone)]
pub struct ViewFactorMatrix {
    pub f: DMatrix<f64>,
    pub sky_vf: Vec<f64>,
    /// Row-major `n×n`; set when the centroid ray between a visible pair is blocked.
    pub occlusion_mask: Vec<bool>,
}

impl ViewFactorMatrix {
    pub fn len(&self) -> usize {
        self.sky_vf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sky_vf.is_empty()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.f.row(i).sum()
    }

    pub fn occluded(&self, i: usize, j: usize) -> bool {
        self.occlusion_mask[i * self.len() + j]
    }

    /// Matrix with no inter-patch exchange: every patch sees only sky.
    pub fn sky_only(n: usize) -> Self {
        Self {
            f: DMatrix::zeros(n, n),
            sky_vf: vec![1.0; n],
            occlusion_mask: vec![false; n * n],
        }
    }

    /// Writes `viewfactors.csv` (nonzero `i,j,F_ij`) and `sky_vf.csv`
    /// (`patch_id,sky_vf`) into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("viewfactors.csv");
        let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        let io = |e| Error::io(&path, e);
        writeln!(w, "i,j,F_ij").map_err(io)?;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let v = self.f[(i, j)];
                if v != 0.0 {
                    writeln!(w, "{i},{j},{v:.9e}").map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)?;
        let path = dir.join("sky_vf.csv");
        let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        let io = |e| Error::io(&path, e);
        writeln!(w, "patch_id,sky_vf").map_err(io)?;
        for (i, s) in self.sky_vf.iter().enumerate() {
            writeln!(w, "{i},{s:.9e}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Both centroid dot products strictly positive.
pub fn mutually_visible(a: &Patch, b: &Patch) -> bool {
    let d = b.centroid - a.centroid;
    a.normal.dot(&d) > 0.0 && b.normal.dot(&(-d)) > 0.0
}

/// Closest distance between segments `[p0, p1]` and `[q0, q1]`.
fn segment_distance(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

const MAX_DEPTH: u32 = 24;

/// Quadtree refinement of the 10×10 rule until the four children agree with
/// their parent to the absolute tolerance `tol`.
#[allow(clippy::too_many_arguments)]
fn adaptive(f: &impl Fn(f64, f64) -> f64, x0: f64, x1: f64, y0: f64, y1: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let xm = 0.5 * (x0 + x1);
    let ym = 0.5 * (y0 + y1);
    let quads = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)];
    let parts = quads.map(|(a, b, c, d)| integrate_rect(f, a, b, c, d));
    let sum: f64 = parts.iter().sum();
    if depth == 0 || (sum - whole).abs() <= tol {
        return sum;
    }
    quads
        .iter()
        .zip(parts)
        .map(|(&(a, b, c, d), w)| adaptive(f, a, b, c, d, w, tol, depth - 1))
        .sum()
}

/// `∫₀¹∫₀¹ ln(S²) dλ_Q dλ_P` in closed form when the two edges lie on one
/// line, where the integrand is singular along a whole segment and
/// quadrature refinement would not terminate in useful time.
fn collinear_log_integral(qa: &Vec3, q: &Vec3, pa: &Vec3, p: &Vec3, scale: f64) -> Option<f64> {
    let lq = q.norm();
    let e = q / lq;
    let tol = 1e-9 * scale.max(1e-12);
    if p.cross(&e).norm() > 1e-12 * p.norm() || (pa - qa).cross(&e).norm() > tol {
        return None;
    }
    // S = α + β λ_Q - γ λ_P along the shared line
    let (alpha, beta, gamma) = ((qa - pa).dot(&e), lq, p.dot(&e));
    let f2 = |x: f64| if x == 0.0 { 0.0 } else { 0.5 * x * x * x.abs().ln() - 0.75 * x * x };
    let i = -(f2(alpha + beta - gamma) - f2(alpha - gamma) - f2(alpha + beta) + f2(alpha)) / (beta * gamma);
    Some(2.0 * i)
}

/// `Σ_m Σ_n ∫∫ ln(S²) p·q dλ_Q dλ_P` over all edge pairs of two triangles.
/// Equals `4π A_Q F_QP` and is symmetric in its arguments.
fn contour_sum(qv: &[Vec3; 3], pv: &[Vec3; 3]) -> Result<f64> {
    let scale = qv
        .iter()
        .chain(pv.iter())
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        .max((qv[1] - qv[0]).norm());
    let same = |a: &Vec3, b: &Vec3| (a - b).norm() <= 1e-9 * scale.max(1e-12);
    let mut total = 0.0;
    for m in 0..3 {
        let qa = qv[m];
        let qb = qv[(m + 1) % 3];
        let q = qb - qa;
        for n in 0..3 {
            let pa = pv[n];
            let pb = pv[(n + 1) % 3];
            let p = pb - pa;
            let pq = p.dot(&q);
            if pq.abs() <= 1e-15 * p.norm_squared().max(q.norm_squared()) {
                continue;
            }
            let (lq2, lp2) = (q.norm_squared(), p.norm_squared());
            if (same(&qa, &pa) && same(&qb, &pb)) || (same(&qa, &pb) && same(&qb, &pa)) {
                // ∫∫ ln((1 - a - b)² L²) over the unit square, closed form
                total += pq * (lq2.ln() - 3.0);
                continue;
            }
            if let Some(v) = collinear_log_integral(&qa, &q, &pa, &p, scale) {
                total += pq * v;
                continue;
            }
            let qp = pa - qa;
            let (qp2, qpq, qpp) = (qp.norm_squared(), qp.dot(&q), qp.dot(&p));
            let f = |lq: f64, lp: f64| {
                let s2 = lq * lq * lq2 + lp * lp * lp2 + qp2 - 2.0 * lq * qpq + 2.0 * lp * qpp - 2.0 * lq * lp * pq;
                s2.max(f64::MIN_POSITIVE).ln()
            };
            let whole = integrate_rect(&f, 0.0, 1.0, 0.0, 1.0);
            let near = segment_distance(&qa, &qb, &pa, &pb) < 0.5 * lq2.sqrt().min(lp2.sqrt());
            let v = if near {
                adaptive(&f, 0.0, 1.0, 0.0, 1.0, whole, 1e-13, MAX_DEPTH)
            } else {
                whole
            };
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite contour integral for edges {m},{n}")));
            }
            total += pq * v;
        }
    }
    Ok(total)
}

/// `A_Q F_QP`, without visibility or occlusion tests. Negative round-off is
/// clipped to zero.
fn exchange_area(q: &Patch, p: &Patch) -> Result<f64> {
    let g = contour_sum(&q.vertices, &p.vertices)? / (4.0 * std::f64::consts::PI);
    Ok(g.max(0.0))
}

/// View factor from `q` to `p`, zero unless the two face each other.
pub fn view_factor_pair(q: &Patch, p: &Patch) -> Result<f64> {
    if !(q.area > 0.0 && p.area > 0.0) {
        return Err(Error::DegenerateTriangle {
            face: if q.area > 0.0 { p.id } else { q.id },
            area: q.area.min(p.area),
        });
    }
    if !mutually_visible(q, p) {
        return Ok(0.0);
    }
    Ok((exchange_area(q, p)? / q.area).clamp(0.0, 1.0))
}

/// True if the centroid segment from `a` to `b` passes through any third patch.
pub fn pair_occluded(a: usize, b: usize, patches: &[Patch], tris: &[Triangle]) -> bool {
    let d = patches[b].centroid - patches[a].centroid;
    let dist = d.norm();
    let dir = d / dist;
    let max_l = dist - RAY_EPSILON;
    patches.iter().enumerate().any(|(k, pk)| {
        k != a && k != b && ray_hits_triangle(&patches[a].centroid, &dir, &tris[k], &pk.normal, max_l).is_some()
    })
}

/// All-pairs view factors. Pairs are evaluated once and both directions are
/// filled from the shared exchange area, so reciprocity holds to round-off.
pub fn build_view_factor_matrix(patches: &[Patch]) -> Result<ViewFactorMatrix> {
    let n = patches.len();
    let tris: Vec<Triangle> = patches.iter().map(Patch::triangle).collect();
    let rows: Vec<Vec<(usize, f64, bool)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in i + 1..n {
                if !mutually_visible(&patches[i], &patches[j]) {
                    continue;
                }
                if pair_occluded(i, j, patches, &tris) {
                    out.push((j, 0.0, true));
                    continue;
                }
                out.push((j, exchange_area(&patches[i], &patches[j])?, false));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut f = DMatrix::zeros(n, n);
    let mut occlusion_mask = vec![false; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (j, g, blocked) in row {
            if blocked {
                occlusion_mask[i * n + j] = true;
                occlusion_mask[j * n + i] = true;
                continue;
            }
            f[(i, j)] = (g / patches[i].area).min(1.0);
            f[(j, i)] = (g / patches[j].area).min(1.0);
        }
    }
    let sky_vf = (0..n).map(|i| (1.0 - f.row(i).sum()).max(0.0)).collect();
    Ok(ViewFactorMatrix { f, sky_vf, occlusion_mask })
}
