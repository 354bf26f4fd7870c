//! Procedural meshes for tests, benchmarks and example scenarios.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::Patch;

/// Parallelogram `origin + s·u + t·v`, `s,t ∈ [0,1]`, split into `n×n`
/// cells of two triangles each. Normal is along `u × v`.
pub fn square(origin: Vec3, u: Vec3, v: Vec3, n: usize) -> Vec<Patch> {
    let mut out = Vec::with_capacity(2 * n * n);
    push_square(&mut out, origin, u, v, n, None);
    out
}

fn push_square(out: &mut Vec<Patch>, origin: Vec3, u: Vec3, v: Vec3, n: usize, group: Option<&str>) {
    let n = n.max(1);
    let du = u / n as f64;
    let dv = v / n as f64;
    for i in 0..n {
        for j in 0..n {
            let p00 = origin + du * i as f64 + dv * j as f64;
            let p10 = p00 + du;
            let p01 = p00 + dv;
            let p11 = p00 + du + dv;
            for (a, b, c) in [(p00, p10, p11), (p00, p11, p01)] {
                let id = out.len();
                let mut p = Patch::from_vertices(id, a, b, c).expect("non-degenerate cell");
                p.group = group.map(str::to_owned);
                out.push(p);
            }
        }
    }
}

/// Axis-aligned box faces with `n×n` cells per face. Outward normals unless
/// `inward`. The bottom face is emitted only when `bottom` is set.
pub fn boxed(min: Vec3, max: Vec3, n: usize, inward: bool, bottom: bool, prefix: &str) -> Vec<Patch> {
    let d = max - min;
    let (ex, ey, ez) = (Vec3::x() * d.x, Vec3::y() * d.y, Vec3::z() * d.z);
    // (origin, u, v, name) with u × v outward
    let mut faces = vec![
        (min + ez, ex, ey, "top"),
        (min, ez, ey, "south"), // x = min faces -x (south)
        (min + ex, ey, ez, "north"),
        (min, ex, ez, "east"), // y = min faces -y (east)
        (min + ey, ez, ex, "west"),
    ];
    if bottom {
        faces.push((min, ey, ex, "bottom"));
    }
    let mut out = Vec::new();
    for (o, u, v, name) in faces {
        let (u, v) = if inward { (v, u) } else { (u, v) };
        let group = format!("{prefix}{name}");
        push_square(&mut out, o, u, v, n, Some(&group));
    }
    for (i, p) in out.iter_mut().enumerate() {
        p.id = i;
    }
    out
}

/// Upward-facing horizontal disk as a fan of `segments` triangles.
pub fn disk(center: Vec3, radius: f64, segments: usize) -> Result<Vec<Patch>> {
    if segments < 3 || !(radius > 0.0) {
        return Err(Error::InvalidArgument("disk needs radius > 0 and at least 3 segments".into()));
    }
    let rim = |k: usize| {
        let a = std::f64::consts::TAU * k as f64 / segments as f64;
        center + Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
    };
    (0..segments).map(|k| Patch::from_vertices(k, center, rim(k), rim(k + 1))).collect()
}

/// Inner wall of an open vertical tube standing on `center`, `segments`
/// around and `rings` high, with normals pointing at the axis.
pub fn tube_inner(center: Vec3, radius: f64, height: f64, segments: usize, rings: usize) -> Result<Vec<Patch>> {
    if segments < 3 || rings == 0 || !(radius > 0.0 && height > 0.0) {
        return Err(Error::InvalidArgument("tube needs positive size, 3+ segments and 1+ rings".into()));
    }
    let at = |k: usize, j: usize| {
        let a = std::f64::consts::TAU * k as f64 / segments as f64;
        center + Vec3::new(radius * a.cos(), radius * a.sin(), height * j as f64 / rings as f64)
    };
    let mut out = Vec::with_capacity(2 * segments * rings);
    for j in 0..rings {
        for k in 0..segments {
            let (p00, p10, p01, p11) = (at(k, j), at(k + 1, j), at(k, j + 1), at(k + 1, j + 1));
            // clockwise seen from outside, so the normal faces inward
            for (a, b, c) in [(p00, p11, p10), (p00, p01, p11)] {
                out.push(Patch::from_vertices(out.len(), a, b, c)?);
            }
        }
    }
    Ok(out)
}

/// Closed unit cube, 12 triangles.
pub fn unit_cube(inward: bool) -> Vec<Patch> {
    boxed(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), 1, inward, true, "")
}

/// Regular `k×k` array of cubical buildings of side `size` with spacing
/// `street` between them, standing on a ground grid that surrounds them
/// with a margin of one street width. Faces are grouped as
/// `b<i>_<facet>` and `ground`.
pub fn cube_array(k: usize, size: f64, street: f64, wall_cells: usize, ground_cell: f64) -> Vec<Patch> {
    let pitch = size + street;
    let extent = k as f64 * pitch + street;
    let mut out = Vec::new();
    for bi in 0..k {
        for bj in 0..k {
            let min = Vec3::new(street + bi as f64 * pitch, street + bj as f64 * pitch, 0.0);
            let max = min + Vec3::new(size, size, size);
            let prefix = format!("b{}_", bi * k + bj);
            let start = out.len();
            out.extend(boxed(min, max, wall_cells, false, false, &prefix));
            for (off, p) in out[start..].iter_mut().enumerate() {
                p.id = start + off;
            }
        }
    }
    // ground cells that are not under a building
    let m = (extent / ground_cell).round().max(1.0) as usize;
    let cell = extent / m as f64;
    for i in 0..m {
        for j in 0..m {
            let c = Vec3::new((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell, 0.0);
            let inside = |x: f64| {
                let r = (x - street) / pitch;
                r >= 0.0 && r < k as f64 && (x - street - r.floor() * pitch) < size
            };
            if inside(c.x) && inside(c.y) {
                continue;
            }
            let o = Vec3::new(i as f64 * cell, j as f64 * cell, 0.0);
            let start = out.len();
            push_square(&mut out, o, Vec3::x() * cell, Vec3::y() * cell, 1, Some("ground"));
            for (off, p) in out[start..].iter_mut().enumerate() {
                p.id = start + off;
            }
        }
    }
    out
}
