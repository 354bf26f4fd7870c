//! Independent oracles for the acceptance suite. Nothing here calls into the
//! crate's numerics: rays, slabs and constants are set up from scratch.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const STEFAN: f64 = 5.67e-8;
pub const C_TO_K: f64 = 273.15;

pub type P3 = [f64; 3];

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn axpy(o: P3, s: f64, d: P3) -> P3 {
    [o[0] + s * d[0], o[1] + s * d[1], o[2] + s * d[2]]
}

fn unit(a: P3) -> P3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Möller-Trumbore; hit distance along `d` if positive.
fn ray_triangle(o: P3, d: P3, tri: &[P3; 3]) -> Option<f64> {
    let e1 = sub(tri[1], tri[0]);
    let e2 = sub(tri[2], tri[0]);
    let p = cross(d, e2);
    let det = dot(e1, p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = sub(o, tri[0]);
    let u = dot(s, p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = cross(s, e1);
    let v = dot(d, q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = dot(e2, q) * inv;
    (t > 1e-12).then_some(t)
}

/// Parallelogram `origin + s·u + t·v` as two triangles.
pub fn quad(origin: P3, u: P3, v: P3) -> [[P3; 3]; 2] {
    let a = origin;
    let b = axpy(origin, 1.0, u);
    let c = axpy(b, 1.0, v);
    let d = axpy(origin, 1.0, v);
    [[a, b, c], [a, c, d]]
}

/// Monte Carlo view factor from the parallelogram `(origin, u, v)` (normal
/// along `u × v`) to a set of triangles, by cosine-weighted emission.
pub fn mc_view_factor(origin: P3, u: P3, v: P3, target: &[[P3; 3]], rays: usize, seed: u64) -> f64 {
    let n = unit(cross(u, v));
    let t1 = unit(u);
    let t2 = cross(n, t1);
    let chunks = 200;
    let per = rays / chunks;
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(c as u64));
            let mut h = 0;
            for _ in 0..per {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                let o = axpy(axpy(origin, a, u), b, v);
                let (x1, x2): (f64, f64) = (rng.random(), rng.random());
                let r = x1.sqrt();
                let phi = std::f64::consts::TAU * x2;
                let z = (1.0 - x1).sqrt();
                let d = [
                    r * phi.cos() * t1[0] + r * phi.sin() * t2[0] + z * n[0],
                    r * phi.cos() * t1[1] + r * phi.sin() * t2[1] + z * n[1],
                    r * phi.cos() * t1[2] + r * phi.sin() * t2[2] + z * n[2],
                ];
                if target.iter().any(|tri| ray_triangle(o, d, tri).is_some()) {
                    h += 1;
                }
            }
            h
        })
        .sum();
    hits as f64 / (per * chunks) as f64
}

/// Uniform slab with a radiative-convective top and an adiabatic bottom.
#[derive(Debug, Clone, Copy)]
pub struct Slab {
    pub thickness: f64,
    pub k: f64,
    pub rho: f64,
    pub c: f64,
    /// Effective emissivity for the exchange with the surroundings.
    pub emissivity: f64,
    pub h: f64,
    /// K
    pub t_air: f64,
    /// K, also the radiative surroundings.
    pub t0: f64,
    /// Absorbed flux at the top, W m⁻².
    pub q_abs: f64,
}

/// Vertex-centred explicit finite differences, half cells at both faces.
pub struct ExplicitSlab {
    pub s: Slab,
    pub t: Vec<f64>,
    pub dz: f64,
    pub dt: f64,
    pub time: f64,
}

impl ExplicitSlab {
    pub fn new(s: Slab, nodes: usize, dt_max: f64) -> Self {
        let dz = s.thickness / (nodes - 1) as f64;
        let alpha = s.k / (s.rho * s.c);
        // stability needs dt < dz²/(2α); also cap by the top node's film
        let dt = (0.4 * dz * dz / alpha).min(dt_max);
        Self {
            s,
            t: vec![s.t0; nodes],
            dz,
            dt,
            time: 0.0,
        }
    }

    fn step(&mut self, dt: f64) {
        let s = self.s;
        let n = self.t.len();
        let rc = s.rho * s.c;
        let g = s.k / self.dz;
        let mut next = self.t.clone();
        let t0 = self.t[0];
        let top = s.q_abs - s.emissivity * STEFAN * (t0.powi(4) - s.t_air.powi(4)) - s.h * (t0 - s.t_air);
        next[0] = t0 + dt * (top + g * (self.t[1] - t0)) / (0.5 * rc * self.dz);
        let r = dt * s.k / (rc * self.dz * self.dz);
        for (x, w) in next[1..n - 1].iter_mut().zip(self.t.windows(3)) {
            *x = w[1] + r * (w[0] - 2.0 * w[1] + w[2]);
        }
        next[n - 1] = self.t[n - 1] + dt * g * (self.t[n - 2] - self.t[n - 1]) / (0.5 * rc * self.dz);
        self.t = next;
        self.time += dt;
    }

    /// Thickness-weighted mean.
    pub fn mean(&self) -> f64 {
        let n = self.t.len();
        let inner: f64 = self.t[1..n - 1].iter().sum();
        (inner + 0.5 * (self.t[0] + self.t[n - 1])) / (n - 1) as f64
    }

    /// Advances exactly to `t_end`.
    pub fn advance_to(&mut self, t_end: f64) {
        let span = t_end - self.time;
        if span <= 0.0 {
            return;
        }
        let k = (span / self.dt).ceil() as usize;
        let dt = span / k as f64;
        for _ in 0..k {
            self.step(dt);
        }
        self.time = t_end;
    }

    /// First time the mean crosses `threshold`, interpolated linearly;
    /// `None` if it has not by `t_max`.
    pub fn crossing(&mut self, threshold: f64, t_max: f64) -> Option<f64> {
        let mut prev = (self.time, self.mean());
        while self.time < t_max {
            let dt = self.dt;
            self.step(dt);
            let m = self.mean();
            if m >= threshold {
                return Some(prev.0 + (self.time - prev.0) * (threshold - prev.1) / (m - prev.1));
            }
            prev = (self.time, m);
        }
        None
    }
}

/// Sky view factor of the inner wall of an open circular tube (both ends
/// open), from the coaxial disk-to-disk closed form.
pub fn tube_wall_sky_view(radius: f64, height: f64) -> f64 {
    let x = 2.0 + (height / radius).powi(2);
    let f_dd = 0.5 * (x - (x * x - 4.0).sqrt());
    (1.0 - f_dd) * radius / height
}

/// Grey isothermal cavity wall exchanging with black surroundings through
/// its openings.
pub fn cavity_emissivity(eps: f64, sky_view: f64) -> f64 {
    eps * sky_view / (1.0 - (1.0 - eps) * (1.0 - sky_view))
}

/// `(thickness, conductivity, density, specific heat)` outer to inner.
pub type Stack = Vec<(f64, f64, f64, f64)>;

pub fn wall_stack() -> Stack {
    vec![
        (0.03, 1.51, 2400.0, 880.0),
        (0.07, 0.67, 1600.0, 625.0),
        (0.07, 0.67, 1600.0, 625.0),
        (0.03, 1.51, 2400.0, 880.0),
    ]
}

pub fn roof_stack() -> Stack {
    vec![
        (0.015, 1.4, 2000.0, 880.0),
        (0.015, 1.4, 2000.0, 880.0),
        (0.01, 0.03, 40.0, 1000.0),
        (0.03, 1.51, 2400.0, 920.0),
    ]
}

pub fn street_stack() -> Stack {
    vec![
        (0.05, 0.82, 2110.0, 820.0),
        (0.2, 2.1, 2400.0, 830.0),
        (0.1, 0.4, 1300.0, 1080.0),
        (0.1, 0.4, 1300.0, 1080.0),
    ]
}

/// Series conductance `1/Σ(L/k)`, W m⁻² K⁻¹.
pub fn conductance(stack: &Stack) -> f64 {
    1.0 / stack.iter().map(|l| l.0 / l.1).sum::<f64>()
}

pub fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Prints the criterion line and fails the test when it does not hold.
pub fn verdict(n: u32, what: &str, ok: bool, detail: &str) {
    println!("criterion {n:>2} {} {what}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {what}: {detail}");
}

pub fn uniform_random(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
