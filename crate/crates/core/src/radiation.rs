//! Shortwave and longwave exchange with multiple diffuse reflections.
//!
//! Both bands share one bounce ledger. Arrivals `A⁰` come from the sun and
//! sky (and, for longwave, from lagged emission of the other patches); each
//! bounce reflects `U = a·A` and redistributes it with `A_i ← Σ_j F_ji U_j`.
//! Whatever leaves through the sky view is booked as escaped, and the last
//! reflected power that is not redistributed is the residual.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Patch;
use crate::solar::SolarState;
use crate::viewfactor::ViewFactorMatrix;
use crate::SIGMA;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReflectionSettings {
    /// Stop once the total reflected power of a bounce is below this (W).
    pub threshold_w: f64,
    pub min_bounces: usize,
    pub m_max: usize,
}

impl Default for ReflectionSettings {
    fn default() -> Self {
        Self {
            threshold_w: 1e-3,
            min_bounces: 1,
            m_max: 5,
        }
    }
}

/// Per-patch powers (W) of one band for one step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BandBudget {
    /// Sun-beam arrival (shortwave) or zero (longwave).
    pub direct: Vec<f64>,
    /// Sky arrival.
    pub sky: Vec<f64>,
    /// Total downwelling power over all bounces.
    pub down: Vec<f64>,
    /// Total reflected power, `reflectivity · down`.
    pub up: Vec<f64>,
    /// Number of redistribution bounces performed.
    pub bounces: usize,
    /// Reflected power left unredistributed after the last bounce.
    pub residual: f64,
    /// Reflected power that left through the sky view.
    pub escaped: f64,
    /// Total first-arrival power fed into the ledger.
    pub incident: f64,
}

impl BandBudget {
    /// `down - up`.
    pub fn net(&self, i: usize) -> f64 {
        self.down[i] - self.up[i]
    }

    pub fn absorbed_total(&self) -> f64 {
        self.down.iter().zip(&self.up).map(|(d, u)| d - u).sum()
    }
}

fn bounce_ledger(arrival: DVector<f64>, refl: &DVector<f64>, vf: &ViewFactorMatrix, s: &ReflectionSettings) -> (DVector<f64>, usize, f64, f64) {
    let n = arrival.len();
    let leak: DVector<f64> = DVector::from_iterator(n, (0..n).map(|j| 1.0 - vf.row_sum(j)));
    let mut down = arrival.clone();
    let mut u = arrival.component_mul(refl);
    let mut m = 0;
    let mut escaped = 0.0;
    loop {
        let total: f64 = u.sum();
        if m >= s.m_max || total <= 0.0 || (m >= s.min_bounces && total < s.threshold_w) {
            break;
        }
        escaped += leak.dot(&u);
        let next = vf.f.tr_mul(&u);
        down += &next;
        u = next.component_mul(refl);
        m += 1;
    }
    (down, m, u.sum(), escaped)
}

/// Direct, diffuse and reflected shortwave for every patch.
pub fn shortwave_step(
    patches: &[Patch],
    vf: &ViewFactorMatrix,
    sun: &SolarState,
    shaded: &[bool],
    s: &ReflectionSettings,
) -> Result<BandBudget> {
    let n = patches.len();
    if vf.len() != n || shaded.len() != n {
        return Err(Error::InvalidArgument(format!(
            "view-factor matrix ({}) or shading ({}) does not match {n} patches",
            vf.len(),
            shaded.len()
        )));
    }
    let direct: Vec<f64> = patches
        .iter()
        .zip(shaded)
        .map(|(p, &sh)| {
            if !sun.sun_up || sh {
                0.0
            } else {
                p.normal.dot(&sun.r_unit).max(0.0) * sun.i_direct.abs() * p.area
            }
        })
        .collect();
    let sky: Vec<f64> = patches.iter().enumerate().map(|(i, p)| vf.sky_vf[i] * sun.i_diffuse * p.area).collect();
    let arrival = DVector::from_iterator(n, direct.iter().zip(&sky).map(|(a, b)| a + b));
    let incident = arrival.sum();
    let albedo = DVector::from_iterator(n, patches.iter().map(|p| p.albedo));
    let (down, bounces, residual, escaped) = bounce_ledger(arrival, &albedo, vf, s);
    let up = down.component_mul(&albedo);
    Ok(BandBudget {
        direct,
        sky,
        down: down.as_slice().to_vec(),
        up: up.as_slice().to_vec(),
        bounces,
        residual,
        escaped,
        incident,
    })
}

/// Longwave arriving at each patch from the sky and from the lagged emission
/// and reflections of the other patches. Absorbed longwave is
/// `ε_i · down_i`; the patch's own emission `ε_i σ T_i⁴ A_i` is left to the
/// surface solver (see [`emission_coefficient`]).
pub fn longwave_incident(
    patches: &[Patch],
    vf: &ViewFactorMatrix,
    t_sky: f64,
    lagged: &[f64],
    s: &ReflectionSettings,
) -> Result<BandBudget> {
    let n = patches.len();
    if lagged.len() != n || vf.len() != n {
        return Err(Error::InvalidArgument(format!(
            "lagged temperatures ({}) or view factors ({}) do not match {n} patches",
            lagged.len(),
            vf.len()
        )));
    }
    let sky: Vec<f64> = patches.iter().enumerate().map(|(i, p)| vf.sky_vf[i] * SIGMA * t_sky.powi(4) * p.area).collect();
    let emission = DVector::from_iterator(n, patches.iter().zip(lagged).map(|(p, t)| emission_coefficient(p) * t.powi(4)));
    let arrival = DVector::from_vec(sky.clone()) + vf.f.tr_mul(&emission);
    let incident = arrival.sum();
    let rho = DVector::from_iterator(n, patches.iter().map(|p| p.lw_reflectivity));
    let (down, bounces, residual, escaped) = bounce_ledger(arrival, &rho, vf, s);
    let up = down.component_mul(&rho);
    Ok(BandBudget {
        direct: vec![0.0; n],
        sky,
        down: down.as_slice().to_vec(),
        up: up.as_slice().to_vec(),
        bounces,
        residual,
        escaped,
        incident,
    })
}

/// `ε_i σ A_i`, so that own emission is `coefficient · T_i⁴`.
pub fn emission_coefficient(p: &Patch) -> f64 {
    p.emissivity * SIGMA * p.area
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::scene;
    use crate::viewfactor::build_view_factor_matrix;

    fn with_props(mut ps: Vec<Patch>, albedo: f64, eps: f64) -> Vec<Patch> {
        for (i, p) in ps.iter_mut().enumerate() {
            p.id = i;
            p.albedo = albedo;
            p.emissivity = eps;
            p.lw_reflectivity = 1.0 - eps;
        }
        ps
    }

    #[test]
    fn lone_horizontal_patch() {
        let ps = with_props(scene::square(Vec3::zeros(), Vec3::x(), Vec3::y(), 1)[..1].to_vec(), 0.3, 1.0);
        let vf = build_view_factor_matrix(&ps).unwrap();
        let sun = SolarState::new(0.0, 0.0, 800.0, 100.0);
        let b = shortwave_step(&ps, &vf, &sun, &[false], &ReflectionSettings::default()).unwrap();
        assert!((b.net(0) - 0.7 * 900.0 * ps[0].area).abs() < 1e-9);
    }

    #[test]
    fn black_surfaces_stop_at_zero_bounces() {
        let mut ps = scene::square(Vec3::zeros(), Vec3::x(), Vec3::y(), 1);
        ps.extend(scene::square(Vec3::new(0.0, 0.0, 1.0), Vec3::y(), Vec3::x(), 1));
        let ps = with_props(ps, 0.0, 1.0);
        let vf = build_view_factor_matrix(&ps).unwrap();
        let sun = SolarState::new(0.0, 30.0, 800.0, 100.0);
        let b = shortwave_step(&ps, &vf, &sun, &[false; 4], &ReflectionSettings::default()).unwrap();
        assert_eq!(b.bounces, 0);
        assert_eq!(b.residual, 0.0);
    }

    #[test]
    fn gray_plates_conserve_energy_at_every_bounce_count() {
        let mut ps = scene::square(Vec3::zeros(), Vec3::x(), Vec3::y(), 2);
        ps.extend(scene::square(Vec3::new(0.0, 0.0, 0.5), Vec3::y(), Vec3::x(), 2));
        let ps = with_props(ps, 0.5, 0.9);
        let vf = build_view_factor_matrix(&ps).unwrap();
        let sun = SolarState::new(120.0, 20.0, 900.0, 120.0);
        let shaded = crate::shading::shade_all(&ps, &sun.r_unit, true);
        for m_max in 0..8 {
            let s = ReflectionSettings {
                threshold_w: 0.0,
                min_bounces: 0,
                m_max,
            };
            let b = shortwave_step(&ps, &vf, &sun, &shaded, &s).unwrap();
            let lhs = b.incident;
            let rhs = b.absorbed_total() + b.escaped + b.residual;
            assert!(((lhs - rhs) / lhs).abs() < 1e-9, "m_max {m_max}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn sky_only_longwave() {
        let ps = with_props(scene::square(Vec3::zeros(), Vec3::x(), Vec3::y(), 1)[..1].to_vec(), 0.0, 1.0);
        let vf = ViewFactorMatrix::sky_only(1);
        let b = longwave_incident(&ps, &vf, 290.0, &[300.0], &ReflectionSettings::default()).unwrap();
        assert!((b.down[0] - SIGMA * 290f64.powi(4) * ps[0].area).abs() < 1e-9);
    }

    #[test]
    fn isothermal_black_enclosure_has_no_net_exchange() {
        let ps = with_props(scene::unit_cube(true), 0.0, 1.0);
        let vf = build_view_factor_matrix(&ps).unwrap();
        let t = 300.0;
        let b = longwave_incident(&ps, &vf, t, &[t; 12], &ReflectionSettings::default()).unwrap();
        for (i, p) in ps.iter().enumerate() {
            let emit = emission_coefficient(p) * t.powi(4);
            let net = p.emissivity * b.down[i] - emit;
            assert!((net / emit).abs() < 1e-6, "patch {i}: {}", net / emit);
        }
    }

    #[test]
    fn large_parallel_plates_match_two_surface_network() {
        // 20 m plates 0.2 m apart approximate infinite parallel plates
        let size = 20.0;
        let mut ps = scene::square(Vec3::zeros(), Vec3::x() * size, Vec3::y() * size, 4);
        let n1 = ps.len();
        ps.extend(scene::square(Vec3::new(0.0, 0.0, 0.2), Vec3::y() * size, Vec3::x() * size, 4));
        let ps = with_props(ps, 0.0, 0.8);
        let vf = build_view_factor_matrix(&ps).unwrap();
        let (t1, t2) = (320.0, 290.0);
        let temps: Vec<f64> = (0..ps.len()).map(|i| if i < n1 { t1 } else { t2 }).collect();
        let s = ReflectionSettings {
            threshold_w: 1e-9,
            min_bounces: 1,
            m_max: 200,
        };
        // sky at 0 K so that only plate-to-plate exchange remains
        let b = longwave_incident(&ps, &vf, 0.0, &temps, &s).unwrap();
        let area: f64 = ps[..n1].iter().map(|p| p.area).sum();
        let net1: f64 = (0..n1).map(|i| ps[i].emissivity * b.down[i] - emission_coefficient(&ps[i]) * t1.powi(4)).sum::<f64>() / area;
        let net2: f64 = (n1..ps.len()).map(|i| ps[i].emissivity * b.down[i] - emission_coefficient(&ps[i]) * t2.powi(4)).sum::<f64>() / area;
        let q = SIGMA * (t1.powi(4) - t2.powi(4)) / (1.0 / 0.8 + 1.0 / 0.8 - 1.0);
        let exchange = 0.5 * (net2 - net1);
        assert!(((exchange - q) / q).abs() < 0.02, "{exchange} vs {q}");
    }

    #[test]
    fn rotation_leaves_net_shortwave_unchanged() {
        let mut ps = scene::boxed(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), 1, false, false, "");
        ps.extend(scene::square(Vec3::new(-2.0, -2.0, 0.0), Vec3::x() * 5.0, Vec3::y() * 5.0, 2));
        let ps = with_props(ps, 0.4, 0.9);
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let moved: Vec<Patch> = ps
            .iter()
            .map(|p| {
                let mut q = Patch::from_vertices(p.id, rot * p.vertices[0], rot * p.vertices[1], rot * p.vertices[2]).unwrap();
                q.albedo = p.albedo;
                q.emissivity = p.emissivity;
                q.lw_reflectivity = p.lw_reflectivity;
                q
            })
            .collect();
        let sun = SolarState::new(140.0, 35.0, 850.0, 110.0);
        let mut sun2 = sun;
        sun2.r_unit = rot * sun.r_unit;
        let s = ReflectionSettings::default();
        let a = {
            let vf = build_view_factor_matrix(&ps).unwrap();
            shortwave_step(&ps, &vf, &sun, &crate::shading::shade_all(&ps, &sun.r_unit, true), &s).unwrap()
        };
        let b = {
            let vf = build_view_factor_matrix(&moved).unwrap();
            shortwave_step(&moved, &vf, &sun2, &crate::shading::shade_all(&moved, &sun2.r_unit, true), &s).unwrap()
        };
        for i in 0..ps.len() {
            let (x, y) = (a.net(i), b.net(i));
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "patch {i}: {x} vs {y}");
        }
    }
}
