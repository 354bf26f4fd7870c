//! One-at-a-time ±20% sensitivity of surface temperature and fuel moisture.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::viewfactor::ViewFactorMatrix;
use crate::KELVIN;

use super::sim::Simulation;

pub const PERTURBATION: f64 = 0.2;

/// Parameters understood by [`perturb`], in report order.
pub const PARAMETERS: [&str; 16] = [
    "wind_speed",
    "direct_normal_irradiance",
    "conductivity",
    "air_temperature",
    "relative_humidity",
    "albedo",
    "specific_heat",
    "density",
    "latitude",
    "deep_soil_temperature",
    "nelson_a",
    "nelson_b",
    "surface_conductance",
    "surface_to_volume",
    "soil_humidity",
    "bulk_density",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub parameter: String,
    /// K
    pub rms_t_k: Option<f64>,
    /// kg kg⁻¹
    pub rms_mf: Option<f64>,
    pub note: Option<String>,
}

/// Copy of `cfg` with one parameter multiplied by `factor`. Temperatures
/// are scaled in °C. Parameters that the scenario does not use are left
/// alone, which makes them report zero.
pub fn perturb(cfg: &ScenarioConfig, name: &str, factor: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    let fuels = |c: &mut ScenarioConfig, f: &dyn Fn(&mut crate::moisture::FuelParams)| {
        c.materials.iter_mut().filter_map(|m| m.fuel_params.as_mut()).for_each(f);
    };
    let layers = |c: &mut ScenarioConfig, f: &dyn Fn(&mut crate::materials::Layer)| {
        c.materials.iter_mut().flat_map(|m| m.layers.iter_mut()).for_each(f);
    };
    match name {
        "wind_speed" => c.forcing_scale.wind *= factor,
        "direct_normal_irradiance" => c.forcing_scale.dni *= factor,
        "air_temperature" => c.forcing_scale.tair_c *= factor,
        "relative_humidity" => c.forcing_scale.rh *= factor,
        "latitude" => c.location.latitude *= factor,
        "conductivity" => {
            layers(&mut c, &|l| l.conductivity *= factor);
            fuels(&mut c, &|p| {
                p.kc_slope *= factor;
                p.kc_intercept *= factor;
            });
        }
        "albedo" => {
            c.materials.iter_mut().for_each(|m| m.surface_albedo *= factor);
            fuels(&mut c, &|p| p.albedo *= factor);
        }
        "specific_heat" => {
            layers(&mut c, &|l| l.specific_heat *= factor);
            fuels(&mut c, &|p| p.fuel_specific_heat *= factor);
        }
        "density" => {
            layers(&mut c, &|l| l.density *= factor);
            fuels(&mut c, &|p| p.solid_density *= factor);
        }
        "deep_soil_temperature" => {
            if let Some(t) = c.conduction.deep_soil.t_avg_c.as_mut() {
                *t *= factor;
            }
        }
        "nelson_a" => fuels(&mut c, &|p| p.nelson_a *= factor),
        "nelson_b" => fuels(&mut c, &|p| p.nelson_b *= factor),
        "surface_conductance" => fuels(&mut c, &|p| p.surface_conductance *= factor),
        "surface_to_volume" => fuels(&mut c, &|p| p.surface_to_volume *= factor),
        "bulk_density" => fuels(&mut c, &|p| p.bulk_density *= factor),
        "soil_humidity" => {
            if let Some(q) = c.moisture.soil_humidity.as_mut() {
                *q *= factor;
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown sensitivity parameter '{other}'; known: {}",
                PARAMETERS.join(", ")
            )))
        }
    }
    Ok(c)
}

/// Surface temperature and column-mean moisture of every patch at every
/// reporting output time, flattened.
pub fn reporting_outputs(cfg: &ScenarioConfig, vf: Option<Arc<ViewFactorMatrix>>) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut sim = Simulation::with_view_factors(cfg, vf)?;
    let spinup = cfg.time.spinup_seconds();
    let cadence = cfg.outputs.cadence_s.unwrap_or(cfg.time.dt_s);
    let (mut t, mut m) = (Vec::new(), Vec::new());
    for _ in 0..sim.total_steps() {
        let r = sim.step()?;
        let since = r.time - spinup;
        let k = since / cadence;
        if since > 1e-9 && (k - k.round()).abs() < 1e-6 {
            for p in &r.patches {
                t.push(p.t_surf);
                m.push(p.m_f_mean);
            }
        }
    }
    Ok((t, m))
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len().max(1) as f64).sqrt()
}

/// Runs the base case plus `+20%` and `-20%` for each parameter and reports
/// the mean of the two RMS deviations. A failing perturbed run is noted on
/// its row and does not stop the scan.
pub fn sensitivity_scan(cfg: &ScenarioConfig, params: &[String]) -> Result<Vec<SensitivityRow>> {
    for p in params {
        if !PARAMETERS.contains(&p.as_str()) {
            return Err(Error::InvalidArgument(format!("unknown sensitivity parameter '{p}'")));
        }
    }
    let base_sim = Simulation::new(cfg)?;
    let vf = Arc::clone(&base_sim.vf);
    drop(base_sim);
    let (bt, bm) = reporting_outputs(cfg, Some(Arc::clone(&vf)))?;
    let jobs: Vec<(usize, f64)> = (0..params.len())
        .flat_map(|i| [(i, 1.0 + PERTURBATION), (i, 1.0 - PERTURBATION)])
        .collect();
    let runs: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(i, f)| {
            let c = perturb(cfg, &params[i], f)?;
            let (t, m) = reporting_outputs(&c, Some(Arc::clone(&vf)))?;
            Ok((rms(&t, &bt), rms(&m, &bm)))
        })
        .collect();
    let mut rows = Vec::with_capacity(params.len());
    for (i, name) in params.iter().enumerate() {
        let (up, down) = (&runs[2 * i], &runs[2 * i + 1]);
        rows.push(match (up, down) {
            (Ok(a), Ok(b)) => SensitivityRow {
                parameter: name.clone(),
                rms_t_k: Some(0.5 * (a.0 + b.0)),
                rms_mf: Some(0.5 * (a.1 + b.1)),
                note: None,
            },
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("sensitivity run for {name} failed: {e}");
                SensitivityRow {
                    parameter: name.clone(),
                    rms_t_k: None,
                    rms_mf: None,
                    note: Some(e.to_string()),
                }
            }
        });
    }
    Ok(rows)
}

pub fn write_sensitivity_csv(rows: &[SensitivityRow], path: &Path) -> Result<()> {
    let mut text = String::from("parameter,rms_T_K,rms_mf,note\n");
    let fmt = |v: Option<f64>, p: usize| v.map(|x| format!("{x:.prec$}", prec = p)).unwrap_or_default();
    for r in rows {
        let note = r.note.as_deref().unwrap_or("").replace([',', '\n'], ";");
        text += &format!("{},{},{},{}\n", r.parameter, fmt(r.rms_t_k, 5), fmt(r.rms_mf, 6), note);
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `air_temperature` scaling acts in °C; this is the Kelvin value it maps to.
pub fn scaled_celsius(t_k: f64, factor: f64) -> f64 {
    (t_k - KELVIN) * factor + KELVIN
}
