//! The coupled time-stepping loop.
//!
//! Each step samples the forcing at the end of the step, runs shading and the
//! two radiation ledgers with lagged surface temperatures, then solves every
//! patch independently (in parallel) and advances its substrate.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::conduction::{
    compute_ctf, deep_soil_temperature, BottomBc, ConductionMethod, CtfHistory, CtfSet, DeepSoilParams, FdmColumn,
    InnerBoundary, ObjectMeanTracker, SubstrateCoupling,
};
use crate::config::{IgnitionMetric, ScenarioConfig, SoilTemperature};
use crate::convection::{convection_coefficient, is_windward, ConvectionInputs, ConvectionMethod};
use crate::error::{Error, Result};
use crate::materials::{assign_materials, AssembledDomain, MaterialKind};
use crate::moisture::{moisture_step, FuelLayerState, FuelParams, SoilBoundary, SurfaceForcing, TopBoundary};
use crate::radiation::{emission_coefficient, longwave_incident, shortwave_step};
use crate::shading::shade_all;
use crate::solar::SolarState;
use crate::viewfactor::{build_view_factor_matrix, ViewFactorMatrix};
use crate::weather::{wind_at_height, WeatherSample};

use super::forcing::Forcing;
use super::heat::apply_external_heat;
use super::solve::solve_patch_energy_balance;

/// Patches lower than this take their wind at this height, m.
pub const MIN_WIND_HEIGHT: f64 = 1.0;
/// Damping depth for deep-soil forcing under fuel beds when none is given, m.
pub const FUEL_SOIL_DAMPING_DEPTH: f64 = 1.0;

/// Heat storage behind one patch.
#[derive(Debug, Clone)]
pub enum Substrate {
    Fdm(FdmColumn),
    Ctf { set: Arc<CtfSet>, hist: CtfHistory },
    Fuel(FuelLayerState),
}

/// Per-material settings resolved once.
#[derive(Debug, Clone)]
struct MaterialRuntime {
    convection: ConvectionMethod,
    inner: InnerBoundary,
    depth: f64,
    deep: Option<DeepSoilParams>,
    fuel: Option<Arc<FuelParams>>,
    t0: f64,
}

/// Outputs of one patch for one step. Heat terms are in W with the signs
/// of the surface balance: `R_sw + R_lw - Q_H - Q_G + Q_F = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PatchRecord {
    pub t_surf: f64,
    pub m_f_top: f64,
    pub m_f_mean: f64,
    pub shaded: bool,
    pub sw_net: f64,
    pub lw_net: f64,
    pub q_h: f64,
    pub q_g: f64,
    pub q_e: f64,
    pub q_f: f64,
    /// Value compared against the ignition threshold, K.
    pub metric: f64,
    /// Surface balance left over after the solve, W.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Seconds from the run start, end of the step.
    pub time: f64,
    pub sun_up: bool,
    pub patches: Vec<PatchRecord>,
}

pub struct Simulation {
    pub cfg: ScenarioConfig,
    pub domain: AssembledDomain,
    pub vf: Arc<ViewFactorMatrix>,
    pub forcing: Forcing,
    pub substrates: Vec<Substrate>,
    pub t_surf: Vec<f64>,
    pub time: f64,
    pub dt: f64,
    mats: Vec<MaterialRuntime>,
    trackers: BTreeMap<usize, ObjectMeanTracker>,
}

fn first_day_mean_air(f: &Forcing, total: f64) -> Result<f64> {
    let span = total.min(86400.0);
    let n = (span / 3600.0).ceil().max(1.0) as usize;
    let mut s = 0.0;
    for k in 0..n {
        s += f.sample(k as f64 * span / n as f64)?.t_air;
    }
    Ok(s / n as f64)
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        Self::with_view_factors(cfg, None)
    }

    /// Builds the run; `vf` reuses a matrix computed for the same geometry.
    pub fn with_view_factors(cfg: &ScenarioConfig, vf: Option<Arc<ViewFactorMatrix>>) -> Result<Self> {
        cfg.validate()?;
        let forcing = Forcing::from_config(cfg)?;
        let patches = cfg.mesh.source.load()?;
        let domain = assign_materials(patches, cfg.materials.clone(), &cfg.bindings, cfg.mesh.ground_datum)?;
        let n = domain.len();
        if let Some(id) = forcing.patch_air.as_ref().and_then(|p| p.max_patch_id()).filter(|&id| id >= n) {
            return Err(Error::Config(format!("patch forcing names patch {id} but the mesh has {n}")));
        }
        let vf = match vf {
            Some(v) if v.len() == n => v,
            Some(v) => {
                return Err(Error::InvalidArgument(format!("view factors for {} patches, mesh has {n}", v.len())));
            }
            None if cfg.radiation.view_factors => Arc::new(build_view_factor_matrix(&domain.patches)?),
            None => Arc::new(ViewFactorMatrix::sky_only(n)),
        };
        let dt = cfg.time.dt_s;
        let air0 = forcing.sample(0.0)?.t_air;
        let cd = &cfg.conduction;
        let needs_deep = |m: &crate::materials::MaterialStack, inner: InnerBoundary| match m.kind {
            MaterialKind::Fuel => cfg.moisture.soil_temperature == SoilTemperature::DeepSoil,
            MaterialKind::Inert => inner == InnerBoundary::DeepSoil,
        };
        let mut soil_mean = None;
        let mut mats = Vec::with_capacity(domain.materials.len());
        let mut ctf_sets: Vec<Option<Arc<CtfSet>>> = Vec::with_capacity(domain.materials.len());
        for m in &domain.materials {
            let inner = cd.inner.get(&m.name).copied().unwrap_or_default();
            let method = cd.per_material.get(&m.name).copied().unwrap_or(cd.method);
            let t0 = cd.initial_c.get(&m.name).map(|c| c + crate::KELVIN).unwrap_or(air0);
            let deep = if needs_deep(m, inner) {
                let t_avg = match (cd.deep_soil.t_avg_c, soil_mean) {
                    (Some(c), _) => c + crate::KELVIN,
                    (None, Some(v)) => v,
                    (None, None) => {
                        let v = first_day_mean_air(&forcing, cfg.time.total_seconds())?;
                        soil_mean = Some(v);
                        v
                    }
                };
                let amp = cd.deep_soil.amplitude_k.unwrap_or(0.0);
                let period = cd.deep_soil.period_s;
                Some(match (cd.deep_soil.damping_depth_m, m.layers.last()) {
                    (Some(d), _) => DeepSoilParams {
                        t_avg,
                        amplitude: amp,
                        period,
                        damping_depth: d,
                    },
                    (None, Some(l)) if m.kind == MaterialKind::Inert => {
                        DeepSoilParams::from_soil(t_avg, amp, period, l.conductivity, l.density, l.specific_heat)?
                    }
                    _ => DeepSoilParams {
                        t_avg,
                        amplitude: amp,
                        period,
                        damping_depth: FUEL_SOIL_DAMPING_DEPTH,
                    },
                })
            } else {
                None
            };
            if let Some(d) = &deep {
                if m.kind == MaterialKind::Inert && m.total_thickness() > d.max_depth() {
                    return Err(Error::Config(format!(
                        "material '{}' is {:.3} m thick, deeper than three damping depths ({:.3} m)",
                        m.name,
                        m.total_thickness(),
                        d.max_depth()
                    )));
                }
            }
            let ctf = if m.kind == MaterialKind::Inert && method == ConductionMethod::Ctf {
                if inner == InnerBoundary::Adiabatic {
                    return Err(Error::Config(format!(
                        "material '{}': transfer functions need an inner temperature, not an adiabatic back",
                        m.name
                    )));
                }
                Some(Arc::new(compute_ctf(&m.layers, dt)?))
            } else {
                None
            };
            ctf_sets.push(ctf);
            let fuel = match m.kind {
                MaterialKind::Fuel => Some(Arc::new(m.fuel_params.clone().ok_or_else(|| Error::InvalidMaterial {
                    name: m.name.clone(),
                    msg: "fuel material without fuel parameters".into(),
                })?)),
                MaterialKind::Inert => None,
            };
            mats.push(MaterialRuntime {
                convection: cfg.convection.per_material.get(&m.name).copied().unwrap_or(cfg.convection.method),
                inner,
                depth: m.total_thickness(),
                deep,
                fuel,
                t0,
            });
        }
        let p0 = forcing.sample(0.0)?.pressure;
        let mut substrates = Vec::with_capacity(n);
        let mut t_surf = Vec::with_capacity(n);
        for p in &domain.patches {
            let mi = p.material.ok_or(Error::UnboundPatch(p.id))?;
            let rt = &mats[mi];
            let s = match (&rt.fuel, &ctf_sets[mi]) {
                (Some(fp), _) => {
                    Substrate::Fuel(FuelLayerState::at_equilibrium(fp, rt.t0, cfg.moisture.initial_moisture, p0))
                }
                (None, Some(set)) => Substrate::Ctf {
                    set: set.clone(),
                    hist: CtfHistory::isothermal(set, rt.t0),
                },
                (None, None) => Substrate::Fdm(FdmColumn::from_layers(&domain.materials[mi].layers, cd.max_dz, rt.t0)?),
            };
            substrates.push(s);
            t_surf.push(rt.t0);
        }
        let trackers = mats
            .iter()
            .enumerate()
            .filter(|(_, m)| m.inner == InnerBoundary::ObjectMean)
            .map(|(i, _)| (i, ObjectMeanTracker::new(cd.object_mean_window_s)))
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            domain,
            vf,
            forcing,
            substrates,
            t_surf,
            time: 0.0,
            dt,
            mats,
            trackers,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.cfg.time.steps()
    }

    fn inner_temperature(&self, mi: usize, t: f64, object_mean: &BTreeMap<usize, f64>) -> Result<Option<f64>> {
        let rt = &self.mats[mi];
        Ok(match rt.inner {
            InnerBoundary::Adiabatic => None,
            InnerBoundary::Prescribed { t_in } => Some(t_in),
            InnerBoundary::DeepSoil => {
                let d = rt.deep.as_ref().expect("deep-soil parameters resolved at setup");
                Some(deep_soil_temperature(rt.depth, t + self.cfg.conduction.deep_soil.phase_s, d)?)
            }
            InnerBoundary::ObjectMean => Some(object_mean.get(&mi).copied().unwrap_or(rt.t0)),
        })
    }

    /// Advances one step and returns what happened in it.
    pub fn step(&mut self) -> Result<StepRecord> {
        let t1 = self.time + self.dt;
        let wx = self.forcing.sample(t1)?;
        let sun = SolarState::at(&self.cfg.location, self.forcing.when(t1), wx.i_direct, wx.i_diffuse)?;
        self.step_with(wx, sun)
    }

    /// Advances one step under the given end-of-step weather and sun.
    pub fn step_with(&mut self, wx: WeatherSample, sun: SolarState) -> Result<StepRecord> {
        let dt = self.dt;
        let t0 = self.time;
        let t1 = t0 + dt;
        let n = self.domain.len();
        let patches = &self.domain.patches;
        let shaded = if self.cfg.radiation.shading {
            shade_all(patches, &sun.r_unit, sun.sun_up)
        } else {
            vec![false; n]
        };
        let settings = &self.cfg.radiation.reflection;
        let sw = shortwave_step(patches, &self.vf, &sun, &shaded, settings)?;
        let lw = longwave_incident(patches, &self.vf, wx.t_sky, &self.t_surf, settings)?;

        let object_mean: BTreeMap<usize, f64> =
            self.trackers.iter().filter_map(|(&k, tr)| tr.value().map(|v| (k, v))).collect();
        let nm = self.mats.len();
        let mut inner_old = Vec::with_capacity(nm);
        let mut inner_new = Vec::with_capacity(nm);
        for mi in 0..nm {
            inner_old.push(self.inner_temperature(mi, t0, &object_mean)?);
            inner_new.push(self.inner_temperature(mi, t1, &object_mean)?);
        }
        let heading = wx.wind_heading();
        let cfg = &self.cfg;
        let mats = &self.mats;
        let forcing = &self.forcing;
        let t_prev = &self.t_surf;

        let results: Vec<Result<PatchRecord>> = self
            .substrates
            .par_iter_mut()
            .enumerate()
            .map(|(i, sub)| {
                let p = &patches[i];
                let mi = p.material.expect("bound at setup");
                let rt = &mats[mi];
                let local = forcing.patch_air(i, t1);
                let t_air = local.map(|a| a.t_air).unwrap_or(wx.t_air);
                let conv_base = {
                    let mut c = ConvectionInputs::for_surface(
                        rt.convection,
                        &p.normal,
                        p.area,
                        p.perimeter,
                        cfg.convection.roughness_index,
                    );
                    c.windward = is_windward(&p.normal, heading);
                    c.v_z = match local {
                        Some(a) => a.v_z,
                        None => wind_at_height(
                            wx.wind_speed_ref,
                            cfg.convection.reference_height,
                            p.height.max(MIN_WIND_HEIGHT),
                            cfg.convection.z0,
                        )?,
                    };
                    convection_coefficient(&c)?;
                    c
                };
                let h_at = |t: f64| {
                    let mut c = conv_base;
                    c.delta_t = t - t_air;
                    convection_coefficient(&c).unwrap_or(f64::NAN)
                };
                let sw_abs = sw.net(i);
                let lw_in = p.emissivity * lw.down[i];
                let e = emission_coefficient(p);
                let q_f = apply_external_heat(&cfg.heat_sources, p, t1);
                let a = p.area;
                let mut rec = PatchRecord {
                    shaded: shaded[i],
                    sw_net: sw_abs,
                    q_f,
                    ..Default::default()
                };
                match sub {
                    Substrate::Fuel(state) => {
                        let fp = rt.fuel.as_deref().expect("fuel parameters resolved at setup");
                        let wind = match local {
                            Some(l) => l.v_z,
                            None => wind_at_height(
                                wx.wind_speed_ref,
                                cfg.convection.reference_height,
                                fp.screen_height,
                                cfg.convection.z0,
                            )?,
                        };
                        let sf = SurfaceForcing {
                            shortwave: sw_abs / a,
                            wind,
                            t_air,
                            rh: wx.relative_humidity,
                            pressure: wx.pressure,
                            precip: wx.precipitation_rate * 3600.0,
                        };
                        let t_soil = match cfg.moisture.soil_temperature {
                            SoilTemperature::Air => t_air,
                            SoilTemperature::DeepSoil => {
                                let d = rt.deep.as_ref().expect("deep-soil parameters resolved at setup");
                                deep_soil_temperature(0.0, t1 + cfg.conduction.deep_soil.phase_s, d)?
                            }
                        };
                        let soil = SoilBoundary {
                            t_soil,
                            q_soil: cfg.moisture.soil_humidity,
                        };
                        let balance = |t: f64| (lw_in - e * t.powi(4) - h_at(t) * (t - t_air) * a + q_f) / a;
                        let report = moisture_step(state, fp, &sf, &soil, &TopBoundary::Balance(&balance), dt)?;
                        let t = state.t_skin;
                        rec.t_surf = t;
                        rec.lw_net = lw_in - e * t.powi(4);
                        rec.q_h = h_at(t) * (t - t_air) * a + report.h_top * a;
                        rec.q_g = report.g_top * a;
                        rec.q_e = fp.latent_heat * report.e_top * a;
                        rec.m_f_top = state.layers[0].m_f;
                        rec.m_f_mean = state.mean_moisture();
                        rec.metric = state.mean_fuel_temperature();
                        // shortwave is deposited inside the bed, not at the skin
                        rec.residual = balance(t) * a - rec.q_g;
                    }
                    Substrate::Fdm(col) => {
                        let bottom = match (inner_old[mi], inner_new[mi]) {
                            (Some(old), Some(new)) => BottomBc::Dirichlet { old, new },
                            _ => BottomBc::Adiabatic,
                        };
                        let resp = col.surface_response(bottom, dt);
                        let g = col.coupling(&resp);
                        let f = balance_fn(sw_abs, lw_in, e, a, q_f, t_air, &h_at, g);
                        let t = solve_patch_energy_balance(&f, t_prev[i], t_air)?;
                        col.commit(&resp, g.flux(t), bottom);
                        rec.t_surf = t;
                        rec.lw_net = lw_in - e * t.powi(4);
                        rec.q_h = h_at(t) * (t - t_air) * a;
                        rec.q_g = g.flux(t) * a;
                        rec.metric = col.mean_temperature();
                        rec.residual = f(t);
                    }
                    Substrate::Ctf { set, hist } => {
                        let t_in = inner_new[mi].expect("checked at setup");
                        let g = SubstrateCoupling {
                            slope: set.x[0],
                            offset: hist.offset(set, t_in),
                        };
                        let f = balance_fn(sw_abs, lw_in, e, a, q_f, t_air, &h_at, g);
                        let t = solve_patch_energy_balance(&f, t_prev[i], t_air)?;
                        hist.push(t, t_in, g.flux(t));
                        rec.t_surf = t;
                        rec.lw_net = lw_in - e * t.powi(4);
                        rec.q_h = h_at(t) * (t - t_air) * a;
                        rec.q_g = g.flux(t) * a;
                        rec.metric = t;
                        rec.residual = f(t);
                    }
                }
                if cfg.ignition.metric == IgnitionMetric::SurfaceTemperature {
                    rec.metric = rec.t_surf;
                }
                if !(rec.t_surf.is_finite() && rec.t_surf > 0.0) {
                    return Err(Error::Numerical(format!("surface temperature {}", rec.t_surf)));
                }
                Ok(rec)
            })
            .collect();

        let mut records = Vec::with_capacity(n);
        for (i, r) in results.into_iter().enumerate() {
            records.push(r.map_err(|e| Error::Solver {
                patch: i,
                time: t1,
                msg: e.to_string(),
            })?);
        }
        for (i, r) in records.iter().enumerate() {
            self.t_surf[i] = r.t_surf;
        }
        for (&mi, tr) in self.trackers.iter_mut() {
            let surf = patches
                .iter()
                .zip(&records)
                .filter(|(p, _)| p.material == Some(mi))
                .map(|(p, r)| (r.t_surf, p.area));
            tr.push(t1, surf);
        }
        self.time = t1;
        Ok(StepRecord {
            time: t1,
            sun_up: sun.sun_up,
            patches: records,
        })
    }
}

/// Surface balance of an inert patch as a function of its temperature, W.
#[allow(clippy::too_many_arguments)]
fn balance_fn<'a>(
    sw_abs: f64,
    lw_in: f64,
    e: f64,
    a: f64,
    q_f: f64,
    t_air: f64,
    h_at: &'a (impl Fn(f64) -> f64 + 'a),
    g: SubstrateCoupling,
) -> impl Fn(f64) -> f64 + 'a {
    move |t: f64| sw_abs + lw_in - e * t.powi(4) - h_at(t) * (t - t_air) * a - g.flux(t) * a + q_f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::tests::MINIMAL;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_json(text).unwrap()
    }

    fn run(c: &ScenarioConfig) -> Vec<StepRecord> {
        let mut s = Simulation::new(c).unwrap();
        (0..s.total_steps()).map(|_| s.step().unwrap()).collect()
    }

    fn sunny() -> ScenarioConfig {
        let text = MINIMAL.replace(
            r#"{"kind": "constant", "tair_c": 20}"#,
            r#"{"kind": "synthetic", "tair_mean_c": 20, "tair_amp_c": 5, "rh_mean_pct": 50, "rh_amp_pct": 10,
                "wind_ms": 3, "wind_dir_deg": null, "peak_hour": 15, "clearness": 1}"#,
        );
        cfg(&text)
    }

    #[test]
    fn diurnal_energy_audit_closes() {
        let c = sunny();
        let mut s = Simulation::new(&c).unwrap();
        let area: f64 = s.domain.total_area();
        let h0: f64 = s.substrates.iter().map(|x| match x {
            Substrate::Fdm(col) => col.heat_content(),
            _ => unreachable!(),
        }).sum::<f64>() * area / 2.0;
        let mut integral = 0.0;
        let mut prev = 0.0;
        let mut max_res: f64 = 0.0;
        for _ in 0..s.total_steps() {
            let r = s.step().unwrap();
            let net: f64 = r.patches.iter().map(|p| p.sw_net + p.lw_net - p.q_h + p.q_f).sum();
            integral += 0.5 * (prev + net) * s.dt;
            prev = net;
            for p in &r.patches {
                max_res = max_res.max(p.residual.abs());
            }
        }
        let h1: f64 = s.substrates.iter().map(|x| match x {
            Substrate::Fdm(col) => col.heat_content(),
            _ => unreachable!(),
        }).sum::<f64>() * area / 2.0;
        let change = h1 - h0;
        let scale: f64 = integral.abs().max(change.abs());
        assert!(scale > 1e5, "{scale}");
        // column starts with zero surface flux, so the first half step is exact
        assert!((integral - change).abs() < 0.01 * scale, "{integral} vs {change}");
        assert!(max_res < 0.05, "{max_res}");
    }

    #[test]
    fn identical_isolated_patches_are_bitwise_equal() {
        let c = sunny();
        for r in run(&c) {
            assert_eq!(r.patches[0].t_surf.to_bits(), r.patches[1].t_surf.to_bits());
        }
    }

    #[test]
    fn night_has_no_direct_gain() {
        let c = sunny();
        let mut s = Simulation::new(&c).unwrap();
        let r = s.step().unwrap();
        assert!(!r.sun_up);
        assert!(r.patches.iter().all(|p| p.sw_net == 0.0));
    }

    #[test]
    fn time_step_refinement_converges() {
        let mut diffs = Vec::new();
        let traces: Vec<Vec<f64>> = [60.0, 30.0, 15.0, 7.5]
            .iter()
            .map(|&dt| {
                let mut c = sunny();
                c.time.report_days = 0.25;
                c.time.start = "2021-08-12T08:00:00".parse().unwrap();
                c.time.dt_s = dt;
                let every = (60.0 / dt) as usize;
                run(&c).iter().skip(every - 1).step_by(every).map(|r| r.patches[0].t_surf).collect()
            })
            .collect();
        for w in traces.windows(2) {
            let d = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            diffs.push(d);
        }
        assert!(diffs[0] > diffs[1] && diffs[1] > diffs[2], "{diffs:?}");
    }

    #[test]
    fn ctf_with_adiabatic_back_is_rejected() {
        let mut c = cfg(MINIMAL);
        c.conduction.method = ConductionMethod::Ctf;
        let err = Simulation::new(&c).err().unwrap().to_string();
        assert!(err.contains("adiabatic"), "{err}");
    }

    fn write_obj(path: &std::path::Path, patches: &[crate::Patch], mirror: bool) {
        let mut text = String::new();
        for p in patches {
            let mut v = p.vertices;
            if mirror {
                v.iter_mut().for_each(|x| x.y = -x.y);
                v.swap(1, 2);
            }
            for x in v {
                text += &format!("v {} {} {}\n", x.x, x.y, x.z);
            }
        }
        for k in 0..patches.len() {
            text += &format!("f {} {} {}\n", 3 * k + 1, 3 * k + 2, 3 * k + 3);
        }
        std::fs::write(path, text).unwrap();
    }

    #[test]
    fn east_west_mirror_symmetry() {
        let dir = tempfile::tempdir().unwrap();
        let scene = crate::scene::cube_array(2, 1.0, 1.0, 2, 1.0);
        let (a, b) = (dir.path().join("a.obj"), dir.path().join("b.obj"));
        write_obj(&a, &scene, false);
        write_obj(&b, &scene, true);
        let base = MINIMAL.replace(
            r#"{"kind": "constant", "tair_c": 20}"#,
            r#"{"kind": "constant", "tair_c": 20, "dni_wm2": 800, "dhi_wm2": 100, "wind_ms": 2}"#,
        );
        let mk = |path: &std::path::Path| {
            let mut c = cfg(&base);
            c.mesh.source = crate::config::MeshSource::File {
                path: path.to_path_buf(),
                format: crate::MeshFormat::Obj,
            };
            Simulation::new(&c).unwrap()
        };
        let (mut sa, mut sb) = (mk(&a), mk(&b));
        let n = sa.domain.len();
        let map: Vec<usize> = (0..n)
            .map(|i| {
                let c = sa.domain.patches[i].centroid;
                (0..n)
                    .find(|&j| {
                        let d = sb.domain.patches[j].centroid;
                        (c.x - d.x).abs() < 1e-9 && (c.y + d.y).abs() < 1e-9 && (c.z - d.z).abs() < 1e-9
                    })
                    .unwrap()
            })
            .collect();
        let mut shaded = 0;
        for k in 0..30 {
            let az = 90.0 + 6.0 * k as f64;
            let zen = 30.0 + k as f64;
            let wx = sa.forcing.sample(0.0).unwrap();
            let ra = sa.step_with(wx, SolarState::new(az, zen, 800.0, 100.0)).unwrap();
            let rb = sb.step_with(wx, SolarState::new(360.0 - az, zen, 800.0, 100.0)).unwrap();
            for (i, &j) in map.iter().enumerate() {
                let (pa, pb) = (&ra.patches[i], &rb.patches[j]);
                assert_eq!(pa.shaded, pb.shaded);
                assert!((pa.t_surf - pb.t_surf).abs() < 1e-6, "patch {i}: {} vs {}", pa.t_surf, pb.t_surf);
                shaded += pa.shaded as usize;
            }
        }
        assert!(shaded > 0);
    }
}
