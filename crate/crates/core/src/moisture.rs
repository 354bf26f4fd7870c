//! Layered fuel-bed model: solid fuel, liquid surface water and internal air
//! in each layer, with coupled energy and water budgets.
//!
//! Each layer carries six state variables. The column is advanced with
//! implicit Euler in enthalpy form so that the stored water and energy change
//! by exactly the boundary fluxes over a step. Water flows carry the enthalpy
//! of the medium they leave, vapour carries `λ + c_w T` on top of that.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::KELVIN;

/// Universal gas constant, J mol⁻¹ K⁻¹.
const R_GAS: f64 = 8.314462618;
/// Molar mass of water, kg mol⁻¹.
const M_WATER: f64 = 0.01801528;
/// J kg⁻¹ per cal g⁻¹.
const CAL_PER_G: f64 = 4184.0;
/// Default saturation moisture content, kg kg⁻¹.
pub const M_SAT_DEFAULT: f64 = 1.4;
/// Water a layer must hold (kg m⁻³ per kg m⁻³ of bulk fuel) to count as half wet.
const HALF_WET: f64 = 0.01;
/// Phantom liquid (kg m⁻³) that keeps the water temperature defined when dry.
const WET_EPS: f64 = 1e-3;
/// Water rows are scaled by this before the linear solve, J kg⁻¹.
const WATER_ROW_SCALE: f64 = 2.45e6;

const MAX_NEWTON: usize = 50;
const NEWTON_TOL: f64 = 1e-9;
/// Smallest substep before a step is abandoned, s.
pub const DT_MIN: f64 = 1e-3;

/// kg m⁻³
const RHO_WATER: f64 = 1000.0;
/// s⁻¹
const OVERFLOW_RATE: f64 = 0.05;

const RH_MIN: f64 = 1e-6;
const RH_MAX: f64 = 1.0 - 1e-6;

/// Fuel-bed parameters. Field defaults reproduce the standard litter bed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuelParams {
    pub n_layers: usize,
    /// Total bed depth, m, split into `n_layers` equal layers.
    pub layer_depth: f64,
    /// kg m⁻³
    pub bulk_density: f64,
    /// kg m⁻³
    pub solid_density: f64,
    /// Fuel surface area to volume ratio, m⁻¹.
    pub surface_to_volume: f64,
    pub characteristic_length: f64,
    pub nelson_a: f64,
    pub nelson_b: f64,
    /// Solid fuel surface conductance, m s⁻¹.
    pub surface_conductance: f64,
    /// kg kg⁻¹
    pub saturation_moisture: f64,
    pub absorption_la: f64,
    pub absorption_lb: f64,
    pub albedo: f64,
    /// Shortwave extinction through the bed.
    pub attenuation: f64,
    /// W m⁻¹ K⁻¹ per kg kg⁻¹
    pub kc_slope: f64,
    /// W m⁻¹ K⁻¹
    pub kc_intercept: f64,
    /// Solid fuel to water heat conductivity, W m⁻² K⁻¹.
    pub k_fuel_water: f64,
    /// Rainfall storage capacity, kg kg⁻¹.
    pub storage_capacity: f64,
    /// s⁻¹
    pub drainage_coefficient: f64,
    /// m² s⁻¹
    pub dt0_a: f64,
    /// s m⁻¹
    pub dt0_b: f64,
    pub chi_a: f64,
    pub chi_b: f64,
    pub soil_albedo: f64,
    pub soil_capacity: f64,
    /// m
    pub roughness_length: f64,
    /// m
    pub screen_height: f64,
    /// Molecular thermal diffusivity of air, m² s⁻¹.
    pub air_diffusivity: f64,
    /// Molecular diffusivity of vapour in air, m² s⁻¹.
    pub vapor_diffusivity: f64,
    /// J kg⁻¹
    pub latent_heat: f64,
    /// J kg⁻¹ K⁻¹
    pub air_specific_heat: f64,
    pub von_karman: f64,
    /// kg m⁻³
    pub air_density: f64,
    /// Dry fuel, J kg⁻¹ K⁻¹.
    pub fuel_specific_heat: f64,
    /// J kg⁻¹ K⁻¹
    pub water_specific_heat: f64,
}

impl Default for FuelParams {
    fn default() -> Self {
        Self {
            n_layers: 5,
            layer_depth: 0.02,
            bulk_density: 62.0,
            solid_density: 550.0,
            surface_to_volume: 3000.0,
            characteristic_length: 3000.0,
            nelson_a: 5.2,
            nelson_b: -19.0,
            surface_conductance: 0.0006,
            saturation_moisture: M_SAT_DEFAULT,
            absorption_la: 0.23,
            absorption_lb: -1.63,
            albedo: 0.27,
            attenuation: 1.363,
            kc_slope: 0.2,
            kc_intercept: 0.14,
            k_fuel_water: 700.0,
            storage_capacity: 1.153,
            drainage_coefficient: 0.00003,
            dt0_a: 0.00002,
            dt0_b: 2.6,
            chi_a: 2.08,
            chi_b: 2.38,
            soil_albedo: 0.2,
            soil_capacity: 0.3,
            roughness_length: 0.01,
            screen_height: 2.0,
            air_diffusivity: 2.08e-5,
            vapor_diffusivity: 2.34e-5,
            latent_heat: 2.45e6,
            air_specific_heat: 1004.5,
            von_karman: 0.4,
            air_density: 1.2,
            fuel_specific_heat: 1004.5,
            water_specific_heat: 4186.0,
        }
    }
}

impl FuelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::InvalidArgument("fuel bed needs at least one layer".into()));
        }
        let positive = [
            ("layer_depth", self.layer_depth),
            ("bulk_density", self.bulk_density),
            ("solid_density", self.solid_density),
            ("surface_to_volume", self.surface_to_volume),
            ("saturation_moisture", self.saturation_moisture),
            ("kc_intercept", self.kc_intercept),
            ("storage_capacity", self.storage_capacity),
            ("roughness_length", self.roughness_length),
            ("screen_height", self.screen_height),
            ("air_specific_heat", self.air_specific_heat),
            ("von_karman", self.von_karman),
            ("air_density", self.air_density),
            ("fuel_specific_heat", self.fuel_specific_heat),
            ("water_specific_heat", self.water_specific_heat),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("fuel parameter {name} = {v} must be positive")));
            }
        }
        let nonneg = [
            ("surface_conductance", self.surface_conductance),
            ("absorption_la", self.absorption_la),
            ("attenuation", self.attenuation),
            ("kc_slope", self.kc_slope),
            ("k_fuel_water", self.k_fuel_water),
            ("drainage_coefficient", self.drainage_coefficient),
            ("dt0_a", self.dt0_a),
            ("air_diffusivity", self.air_diffusivity),
            ("vapor_diffusivity", self.vapor_diffusivity),
            ("latent_heat", self.latent_heat),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("fuel parameter {name} = {v} must be nonnegative")));
            }
        }
        if self.bulk_density >= self.solid_density {
            return Err(Error::InvalidArgument("bulk density must be below solid density".into()));
        }
        if !(0.0..=1.0).contains(&self.albedo) || !(0.0..=1.0).contains(&self.soil_albedo) {
            return Err(Error::InvalidArgument("fuel and soil albedo must lie in [0,1]".into()));
        }
        if self.screen_height <= self.roughness_length {
            return Err(Error::InvalidArgument("screen height must exceed the roughness length".into()));
        }
        Ok(())
    }

    /// Thickness of one layer, m.
    pub fn dz(&self) -> f64 {
        self.layer_depth / self.n_layers as f64
    }

    /// Solid volume fraction.
    pub fn v_fuel(&self) -> f64 {
        self.bulk_density / self.solid_density
    }

    /// Air volume fraction.
    pub fn v_air(&self) -> f64 {
        1.0 - self.v_fuel()
    }

    /// Fuel surface area per unit bed volume, m⁻¹.
    pub fn fuel_area_density(&self) -> f64 {
        self.surface_to_volume * self.v_fuel()
    }

    /// Bed conductivity at moisture `m`, W m⁻¹ K⁻¹.
    pub fn conductivity(&self, m: f64) -> f64 {
        self.kc_intercept + self.kc_slope * m
    }

    /// Liquid storage capacity, kg m⁻³ of bed.
    pub fn storage_per_volume(&self) -> f64 {
        self.storage_capacity * self.bulk_density
    }

    /// Friction velocity from the log law for a wind speed at screen height.
    pub fn friction_velocity(&self, wind: f64) -> f64 {
        self.von_karman * wind.max(0.0) / (self.screen_height / self.roughness_length).ln()
    }

    /// Turbulent diffusivity at the top of the bed for wind at screen height.
    pub fn top_diffusivity(&self, wind: f64) -> f64 {
        self.dt0_a * (self.dt0_b * self.friction_velocity(wind)).exp()
    }
}

/// State of one fuel layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelLayer {
    /// Solid fuel, K.
    pub t_f: f64,
    /// Surface water, K.
    pub t_w: f64,
    /// Internal air, K.
    pub t_a: f64,
    /// Dry-basis moisture, kg kg⁻¹.
    pub m_f: f64,
    /// Liquid water, kg m⁻³ of layer.
    pub l_w: f64,
    /// Specific humidity of internal air, kg kg⁻¹.
    pub q_a: f64,
}

/// The whole column, top layer first, plus the skin temperature of the patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelLayerState {
    pub layers: Vec<FuelLayer>,
    /// K
    pub t_skin: f64,
}

impl FuelLayerState {
    /// Uniform column at temperature `t`, moisture `m_f`, dry surfaces, and
    /// internal air at relative humidity `rh`.
    pub fn uniform(params: &FuelParams, t: f64, m_f: f64, rh: f64, pressure: f64) -> Self {
        let layer = FuelLayer {
            t_f: t,
            t_w: t,
            t_a: t,
            m_f,
            l_w: 0.0,
            q_a: rh.clamp(0.0, 1.0) * q_sat(t, pressure),
        };
        Self {
            layers: vec![layer; params.n_layers],
            t_skin: t,
        }
    }

    /// Internal air in equilibrium with the fuel moisture of each layer.
    pub fn at_equilibrium(params: &FuelParams, t: f64, m_f: f64, pressure: f64) -> Self {
        let rh = rh_equilibrium(m_f, t, params.nelson_a, params.nelson_b);
        Self::uniform(params, t, m_f, rh, pressure)
    }

    pub fn validate(&self, params: &FuelParams) -> Result<()> {
        if self.layers.len() != params.n_layers {
            return Err(Error::InvalidArgument(format!(
                "fuel state has {} layers, parameters expect {}",
                self.layers.len(),
                params.n_layers
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let temps_ok = [l.t_f, l.t_w, l.t_a].iter().all(|t| *t > 0.0 && t.is_finite());
            if !temps_ok || !(l.m_f >= 0.0) || !(l.l_w >= 0.0) || !(l.q_a >= 0.0) {
                return Err(Error::InvalidArgument(format!("fuel layer {i} state out of range: {l:?}")));
            }
        }
        if !(self.t_skin > 0.0) {
            return Err(Error::InvalidArgument("skin temperature must be positive".into()));
        }
        Ok(())
    }

    /// Total water, kg m⁻².
    pub fn water(&self, params: &FuelParams) -> f64 {
        let dz = params.dz();
        let air = params.v_air() * params.air_density;
        self.layers
            .iter()
            .map(|l| dz * (params.bulk_density * l.m_f + l.l_w + air * l.q_a))
            .sum()
    }

    /// Stored enthalpy of the three media, J m⁻².
    pub fn enthalpy(&self, params: &FuelParams) -> f64 {
        self.layers.iter().map(|l| layer_enthalpy(params, l).iter().sum::<f64>()).sum()
    }

    /// Thickness-weighted fuel temperature, K.
    pub fn mean_fuel_temperature(&self) -> f64 {
        self.layers.iter().map(|l| l.t_f).sum::<f64>() / self.layers.len() as f64
    }

    pub fn mean_moisture(&self) -> f64 {
        self.layers.iter().map(|l| l.m_f).sum::<f64>() / self.layers.len() as f64
    }
}

/// `[H_f, H_w, H_a]` for one layer, J m⁻².
fn layer_enthalpy(p: &FuelParams, l: &FuelLayer) -> [f64; 3] {
    let dz = p.dz();
    let cw = p.water_specific_heat;
    [
        dz * p.bulk_density * (p.fuel_specific_heat + cw * l.m_f) * l.t_f,
        dz * (l.l_w + WET_EPS) * cw * l.t_w,
        dz * p.v_air() * p.air_density * (p.air_specific_heat * l.t_a + l.q_a * (p.latent_heat + cw * l.t_a)),
    ]
}

/// Saturation specific humidity over water, kg kg⁻¹.
pub fn q_sat(t: f64, pressure: f64) -> f64 {
    let tc = t - KELVIN;
    let e = 611.2 * (17.67 * tc / (t - 29.65)).exp();
    0.622 * e / (pressure - 0.378 * e)
}

/// Gibbs free energy of sorption `-(RT/M) ln RH`, cal g⁻¹.
fn delta_g(t: f64, rh: f64) -> f64 {
    -(R_GAS * t / M_WATER) * rh.ln() / CAL_PER_G
}

/// Nelson equilibrium moisture content, kg kg⁻¹, clamped to
/// `[0, M_SAT_DEFAULT]`.
pub fn equilibrium_moisture(t: f64, rh: f64, a: f64, b: f64) -> f64 {
    let rh = if !(RH_MIN..=RH_MAX).contains(&rh) {
        log::warn!("relative humidity {rh} clamped to [{RH_MIN}, {RH_MAX}]");
        rh.clamp(RH_MIN, RH_MAX)
    } else {
        rh
    };
    emc_from_delta_g(delta_g(t, rh), a, b)
}

fn emc_from_delta_g(dg: f64, a: f64, b: f64) -> f64 {
    ((dg.ln() - a) / b).clamp(0.0, M_SAT_DEFAULT)
}

/// Relative humidity in equilibrium with moisture `m` at temperature `t`;
/// the inverse of [`equilibrium_moisture`].
pub fn rh_equilibrium(m: f64, t: f64, a: f64, b: f64) -> f64 {
    let dg = (a + b * m).exp() * CAL_PER_G;
    (-dg * M_WATER / (R_GAS * t)).exp()
}

/// Drainage out of a layer, kg m⁻³ s⁻¹ (per unit bed volume).
///
/// Liquid beyond the pore volume of the layer cannot be held at all and
/// leaves at the much faster `OVERFLOW_RATE`.
pub fn drainage_flux(l_w: f64, params: &FuelParams) -> f64 {
    let pores = params.v_air() * RHO_WATER;
    params.drainage_coefficient * (l_w - params.storage_per_volume()).max(0.0) + OVERFLOW_RATE * (l_w - pores).max(0.0)
}

/// Conduction between the patch skin and the first fuel layer, W, in the
/// printed sign: negative when the skin is warmer than the layer.
pub fn fuel_surface_coupling(t_i: f64, t_f1: f64, k1: f64, dz1: f64, area: f64) -> f64 {
    -k1 * area * (t_i - t_f1) / (0.5 * dz1)
}

/// Atmospheric forcing above the bed for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceForcing {
    /// Net shortwave absorbed by the patch, W m⁻²; deposited inside the bed.
    pub shortwave: f64,
    /// Wind at screen height, m s⁻¹.
    pub wind: f64,
    /// K
    pub t_air: f64,
    /// Fraction.
    pub rh: f64,
    /// Pa
    pub pressure: f64,
    /// mm h⁻¹
    pub precip: f64,
}

/// Conditions below the bed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilBoundary {
    /// K
    pub t_soil: f64,
    /// Soil specific humidity, kg kg⁻¹; `None` means no vapour exchange.
    pub q_soil: Option<f64>,
}

/// How the skin temperature is fixed during a step.
pub enum TopBoundary<'a> {
    Prescribed(f64),
    /// Skin heat balance excluding conduction: net gain in W m⁻² for a
    /// trial skin temperature. The conduction into the first layer closes it.
    Balance(&'a (dyn Fn(f64) -> f64 + Sync)),
}

/// Per-layer fluxes at the end of a step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FluxBundle {
    /// Fuel to internal air, W m⁻³.
    pub h_f_air: f64,
    /// Water to internal air, W m⁻³.
    pub h_w_air: f64,
    /// Fuel to water, W m⁻³.
    pub h_f_w: f64,
    /// Net mixing heat into the layer air, W m⁻².
    pub h_air_mix: f64,
    /// Desorption from fuel to air, kg m⁻³ s⁻¹.
    pub e_f_air: f64,
    /// Evaporation from water to air, kg m⁻³ s⁻¹.
    pub e_w_air: f64,
    /// Absorption of liquid water into fuel, kg m⁻³ s⁻¹.
    pub e_w_f: f64,
    /// Net vapour mixed into the layer air, kg m⁻² s⁻¹.
    pub e_air_mix: f64,
    /// Drainage out of the layer, kg m⁻² s⁻¹.
    pub drainage: f64,
    /// Shortwave absorbed by the layer, W m⁻².
    pub r_fnet: f64,
    /// Conduction into the layer from above, W m⁻².
    pub h_cond: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoistureStepReport {
    /// Conduction from the skin into the first layer, W m⁻².
    pub g_top: f64,
    /// Vapour leaving the bed top, kg m⁻² s⁻¹.
    pub e_top: f64,
    /// Sensible heat leaving the bed top through the air spaces, W m⁻².
    pub h_top: f64,
    /// Energy that crossed the column boundaries over the step, J m⁻².
    pub energy_in: f64,
    /// Water that crossed the column boundaries over the step, kg m⁻².
    pub water_in: f64,
    /// Stored enthalpy change over the step, J m⁻².
    pub energy_change: f64,
    /// Stored water change over the step, kg m⁻².
    pub water_change: f64,
    pub substeps: usize,
    pub fluxes: Vec<FluxBundle>,
}

impl MoistureStepReport {
    pub fn energy_closure_error(&self) -> f64 {
        self.energy_change - self.energy_in
    }

    pub fn water_closure_error(&self) -> f64 {
        self.water_change - self.water_in
    }
}

const NV: usize = 6;

/// Boundary fluxes of a column state, used for both the residual and the
/// closure bookkeeping.
struct Boundary {
    /// Net energy into the column, W m⁻².
    energy: f64,
    /// Net water into the column, kg m⁻² s⁻¹.
    water: f64,
    g_top: f64,
    e_top: f64,
    h_top: f64,
}

struct Column<'a> {
    p: &'a FuelParams,
    f: &'a SurfaceForcing,
    soil: &'a SoilBoundary,
    top: &'a TopBoundary<'a>,
    old: &'a FuelLayerState,
    dt: f64,
    /// Shortwave absorbed per layer, W m⁻².
    sw: Vec<f64>,
    /// Mixing diffusivities at the interfaces `0..=n` (top, between layers, bottom).
    d_heat: Vec<f64>,
    d_vap: Vec<f64>,
    q_air: f64,
}

impl<'a> Column<'a> {
    fn new(
        p: &'a FuelParams,
        f: &'a SurfaceForcing,
        soil: &'a SoilBoundary,
        top: &'a TopBoundary<'a>,
        old: &'a FuelLayerState,
        dt: f64,
    ) -> Self {
        let n = p.n_layers;
        let dz = p.dz();
        // Beer's law down, soil reflection back up, the rest leaves or heats soil
        let ext = p.attenuation * p.fuel_area_density() / 4.0;
        let down: Vec<f64> = (0..=n).map(|k| (-ext * dz * k as f64).exp()).collect();
        let at_soil = down[n];
        let mut sw = vec![0.0; n];
        for i in 0..n {
            let up_in = p.soil_albedo * at_soil * down[n - i - 1];
            let up_out = p.soil_albedo * at_soil * down[n - i];
            sw[i] = f.shortwave.max(0.0) * ((down[i] - down[i + 1]) + (up_in - up_out));
        }
        let u_star = p.friction_velocity(f.wind);
        let d_top = p.top_diffusivity(f.wind);
        let decay = p.chi_a + p.chi_b * u_star;
        let (mut d_heat, mut d_vap) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
        for k in 0..=n {
            let z = dz * k as f64;
            let d = d_top * (-decay * z / p.layer_depth).exp();
            d_heat.push(d.max(p.air_diffusivity));
            d_vap.push(d.max(p.vapor_diffusivity));
        }
        let rh = f.rh.clamp(0.0, 1.0);
        Self {
            p,
            f,
            soil,
            top,
            old,
            dt,
            sw,
            d_heat,
            d_vap,
            q_air: rh * q_sat(f.t_air, f.pressure),
        }
    }

    fn n(&self) -> usize {
        self.p.n_layers
    }

    fn unpack(&self, x: &DVector<f64>) -> (Vec<FuelLayer>, f64) {
        let layers = (0..self.n())
            .map(|i| {
                let s = &x.as_slice()[NV * i..NV * i + NV];
                FuelLayer {
                    t_f: s[0],
                    t_w: s[1],
                    t_a: s[2],
                    m_f: s[3],
                    l_w: s[4],
                    q_a: s[5],
                }
            })
            .collect();
        (layers, x[NV * self.n()])
    }

    fn pack(state: &FuelLayerState) -> DVector<f64> {
        let mut v: Vec<f64> = state
            .layers
            .iter()
            .flat_map(|l| [l.t_f, l.t_w, l.t_a, l.m_f, l.l_w, l.q_a])
            .collect();
        v.push(state.t_skin);
        DVector::from_vec(v)
    }

    fn vapour_enthalpy(&self, t: f64) -> f64 {
        self.p.latent_heat + self.p.water_specific_heat * t
    }

    /// In-layer exchange rates per unit bed volume.
    fn local(&self, l: &FuelLayer) -> FluxBundle {
        let p = self.p;
        let a_f = p.fuel_area_density();
        let g = p.surface_conductance;
        let wet = l.l_w.max(0.0) / (l.l_w.max(0.0) + HALF_WET * p.bulk_density);
        let wet_h = (l.l_w.max(0.0) + WET_EPS) / (l.l_w.max(0.0) + WET_EPS + HALF_WET * p.bulk_density);
        let q_f = q_sat(l.t_f, self.f.pressure) * rh_equilibrium(l.m_f, l.t_f, p.nelson_a, p.nelson_b);
        let m_room = (p.saturation_moisture - l.m_f).max(0.0);
        FluxBundle {
            h_f_air: a_f * p.air_density * p.air_specific_heat * g * (l.t_f - l.t_a),
            h_w_air: a_f * wet_h * p.air_density * p.air_specific_heat * g * (l.t_w - l.t_a),
            h_f_w: p.k_fuel_water * a_f * wet_h * (l.t_f - l.t_w),
            e_f_air: a_f * p.air_density * g * (q_f - l.q_a),
            e_w_air: a_f * wet * p.air_density * g * (q_sat(l.t_w, self.f.pressure) - l.q_a),
            e_w_f: p.bulk_density * p.absorption_la * (p.absorption_lb * l.m_f).exp() / 3600.0 * m_room * wet,
            ..Default::default()
        }
    }

    fn skin_conductance(&self, top: &FuelLayer) -> f64 {
        self.p.conductivity(top.m_f) / (0.5 * self.p.dz())
    }

    /// Residual vector (energy rows in W m⁻², water rows scaled to W m⁻²),
    /// the per-layer fluxes and the boundary totals.
    fn evaluate(&self, x: &DVector<f64>) -> (DVector<f64>, Vec<FluxBundle>, Boundary) {
        let p = self.p;
        let n = self.n();
        let dz = p.dz();
        let dt = self.dt;
        let cw = p.water_specific_heat;
        let (layers, t_skin) = self.unpack(x);
        let air_cap = p.v_air() * p.air_density;
        let mut r = DVector::zeros(NV * n + 1);
        let mut fl: Vec<FluxBundle> = layers.iter().map(|l| self.local(l)).collect();
        for (b, s) in fl.iter_mut().zip(&self.sw) {
            b.r_fnet = *s;
        }

        // interface fluxes, positive downward, index k = interface above layer k
        let mut cond = vec![0.0; n + 1];
        let mut heat_mix = vec![0.0; n + 1];
        let mut vap_mix = vec![0.0; n + 1];
        let mut vap_h = vec![0.0; n + 1];
        let mut drain = vec![0.0; n + 1];
        let mut drain_h = vec![0.0; n + 1];

        let g_top = self.skin_conductance(&layers[0]) * (t_skin - layers[0].t_f);
        cond[0] = g_top;
        let top_h = air_cap * p.air_specific_heat * self.d_heat[0] / (0.5 * dz);
        let top_v = air_cap * self.d_vap[0] / (0.5 * dz);
        heat_mix[0] = top_h * (self.f.t_air - layers[0].t_a);
        vap_mix[0] = top_v * (self.q_air - layers[0].q_a);
        vap_h[0] = vap_mix[0] * self.vapour_enthalpy(if vap_mix[0] > 0.0 { self.f.t_air } else { layers[0].t_a });
        for k in 1..n {
            let (u, d) = (&layers[k - 1], &layers[k]);
            let ku = p.conductivity(u.m_f);
            let kd = p.conductivity(d.m_f);
            cond[k] = (u.t_f - d.t_f) / (0.5 * dz / ku + 0.5 * dz / kd);
            heat_mix[k] = air_cap * p.air_specific_heat * self.d_heat[k] / dz * (u.t_a - d.t_a);
            vap_mix[k] = air_cap * self.d_vap[k] / dz * (u.q_a - d.q_a);
            vap_h[k] = vap_mix[k] * self.vapour_enthalpy(if vap_mix[k] > 0.0 { u.t_a } else { d.t_a });
        }
        let bot = &layers[n - 1];
        cond[n] = p.conductivity(bot.m_f) / (0.5 * dz) * (bot.t_f - self.soil.t_soil);
        heat_mix[n] = air_cap * p.air_specific_heat * self.d_heat[n] / (0.5 * dz) * (bot.t_a - self.soil.t_soil);
        if let Some(qs) = self.soil.q_soil {
            vap_mix[n] = air_cap * self.d_vap[n] / (0.5 * dz) * (bot.q_a - qs);
            vap_h[n] = vap_mix[n] * self.vapour_enthalpy(if vap_mix[n] > 0.0 { bot.t_a } else { self.soil.t_soil });
        }
        for k in 0..n {
            drain[k + 1] = drainage_flux(layers[k].l_w, p) * dz;
            drain_h[k + 1] = drain[k + 1] * cw * layers[k].t_w;
        }
        let precip = self.f.precip.max(0.0) / 3600.0;
        drain[0] = precip;
        drain_h[0] = precip * cw * self.f.t_air;

        for (i, (l, o)) in layers.iter().zip(&self.old.layers).enumerate() {
            let b = &mut fl[i];
            b.h_cond = cond[i];
            b.h_air_mix = heat_mix[i] - heat_mix[i + 1];
            b.e_air_mix = vap_mix[i] - vap_mix[i + 1];
            b.drainage = drain[i + 1];
            let b = *b;
            let [hf, hw, ha] = layer_enthalpy(p, l);
            let [hf0, hw0, ha0] = layer_enthalpy(p, o);
            let hv_f = self.vapour_enthalpy(l.t_f);
            let hv_w = self.vapour_enthalpy(l.t_w);
            let base = NV * i;
            r[base] = (hf - hf0) / dt
                - b.r_fnet
                - (cond[i] - cond[i + 1])
                - dz * (-b.h_f_air - b.e_f_air * hv_f - b.h_f_w + b.e_w_f * cw * l.t_w);
            r[base + 1] = (hw - hw0) / dt
                - dz * (b.h_f_w - b.h_w_air - b.e_w_air * hv_w - b.e_w_f * cw * l.t_w)
                - (drain_h[i] - drain_h[i + 1]);
            r[base + 2] = (ha - ha0) / dt
                - dz * (b.h_f_air + b.h_w_air + b.e_f_air * hv_f + b.e_w_air * hv_w)
                - (heat_mix[i] - heat_mix[i + 1])
                - (vap_h[i] - vap_h[i + 1]);
            r[base + 3] = WATER_ROW_SCALE * (p.bulk_density * dz * (l.m_f - o.m_f) / dt - dz * (b.e_w_f - b.e_f_air));
            r[base + 4] = WATER_ROW_SCALE
                * (dz * (l.l_w - o.l_w) / dt - dz * (-b.e_w_f - b.e_w_air) - (drain[i] - drain[i + 1]));
            r[base + 5] = WATER_ROW_SCALE
                * (air_cap * dz * (l.q_a - o.q_a) / dt - dz * (b.e_f_air + b.e_w_air) - (vap_mix[i] - vap_mix[i + 1]));
        }
        r[NV * n] = match self.top {
            TopBoundary::Prescribed(t) => p.conductivity(layers[0].m_f) * (t_skin - t) / (0.5 * dz),
            TopBoundary::Balance(f) => f(t_skin) - g_top,
        };

        let sw_total: f64 = self.sw.iter().sum();
        let boundary = Boundary {
            energy: sw_total + cond[0] - cond[n] + heat_mix[0] - heat_mix[n] + vap_h[0] - vap_h[n] + drain_h[0]
                - drain_h[n],
            water: vap_mix[0] - vap_mix[n] + drain[0] - drain[n],
            g_top,
            e_top: -vap_mix[0],
            h_top: -heat_mix[0],
        };
        (r, fl, boundary)
    }

    fn step_size(k: usize, v: f64) -> f64 {
        let typical = match k % NV {
            0..=2 => 1.0,
            3 => 1e-3,
            4 => 1.0,
            _ => 1e-3,
        };
        1e-7 * v.abs().max(typical)
    }

    fn scale(k: usize) -> f64 {
        match k % NV {
            0..=2 => 1.0,
            3 => 1e-3,
            4 => 1e-2,
            _ => 1e-5,
        }
    }

    fn solve(&self) -> Option<DVector<f64>> {
        let mut x = Self::pack(self.old);
        let n = x.len();
        for _ in 0..MAX_NEWTON {
            let (r, _, _) = self.evaluate(&x);
            if !r.iter().all(|v| v.is_finite()) {
                return None;
            }
            let mut jac = DMatrix::zeros(n, n);
            for k in 0..n {
                let h = Self::step_size(k, x[k]);
                let mut xp = x.clone();
                xp[k] += h;
                let (rp, _, _) = self.evaluate(&xp);
                jac.set_column(k, &((rp - &r) / h));
            }
            let delta = jac.lu().solve(&(-&r))?;
            x += &delta;
            // keep the iterate physical
            for i in 0..self.n() {
                x[NV * i + 4] = x[NV * i + 4].max(0.0);
                x[NV * i + 5] = x[NV * i + 5].max(0.0);
            }
            let worst = delta.iter().enumerate().map(|(k, d)| (d / Self::scale(k)).abs()).fold(0.0, f64::max);
            if !worst.is_finite() {
                return None;
            }
            if worst < NEWTON_TOL {
                return Some(x);
            }
        }
        None
    }
}

/// Advance the fuel column by `dt`, halving the step on Newton failure.
pub fn moisture_step(
    state: &mut FuelLayerState,
    params: &FuelParams,
    forcing: &SurfaceForcing,
    soil: &SoilBoundary,
    top: &TopBoundary,
    dt: f64,
) -> Result<MoistureStepReport> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
    }
    state.validate(params)?;
    let water0 = state.water(params);
    let energy0 = state.enthalpy(params);
    let mut report = MoistureStepReport {
        g_top: 0.0,
        e_top: 0.0,
        h_top: 0.0,
        energy_in: 0.0,
        water_in: 0.0,
        energy_change: 0.0,
        water_change: 0.0,
        substeps: 0,
        fluxes: Vec::new(),
    };
    advance(state, params, forcing, soil, top, dt, &mut report)?;
    // flux fields become step averages
    report.g_top /= dt;
    report.e_top /= dt;
    report.h_top /= dt;
    report.energy_change = state.enthalpy(params) - energy0;
    report.water_change = state.water(params) - water0;
    Ok(report)
}

fn advance(
    state: &mut FuelLayerState,
    params: &FuelParams,
    forcing: &SurfaceForcing,
    soil: &SoilBoundary,
    top: &TopBoundary,
    dt: f64,
    report: &mut MoistureStepReport,
) -> Result<()> {
    let solved = {
        let col = Column::new(params, forcing, soil, top, state, dt);
        col.solve().map(|x| {
            let (_, fl, b) = col.evaluate(&x);
            (col.unpack(&x), fl, b)
        })
    };
    match solved {
        Some(((layers, t_skin), fl, b)) => {
            state.layers = layers;
            state.t_skin = t_skin;
            clamp_state(state, params, forcing.pressure);
            report.energy_in += b.energy * dt;
            report.water_in += b.water * dt;
            report.g_top += b.g_top * dt;
            report.e_top += b.e_top * dt;
            report.h_top += b.h_top * dt;
            report.substeps += 1;
            report.fluxes = fl;
            Ok(())
        }
        None if dt / 2.0 >= DT_MIN => {
            log::debug!("fuel column Newton failed at dt = {dt} s, halving");
            advance(state, params, forcing, soil, top, dt / 2.0, report)?;
            advance(state, params, forcing, soil, top, dt / 2.0, report)
        }
        None => Err(Error::Numerical(format!(
            "fuel moisture Newton iteration did not converge down to dt = {dt} s"
        ))),
    }
}

fn clamp_state(state: &mut FuelLayerState, p: &FuelParams, pressure: f64) {
    for (i, l) in state.layers.iter_mut().enumerate() {
        if l.m_f < 0.0 || l.m_f > p.saturation_moisture {
            log::warn!("fuel layer {i}: moisture {} clamped to [0, {}]", l.m_f, p.saturation_moisture);
            l.m_f = l.m_f.clamp(0.0, p.saturation_moisture);
        }
        if l.l_w < 0.0 {
            log::warn!("fuel layer {i}: liquid water {} clamped to 0", l.l_w);
            l.l_w = 0.0;
        }
        let qs = q_sat(l.t_a, pressure);
        if l.q_a > qs * (1.0 + 1e-9) {
            log::warn!("fuel layer {i}: humidity {} above saturation {qs}, clamped", l.q_a);
            l.q_a = qs;
        }
    }
}
