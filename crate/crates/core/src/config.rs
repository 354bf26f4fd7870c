//! Scenario configuration: one JSON document describing geometry, materials,
//! forcing, solver settings and outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::conduction::{ConductionMethod, InnerBoundary};
use crate::convection::ConvectionMethod;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::materials::{Binding, MaterialStack, Selector};
use crate::mesh::{load_mesh, MeshFormat, Patch};
use crate::radiation::ReflectionSettings;
use crate::scene;
use crate::solar::Location;
use crate::weather::SyntheticWeather;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub location: Location,
    pub time: TimeConfig,
    pub mesh: MeshConfig,
    pub materials: Vec<MaterialStack>,
    pub bindings: Vec<Binding>,
    pub weather: WeatherConfig,
    #[serde(default)]
    pub convection: ConvectionConfig,
    #[serde(default)]
    pub conduction: ConductionConfig,
    #[serde(default)]
    pub radiation: RadiationConfig,
    #[serde(default)]
    pub heat_sources: Vec<HeatSource>,
    #[serde(default)]
    pub ignition: IgnitionConfig,
    #[serde(default)]
    pub moisture: MoistureConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub forcing_scale: ForcingScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Local wall-clock start, `YYYY-MM-DDTHH:MM:SS`.
    pub start: NaiveDateTime,
    #[serde(default)]
    pub spinup_days: f64,
    pub report_days: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
}

fn default_dt() -> f64 {
    60.0
}

impl TimeConfig {
    pub fn spinup_seconds(&self) -> f64 {
        self.spinup_days * 86400.0
    }

    pub fn total_seconds(&self) -> f64 {
        (self.spinup_days + self.report_days) * 86400.0
    }

    /// Number of steps in the whole run.
    pub fn steps(&self) -> usize {
        (self.total_seconds() / self.dt_s).round() as usize
    }
}

// flattened structs cannot deny unknown fields
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    #[serde(flatten)]
    pub source: MeshSource,
    /// Height of the ground plane, m.
    #[serde(default)]
    pub ground_datum: f64,
}

/// A mesh file or one of the built-in procedural scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSource {
    File {
        path: PathBuf,
        format: MeshFormat,
    },
    /// Parallelogram `origin + s·u + t·v` in `n×n` cells.
    Square {
        origin: [f64; 3],
        u: [f64; 3],
        v: [f64; 3],
        #[serde(default = "one")]
        n: usize,
        #[serde(default)]
        group: Option<String>,
    },
    /// Horizontal upward-facing disk as a triangle fan.
    Disk {
        center: [f64; 3],
        radius: f64,
        #[serde(default = "default_segments")]
        segments: usize,
        #[serde(default)]
        group: Option<String>,
    },
    /// Inner wall of a vertical open tube, normals toward the axis.
    Tube {
        center: [f64; 3],
        radius: f64,
        height: f64,
        #[serde(default = "default_segments")]
        segments: usize,
        #[serde(default = "one")]
        rings: usize,
        #[serde(default)]
        group: Option<String>,
    },
    CubeArray {
        k: usize,
        size: f64,
        street: f64,
        wall_cells: usize,
        ground_cell: f64,
    },
}

fn one() -> usize {
    1
}

fn default_segments() -> usize {
    24
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl MeshSource {
    pub fn load(&self) -> Result<Vec<Patch>> {
        let mut patches = match self {
            MeshSource::File { path, format } => load_mesh(path, *format)?,
            MeshSource::Square { origin, u, v, n, group } => {
                let mut ps = scene::square(v3(*origin), v3(*u), v3(*v), *n);
                ps.iter_mut().for_each(|p| p.group = group.clone());
                ps
            }
            MeshSource::Disk {
                center,
                radius,
                segments,
                group,
            } => {
                let mut ps = scene::disk(v3(*center), *radius, *segments)?;
                ps.iter_mut().for_each(|p| p.group = group.clone());
                ps
            }
            MeshSource::Tube {
                center,
                radius,
                height,
                segments,
                rings,
                group,
            } => {
                let mut ps = scene::tube_inner(v3(*center), *radius, *height, *segments, *rings)?;
                ps.iter_mut().for_each(|p| p.group = group.clone());
                ps
            }
            MeshSource::CubeArray {
                k,
                size,
                street,
                wall_cells,
                ground_cell,
            } => scene::cube_array(*k, *size, *street, *wall_cells, *ground_cell),
        };
        for (i, p) in patches.iter_mut().enumerate() {
            p.id = i;
        }
        if patches.is_empty() {
            return Err(Error::EmptyDomain);
        }
        Ok(patches)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeatherConfig {
    /// Hourly (or finer) weather CSV, optionally with per-patch wind and air
    /// temperature from an external flow solver.
    Csv {
        path: PathBuf,
        #[serde(default)]
        patch_forcing: Option<PathBuf>,
    },
    /// Repeating clear-sky days generated from the location.
    Synthetic {
        #[serde(flatten)]
        params: SyntheticWeather,
        #[serde(default = "default_cadence")]
        cadence_s: i64,
    },
    /// Time-invariant conditions, e.g. an indoor experiment.
    Constant {
        tair_c: f64,
        #[serde(default = "default_rh")]
        rh_pct: f64,
        #[serde(default)]
        wind_ms: f64,
        #[serde(default)]
        dni_wm2: f64,
        #[serde(default)]
        dhi_wm2: f64,
        #[serde(default = "default_pressure")]
        pressure_pa: f64,
        #[serde(default)]
        precip_mmhr: f64,
    },
}

fn default_cadence() -> i64 {
    3600
}

fn default_rh() -> f64 {
    50.0
}

fn default_pressure() -> f64 {
    101325.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvectionConfig {
    pub method: ConvectionMethod,
    /// Per-material overrides by material name.
    pub per_material: BTreeMap<String, ConvectionMethod>,
    pub roughness_index: usize,
    /// Height of the weather-file wind reading, m.
    pub reference_height: f64,
    /// Site roughness length for the wind profile, m.
    pub z0: f64,
}

impl Default for ConvectionConfig {
    fn default() -> Self {
        Self {
            method: ConvectionMethod::Doe2,
            per_material: BTreeMap::new(),
            roughness_index: 3,
            reference_height: 10.0,
            z0: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConductionConfig {
    pub method: ConductionMethod,
    pub per_material: BTreeMap<String, ConductionMethod>,
    /// Largest finite-difference sublayer, m.
    pub max_dz: f64,
    /// Inner boundary per material name; unlisted materials are adiabatic.
    pub inner: BTreeMap<String, InnerBoundary>,
    pub deep_soil: DeepSoilConfig,
    /// Averaging window of the object-mean inner boundary, s.
    pub object_mean_window_s: f64,
    /// Initial substrate temperature per material, °C.
    pub initial_c: BTreeMap<String, f64>,
}

impl Default for ConductionConfig {
    fn default() -> Self {
        Self {
            method: ConductionMethod::Fdm,
            per_material: BTreeMap::new(),
            max_dz: 0.005,
            inner: BTreeMap::new(),
            deep_soil: DeepSoilConfig::default(),
            object_mean_window_s: 86400.0,
            initial_c: BTreeMap::new(),
        }
    }
}

/// Sinusoidal soil temperature. An unset mean is the mean air temperature of
/// the first day, an unset amplitude is zero (an annual wave is nearly flat
/// over a few days) and an unset damping depth comes from the properties of
/// the deepest layer of the column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepSoilConfig {
    pub t_avg_c: Option<f64>,
    pub amplitude_k: Option<f64>,
    pub period_s: f64,
    pub damping_depth_m: Option<f64>,
    /// Shift of the sine relative to the run start, s.
    pub phase_s: f64,
}

impl Default for DeepSoilConfig {
    fn default() -> Self {
        Self {
            t_avg_c: None,
            amplitude_k: None,
            period_s: 365.0 * 86400.0,
            damping_depth_m: None,
            phase_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadiationConfig {
    #[serde(flatten)]
    pub reflection: ReflectionSettings,
    /// When false every patch sees only sky.
    pub view_factors: bool,
    pub shading: bool,
}

impl Default for RadiationConfig {
    fn default() -> Self {
        Self {
            reflection: ReflectionSettings::default(),
            view_factors: true,
            shading: true,
        }
    }
}

/// External heat applied as `flux · A_i` to the selected patches inside
/// `[start_s, end_s)`. Overlapping entries add up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSource {
    pub select: Selector,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default = "forever")]
    pub end_s: f64,
    /// W m⁻²
    pub flux_w_m2: f64,
}

fn forever() -> f64 {
    f64::INFINITY
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IgnitionMetric {
    /// Thickness-weighted mean temperature of the whole substrate.
    #[default]
    LayerAverage,
    SurfaceTemperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IgnitionAggregation {
    #[default]
    Patch,
    /// Area-weighted over all patches of one material.
    Object,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IgnitionConfig {
    pub metric: IgnitionMetric,
    pub aggregation: IgnitionAggregation,
    /// Threshold per material name, K; overrides the material's own value.
    pub thresholds: BTreeMap<String, f64>,
    /// End the run once every target has ignited.
    pub stop_when_ignited: bool,
    pub sweep: Option<FluxSweep>,
}

/// Flux grid for the `ignition` command: one run per flux with the flux
/// applied to `select` from time zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSweep {
    pub select: Selector,
    /// W m⁻²
    pub fluxes_w_m2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoilTemperature {
    /// Soil under the fuel bed follows the air temperature.
    #[default]
    Air,
    /// Soil surface follows the deep-soil sine.
    DeepSoil,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoistureConfig {
    pub soil_temperature: SoilTemperature,
    /// Soil specific humidity, kg kg⁻¹; unset means no vapour flux from soil.
    pub soil_humidity: Option<f64>,
    /// Initial fuel moisture, kg kg⁻¹; internal air starts in equilibrium.
    pub initial_moisture: f64,
}

impl Default for MoistureConfig {
    fn default() -> Self {
        Self {
            soil_temperature: SoilTemperature::Air,
            soil_humidity: None,
            initial_moisture: 0.15,
        }
    }
}

/// Multipliers on the weather forcing, used by the sensitivity scan. Air
/// temperature is scaled in °C; scaled relative humidity is capped at 100%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingScale {
    pub wind: f64,
    pub dni: f64,
    pub tair_c: f64,
    pub rh: f64,
}

impl Default for ForcingScale {
    fn default() -> Self {
        Self {
            wind: 1.0,
            dni: 1.0,
            tair_c: 1.0,
            rh: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Row spacing of `patch_series.csv`, s; defaults to the time step.
    pub cadence_s: Option<f64>,
    /// Snapshot spacing, s; no snapshots when unset.
    pub snapshot_every_s: Option<f64>,
    pub series: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            cadence_s: None,
            snapshot_every_s: None,
            series: true,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let MeshSource::File { path, .. } = &mut self.mesh.source {
            fix(path);
        }
        if let WeatherConfig::Csv { path, patch_forcing } = &mut self.weather {
            fix(path);
            if let Some(p) = patch_forcing {
                fix(p);
            }
        }
        fix(&mut self.outputs.dir);
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<()> {
        let t = &self.time;
        if !(t.report_days > 0.0) {
            return Err(Error::Config("empty reporting window".into()));
        }
        if !(t.spinup_days >= 0.0) {
            return Err(Error::Config("spin-up days must be nonnegative".into()));
        }
        if !(t.dt_s > 0.0 && t.dt_s.is_finite()) {
            return Err(Error::Config(format!("time step {} must be positive", t.dt_s)));
        }
        let steps = t.total_seconds() / t.dt_s;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config("run length is not a whole number of time steps".into()));
        }
        if let Some(c) = self.outputs.cadence_s {
            let r = c / t.dt_s;
            if !(c > 0.0) || (r - r.round()).abs() > 1e-9 {
                return Err(Error::Config(format!("output cadence {c} s is not a multiple of the time step")));
            }
        }
        if let Some(c) = self.outputs.snapshot_every_s {
            let r = c / t.dt_s;
            if !(c > 0.0) || (r - r.round()).abs() > 1e-9 {
                return Err(Error::Config(format!("snapshot spacing {c} s is not a multiple of the time step")));
            }
        }
        if self.materials.is_empty() {
            return Err(Error::Config("no materials".into()));
        }
        let names: Vec<&str> = self.materials.iter().map(|m| m.name.as_str()).collect();
        let known = |n: &String, what: &str| {
            if names.contains(&n.as_str()) {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} refers to unknown material '{n}'")))
            }
        };
        for m in &self.materials {
            m.validate()?;
        }
        for n in self.convection.per_material.keys() {
            known(n, "convection.per_material")?;
        }
        for n in self.conduction.per_material.keys() {
            known(n, "conduction.per_material")?;
        }
        for n in self.conduction.inner.keys() {
            known(n, "conduction.inner")?;
        }
        for n in self.conduction.initial_c.keys() {
            known(n, "conduction.initial_c")?;
        }
        for n in self.ignition.thresholds.keys() {
            known(n, "ignition.thresholds")?;
        }
        if !(self.conduction.max_dz > 0.0) {
            return Err(Error::Config("conduction.max_dz must be positive".into()));
        }
        for h in &self.heat_sources {
            if !(h.end_s >= h.start_s) || !h.flux_w_m2.is_finite() {
                return Err(Error::Config("heat source needs end_s >= start_s and a finite flux".into()));
            }
        }
        match &self.mesh.source {
            MeshSource::File { path, .. } if !path.exists() => {
                return Err(Error::Config(format!("mesh file {} not found", path.display())));
            }
            _ => {}
        }
        if let WeatherConfig::Csv { path, patch_forcing } = &self.weather {
            if !path.exists() {
                return Err(Error::Config(format!("weather file {} not found", path.display())));
            }
            if let Some(p) = patch_forcing.as_ref().filter(|p| !p.exists()) {
                return Err(Error::Config(format!("patch forcing file {} not found", p.display())));
            }
        }
        Ok(())
    }
}
