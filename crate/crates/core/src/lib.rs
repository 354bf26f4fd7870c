//! Surface temperature, substrate conduction and fuel moisture simulation
//! for triangulated 3D scenes under solar, weather and external-heat forcing.
//!
//! The crate is organized bottom-up: geometry and materials, solar and
//! weather forcing, radiative exchange, convection, conduction, the fuel
//! moisture column, and finally the time-stepping driver that couples them.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conduction;
pub mod config;
pub mod convection;
pub mod driver;
pub mod error;
pub mod geometry;
pub mod materials;
pub mod mesh;
pub mod moisture;
pub mod quadrature;
pub mod radiation;
pub mod scene;
pub mod shading;
pub mod solar;
pub mod viewfactor;
pub mod weather;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use geometry::Vec3;
pub use materials::{assign_materials, validate_domain, AssembledDomain, Binding, Layer, MaterialKind, MaterialStack, Selector};
pub use mesh::{load_mesh, MeshFormat, Patch};
pub use moisture::{FuelLayerState, FuelParams};
pub use solar::{solar_position, solar_unit_vector, SolarState};
pub use viewfactor::{build_view_factor_matrix, view_factor_pair, ViewFactorMatrix};
pub use weather::{load_weather, WeatherSample, WeatherSeries};

/// Stefan-Boltzmann constant, W m⁻² K⁻⁴.
pub const SIGMA: f64 = 5.67e-8;
/// Offset between Celsius and Kelvin.
pub const KELVIN: f64 = 273.15;
