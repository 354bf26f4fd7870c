//! Exterior convection coefficients and the sensible heat flux.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Simple-combined roughness rows `(D, E, F)`, index 1 (very rough) to 6
/// (very smooth).
pub const SIMPLE_COMBINED: [(f64, f64, f64); 6] = [
    (11.58, 5.894, 0.0),
    (12.49, 4.065, 0.028),
    (10.79, 4.192, 0.0),
    (8.23, 4.0, -0.057),
    (10.22, 3.1, 0.0),
    (8.23, 3.33, -0.036),
];

/// Roughness multipliers `R_f` for the same six classes.
pub const ROUGHNESS_MULTIPLIER: [f64; 6] = [2.17, 1.67, 1.52, 1.13, 1.11, 1.0];

/// MoWiTT `(C₁, a, b)` for windward and leeward faces.
pub const MOWITT_WINDWARD: (f64, f64, f64) = (0.84, 3.26, 0.89);
pub const MOWITT_LEEWARD: (f64, f64, f64) = (0.84, 3.55, 0.617);

/// Faces with `|cos ε|` below this count as vertical.
pub const VERTICAL_COS_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ConvectionMethod {
    NusseltJurgess,
    McAdams,
    SimpleCombined,
    Tarp,
    Doe2,
    /// Prescribed coefficient, W m⁻² K⁻¹.
    Fixed { h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvectionInputs {
    pub method: ConvectionMethod,
    /// Local wind speed at the patch height, m s⁻¹.
    pub v_z: f64,
    /// 1 (very rough) to 6 (very smooth).
    pub roughness_index: usize,
    pub windward: bool,
    /// m²
    pub area: f64,
    /// m
    pub perimeter: f64,
    /// Surface minus air temperature, K.
    pub delta_t: f64,
    /// Angle between the upward vertical and the surface normal, degrees.
    pub tilt_deg: f64,
}

impl ConvectionInputs {
    /// Inputs for a patch with outward normal `normal`; tilt is taken from
    /// the normal's vertical component.
    pub fn for_surface(method: ConvectionMethod, normal: &Vec3, area: f64, perimeter: f64, roughness_index: usize) -> Self {
        Self {
            method,
            v_z: 0.0,
            roughness_index,
            windward: true,
            area,
            perimeter,
            delta_t: 0.0,
            tilt_deg: normal.z.clamp(-1.0, 1.0).acos().to_degrees(),
        }
    }
}

fn roughness_row(index: usize) -> Result<usize> {
    if (1..=6).contains(&index) {
        Ok(index - 1)
    } else {
        Err(Error::InvalidArgument(format!("roughness index {index} outside 1..=6")))
    }
}

/// Natural convection coefficient by orientation and sign of `ΔT`.
pub fn natural_coefficient(delta_t: f64, tilt_deg: f64, upward_facing: bool) -> f64 {
    let cbrt = delta_t.abs().cbrt();
    let cos_e = tilt_deg.to_radians().cos().abs();
    if delta_t == 0.0 || cos_e < VERTICAL_COS_TOL {
        return 1.31 * cbrt;
    }
    let stable = (delta_t > 0.0) != upward_facing;
    if stable {
        9.482 * cbrt / (7.283 - cos_e)
    } else {
        1.81 * cbrt / (1.382 + cos_e)
    }
}

pub fn convection_coefficient(x: &ConvectionInputs) -> Result<f64> {
    if !(x.v_z >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative wind speed {}", x.v_z)));
    }
    let upward = x.tilt_deg < 90.0;
    let h = match x.method {
        ConvectionMethod::NusseltJurgess => 5.8 + 3.94 * x.v_z,
        ConvectionMethod::McAdams => 5.7 + 3.8 * x.v_z,
        ConvectionMethod::SimpleCombined => {
            let (d, e, f) = SIMPLE_COMBINED[roughness_row(x.roughness_index)?];
            d + e * x.v_z + f * x.v_z * x.v_z
        }
        ConvectionMethod::Tarp => {
            if !(x.area > 0.0 && x.perimeter > 0.0) {
                return Err(Error::InvalidArgument("TARP needs positive area and perimeter".into()));
            }
            let rf = ROUGHNESS_MULTIPLIER[roughness_row(x.roughness_index)?];
            let wf = if x.windward { 1.0 } else { 0.5 };
            natural_coefficient(x.delta_t, x.tilt_deg, upward) + 2.537 * wf * rf * (x.perimeter * x.v_z / x.area).sqrt()
        }
        ConvectionMethod::Doe2 => {
            if !(x.area > 0.0 && x.perimeter > 0.0) {
                return Err(Error::InvalidArgument("DOE-2 needs positive area and perimeter".into()));
            }
            let rf = ROUGHNESS_MULTIPLIER[roughness_row(x.roughness_index)?];
            let (c1, a, b) = if x.windward { MOWITT_WINDWARD } else { MOWITT_LEEWARD };
            let h_nat = natural_coefficient(x.delta_t, x.tilt_deg, upward);
            let h_c = ((c1 * x.delta_t.abs().cbrt()).powi(2) + (a * x.v_z.powf(b)).powi(2)).sqrt();
            h_nat + rf * (h_c - h_nat)
        }
        ConvectionMethod::Fixed { h } => {
            if !(h >= 0.0) {
                return Err(Error::InvalidArgument(format!("fixed coefficient {h} must be nonnegative")));
            }
            h
        }
    };
    Ok(h)
}

/// Sensible loss `h (T_i - T_air) A`, positive when the surface is warmer.
pub fn sensible_flux(h: f64, t_i: f64, t_air: f64, area: f64) -> f64 {
    h * (t_i - t_air) * area
}

/// Windward when the horizontal wind (blowing toward `heading`) strikes the
/// face, i.e. `heading · n < 0`. Unknown direction counts as windward.
pub fn is_windward(normal: &Vec3, heading: Option<Vec3>) -> bool {
    match heading {
        None => true,
        Some(w) => Vec3::new(w.x, w.y, 0.0).dot(normal) < 0.0,
    }
}
