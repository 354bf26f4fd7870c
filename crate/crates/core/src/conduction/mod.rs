//! One-dimensional substrate conduction behind each patch.

mod ctf;
mod fdm;
mod soil;

pub use ctf::{compute_ctf, ctf_flux, CtfHistory, CtfSet, MAX_CTF_TERMS};
pub use fdm::{BottomBc, FdmColumn, SurfaceResponse};
pub use soil::{deep_soil_temperature, object_mean_inner_bc, DeepSoilParams, ObjectMeanTracker};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConductionMethod {
    #[default]
    Fdm,
    Ctf,
}

/// Inner boundary of a substrate column.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerBoundary {
    /// Fixed inner temperature, K.
    Prescribed { t_in: f64 },
    /// Sinusoidal soil temperature evaluated at the column depth.
    DeepSoil,
    #[default]
    Adiabatic,
    /// Running area-weighted mean surface temperature of the object.
    ObjectMean,
}

/// Linear surface coupling `G(T_s) = slope·T_s + offset` (W m⁻²), the heat
/// flux drawn into the substrate for a trial surface temperature `T_s`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubstrateCoupling {
    pub slope: f64,
    pub offset: f64,
}

impl SubstrateCoupling {
    pub fn flux(&self, t_surface: f64) -> f64 {
        self.slope * t_surface + self.offset
    }
}

/// Thomas algorithm for `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`.
pub(crate) fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
