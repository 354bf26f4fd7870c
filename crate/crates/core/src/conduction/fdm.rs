//! Crank-Nicolson finite differences on cell-centred sublayers.

use crate::error::{Error, Result};
use crate::materials::Layer;

use super::solve_tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BottomBc {
    Adiabatic,
    /// Temperature held at the bottom face, old and new values of the step.
    Dirichlet { old: f64, new: f64 },
}

/// `T₁(t+Δt) = alpha + beta·G(t+Δt)` for the top cell, given the surface flux
/// `G` entering the column at the end of the step.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceResponse {
    pub alpha: f64,
    pub beta: f64,
    hom: Vec<f64>,
    unit: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdmColumn {
    /// Cell thickness, m.
    pub dz: Vec<f64>,
    /// Cell conductivity, W m⁻¹ K⁻¹.
    pub k: Vec<f64>,
    /// Heat capacity per unit area, J m⁻² K⁻¹.
    pub cap: Vec<f64>,
    /// Cell temperatures, K.
    pub t: Vec<f64>,
    /// Conductance between cells `i` and `i+1`, W m⁻² K⁻¹.
    cond: Vec<f64>,
    /// Surface flux into the top face at the end of the last step, W m⁻².
    pub g_surface: f64,
    /// Flux leaving through the bottom face during the last step, W m⁻².
    pub g_bottom: f64,
}

impl FdmColumn {
    /// Splits every layer into equal sublayers no thicker than `max_dz`.
    pub fn from_layers(layers: &[Layer], max_dz: f64, t0: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("substrate has no layers".into()));
        }
        if !(max_dz > 0.0) {
            return Err(Error::InvalidArgument(format!("sublayer size must be positive, got {max_dz}")));
        }
        let (mut dz, mut k, mut cap) = (Vec::new(), Vec::new(), Vec::new());
        for l in layers {
            if !(l.thickness > 0.0 && l.conductivity > 0.0 && l.density > 0.0 && l.specific_heat > 0.0) {
                return Err(Error::InvalidArgument("layer properties must be positive".into()));
            }
            let n = (l.thickness / max_dz - 1e-9).ceil().max(1.0) as usize;
            let d = l.thickness / n as f64;
            for _ in 0..n {
                dz.push(d);
                k.push(l.conductivity);
                cap.push(l.density * l.specific_heat * d);
            }
        }
        let cond = (0..dz.len() - 1)
            .map(|i| 1.0 / (0.5 * dz[i] / k[i] + 0.5 * dz[i + 1] / k[i + 1]))
            .collect();
        let n = dz.len();
        Ok(Self {
            t: vec![t0; n],
            dz,
            k,
            cap,
            cond,
            g_surface: 0.0,
            g_bottom: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn thickness(&self) -> f64 {
        self.dz.iter().sum()
    }

    /// Conductance from the top cell centre to the surface.
    pub fn top_conductance(&self) -> f64 {
        self.k[0] / (0.5 * self.dz[0])
    }

    fn bottom_conductance(&self) -> f64 {
        let n = self.len() - 1;
        self.k[n] / (0.5 * self.dz[n])
    }

    /// Stored heat per unit area relative to 0 K, J m⁻².
    pub fn heat_content(&self) -> f64 {
        self.cap.iter().zip(&self.t).map(|(c, t)| c * t).sum()
    }

    /// Thickness-weighted mean temperature.
    pub fn mean_temperature(&self) -> f64 {
        self.dz.iter().zip(&self.t).map(|(d, t)| d * t).sum::<f64>() / self.thickness()
    }

    /// Surface temperature implied by the top cell and the last surface flux.
    pub fn surface_temperature(&self) -> f64 {
        self.t[0] + self.g_surface / self.top_conductance()
    }

    fn assemble(&self, bottom: BottomBc, dt: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.len();
        let (mut a, mut b, mut c, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let ci = self.cap[i] / dt;
            b[i] = ci;
            d[i] = ci * self.t[i];
            if i > 0 {
                let g = 0.5 * self.cond[i - 1];
                a[i] = -g;
                b[i] += g;
                d[i] += g * (self.t[i - 1] - self.t[i]);
            }
            if i + 1 < n {
                let g = 0.5 * self.cond[i];
                c[i] = -g;
                b[i] += g;
                d[i] += g * (self.t[i + 1] - self.t[i]);
            }
        }
        d[0] += 0.5 * self.g_surface;
        if let BottomBc::Dirichlet { old, new } = bottom {
            let g = 0.5 * self.bottom_conductance();
            b[n - 1] += g;
            d[n - 1] += g * (new + old - self.t[n - 1]);
        }
        (a, b, c, d)
    }

    /// Prepares a step. The surface flux enters the top cell as the average
    /// of its values at the start and end of the step.
    pub fn surface_response(&self, bottom: BottomBc, dt: f64) -> SurfaceResponse {
        let (a, b, c, d) = self.assemble(bottom, dt);
        let hom = solve_tridiagonal(&a, &b, &c, &d);
        let mut e = vec![0.0; self.len()];
        e[0] = 0.5;
        let unit = solve_tridiagonal(&a, &b, &c, &e);
        SurfaceResponse {
            alpha: hom[0],
            beta: unit[0],
            hom,
            unit,
        }
    }

    /// Coupling for a massless surface node at temperature `T_s` joined to the
    /// top cell centre: `G = K (T_s - T₁(t+Δt))`, eliminated with `resp`.
    pub fn coupling(&self, resp: &SurfaceResponse) -> super::SubstrateCoupling {
        let k = self.top_conductance();
        let k_eff = k / (1.0 + k * resp.beta);
        super::SubstrateCoupling {
            slope: k_eff,
            offset: -k_eff * resp.alpha,
        }
    }

    /// Completes a step prepared by [`surface_response`](Self::surface_response)
    /// with the end-of-step surface flux `g_new`.
    pub fn commit(&mut self, resp: &SurfaceResponse, g_new: f64, bottom: BottomBc) {
        let n = self.len();
        let t_old_last = self.t[n - 1];
        for i in 0..n {
            self.t[i] = resp.hom[i] + g_new * resp.unit[i];
        }
        self.g_bottom = match bottom {
            BottomBc::Adiabatic => 0.0,
            BottomBc::Dirichlet { old, new } => 0.5 * self.bottom_conductance() * ((t_old_last - old) + (self.t[n - 1] - new)),
        };
        self.g_surface = g_new;
    }

    /// Advances with a prescribed surface flux into the top face (W m⁻²).
    pub fn step_flux(&mut self, g_new: f64, bottom: BottomBc, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let r = self.surface_response(bottom, dt);
        self.commit(&r, g_new, bottom);
        Ok(())
    }

    /// Advances with a prescribed surface temperature; returns the surface
    /// flux into the column at the end of the step.
    pub fn step_surface_temperature(&mut self, t_surface: f64, bottom: BottomBc, dt: f64) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let r = self.surface_response(bottom, dt);
        let g = self.coupling(&r).flux(t_surface);
        self.commit(&r, g, bottom);
        Ok(g)
    }
}
