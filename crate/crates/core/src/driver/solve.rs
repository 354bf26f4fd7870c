//! Scalar root finding for the surface heat balance of one patch.

use crate::error::{Error, Result};

/// Newton steps stop once the update is below this, K.
pub const NEWTON_TOL_K: f64 = 0.001;
pub const MAX_NEWTON: usize = 100;
/// Bracket for the bisection fallback, relative to the air temperature.
pub const BRACKET_BELOW: f64 = 100.0;
pub const BRACKET_ABOVE: f64 = 1500.0;
const FD_STEP: f64 = 1e-4;

/// Solves `F(T) = 0` for a surface balance that decreases with `T`
/// (emission, convection and conduction all grow with surface temperature).
///
/// Newton from `guess` with a central-difference slope; once an update falls
/// below [`NEWTON_TOL_K`] one more step is taken so the reported root is
/// well inside the tolerance. Falls back to bisection on
/// `[t_air - 100, t_air + 1500]`.
pub fn solve_patch_energy_balance(f: impl Fn(f64) -> f64, guess: f64, t_air: f64) -> Result<f64> {
    let mut t = guess;
    let mut converged = false;
    for _ in 0..MAX_NEWTON {
        let r = f(t);
        let slope = (f(t + FD_STEP) - f(t - FD_STEP)) / (2.0 * FD_STEP);
        if !(r.is_finite() && slope.is_finite()) || slope >= 0.0 {
            break;
        }
        let step = -r / slope;
        t += step;
        if !(t.is_finite() && t > 0.0) {
            break;
        }
        if converged {
            return Ok(t);
        }
        converged = step.abs() < NEWTON_TOL_K;
    }
    bisect(&f, t_air - BRACKET_BELOW, t_air + BRACKET_ABOVE)
}

fn bisect(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo.max(1.0), hi);
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo >= 0.0 && fhi <= 0.0) {
        return Err(Error::Numerical(format!(
            "surface balance not bracketed on [{lo:.2}, {hi:.2}] K (F = {flo:.4e}, {fhi:.4e})"
        )));
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
