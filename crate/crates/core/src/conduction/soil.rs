//! Deep-soil boundary temperature and the object-mean inner boundary.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepSoilParams {
    /// K
    pub t_avg: f64,
    /// Surface amplitude, K.
    pub amplitude: f64,
    /// s
    pub period: f64,
    /// Damping depth, m.
    pub damping_depth: f64,
}

impl DeepSoilParams {
    /// Damping depth `sqrt(k P / (ρ C π))` from soil properties.
    pub fn from_soil(t_avg: f64, amplitude: f64, period: f64, k: f64, rho: f64, c: f64) -> Result<Self> {
        if !(period > 0.0 && k > 0.0 && rho > 0.0 && c > 0.0) {
            return Err(Error::InvalidArgument("soil period and properties must be positive".into()));
        }
        Ok(Self {
            t_avg,
            amplitude,
            period,
            damping_depth: (k * period / (rho * c * std::f64::consts::PI)).sqrt(),
        })
    }

    pub fn max_depth(&self) -> f64 {
        3.0 * self.damping_depth
    }
}

/// `T_avg + A e^{-z/D} sin(2πt/P - z/D)`.
pub fn deep_soil_temperature(z: f64, t: f64, p: &DeepSoilParams) -> Result<f64> {
    if !(p.damping_depth > 0.0) {
        return Err(Error::InvalidArgument(format!("damping depth {} must be positive", p.damping_depth)));
    }
    if !(0.0..=p.max_depth() * (1.0 + 1e-12)).contains(&z) {
        return Err(Error::InvalidArgument(format!(
            "soil depth {z} m outside [0, 3D = {:.4} m]",
            p.max_depth()
        )));
    }
    let r = z / p.damping_depth;
    Ok(p.t_avg + p.amplitude * (-r).exp() * (2.0 * std::f64::consts::PI * t / p.period - r).sin())
}

/// Mean of `(time, temperature)` samples that fall within `window` seconds
/// of the latest one.
pub fn object_mean_inner_bc(history: &[(f64, f64)], window: f64) -> Result<f64> {
    let last = history
        .last()
        .ok_or_else(|| Error::InvalidArgument("object-mean history is empty".into()))?
        .0;
    let (s, n) = history
        .iter()
        .filter(|(t, _)| last - t <= window)
        .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
    Ok(s / n as f64)
}

/// Running window of an object's area-weighted mean surface temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMeanTracker {
    pub window: f64,
    samples: VecDeque<(f64, f64)>,
}

impl ObjectMeanTracker {
    pub fn new(window: f64) -> Self {
        Self {
            window,
            samples: VecDeque::new(),
        }
    }

    /// Adds the state at time `t` from `(temperature, area)` pairs.
    pub fn push(&mut self, t: f64, surfaces: impl IntoIterator<Item = (f64, f64)>) {
        let (s, a) = surfaces.into_iter().fold((0.0, 0.0), |(s, a), (ti, ai)| (s + ti * ai, a + ai));
        if a > 0.0 {
            self.samples.push_back((t, s / a));
        }
        while self.samples.front().is_some_and(|(t0, _)| t - t0 > self.window) {
            self.samples.pop_front();
        }
    }

    pub fn value(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        Some(self.samples.iter().map(|(_, v)| v).sum::<f64>() / self.samples.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DeepSoilParams {
        DeepSoilParams::from_soil(290.0, 8.0, 86400.0, 1.0, 1500.0, 1000.0).unwrap()
    }

    #[test]
    fn soil_cases() {
        let p = params();
        let top = deep_soil_temperature(0.0, p.period / 4.0, &p).unwrap();
        assert!((top - 298.0).abs() < 1e-12);
        let z = p.max_depth();
        let amp = (0..200)
            .map(|k| (deep_soil_temperature(z, k as f64 * p.period / 200.0, &p).unwrap() - 290.0).abs())
            .fold(0.0, f64::max);
        assert!(amp <= 0.05 * 8.0 && amp > 0.049 * 8.0);
        for z in [0.0, 0.05, 0.2] {
            let a = deep_soil_temperature(z, 1234.0, &p).unwrap();
            let b = deep_soil_temperature(z, 1234.0 + p.period, &p).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
        assert!(deep_soil_temperature(z * 1.01, 0.0, &p).is_err());
    }

    #[test]
    fn object_mean_cases() {
        assert_eq!(object_mean_inner_bc(&[(0.0, 300.0), (60.0, 300.0)], 86400.0).unwrap(), 300.0);
        assert_eq!(object_mean_inner_bc(&[(0.0, 300.0), (60.0, 310.0)], 86400.0).unwrap(), 305.0);
        assert_eq!(object_mean_inner_bc(&[(0.0, 300.0), (100.0, 310.0)], 50.0).unwrap(), 310.0);
        assert!(object_mean_inner_bc(&[], 10.0).is_err());

        let mut tr = ObjectMeanTracker::new(86400.0);
        for k in 0..10 {
            tr.push(k as f64 * 60.0, [(300.0, 2.0), (310.0, 2.0)]);
        }
        assert!((tr.value().unwrap() - 305.0).abs() < 1e-12);
    }
}
