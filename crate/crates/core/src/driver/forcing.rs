//! Weather and per-patch flow forcing sampled on the simulation clock.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use serde::Deserialize;

use crate::config::{ForcingScale, ScenarioConfig, WeatherConfig};
use crate::error::{Error, Result};
use crate::solar::Location;
use crate::weather::{load_weather, synthetic_clear_sky, WeatherSample, WeatherSeries};
use crate::KELVIN;

/// Local wind and air temperature for one patch from an external flow solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchAir {
    /// m s⁻¹
    pub v_z: f64,
    /// K
    pub t_air: f64,
}

#[derive(Debug, Deserialize)]
struct PatchRow {
    patch_id: usize,
    time_s: f64,
    vz_ms: f64,
    tair_c: f64,
}

/// Per-patch series keyed by patch id, each sorted by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchForcing {
    series: BTreeMap<usize, Vec<(f64, PatchAir)>>,
}

impl PatchForcing {
    /// Reads `patch_id,time_s,vz_ms,tair_c`; times are seconds from the
    /// start of the run.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut series: BTreeMap<usize, Vec<(f64, PatchAir)>> = BTreeMap::new();
        for (k, row) in rdr.deserialize::<PatchRow>().enumerate() {
            let r = row?;
            if !(r.vz_ms >= 0.0 && r.time_s.is_finite() && r.tair_c.is_finite()) {
                return Err(Error::Weather {
                    path: path.to_path_buf(),
                    msg: format!("patch forcing row {}: invalid values", k + 2),
                });
            }
            series.entry(r.patch_id).or_default().push((
                r.time_s,
                PatchAir {
                    v_z: r.vz_ms,
                    t_air: r.tair_c + KELVIN,
                },
            ));
        }
        for (id, s) in series.iter_mut() {
            s.sort_by(|a, b| a.0.total_cmp(&b.0));
            if s.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Weather {
                    path: path.to_path_buf(),
                    msg: format!("patch {id}: duplicate forcing times"),
                });
            }
        }
        Ok(Self { series })
    }

    pub fn max_patch_id(&self) -> Option<usize> {
        self.series.keys().next_back().copied()
    }

    /// Linear in time, held constant beyond the first and last rows.
    pub fn at(&self, patch: usize, t: f64) -> Option<PatchAir> {
        let s = self.series.get(&patch)?;
        let k = s.partition_point(|(ts, _)| *ts <= t);
        Some(match k {
            0 => s[0].1,
            k if k == s.len() => s[k - 1].1,
            k => {
                let ((t0, a), (t1, b)) = (s[k - 1], s[k]);
                let w = (t - t0) / (t1 - t0);
                PatchAir {
                    v_z: a.v_z + w * (b.v_z - a.v_z),
                    t_air: a.t_air + w * (b.t_air - a.t_air),
                }
            }
        })
    }
}

/// Everything time-dependent that drives a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub weather: WeatherSeries,
    /// Seconds from the first weather sample to the run start.
    pub offset: f64,
    pub start: NaiveDateTime,
    pub scale: ForcingScale,
    pub patch_air: Option<PatchForcing>,
}

fn constant_series(loc: &Location, start: NaiveDateTime, seconds: f64, s: WeatherSample) -> Result<WeatherSeries> {
    let span = Duration::seconds(seconds.ceil().max(1.0) as i64);
    let a = WeatherSample { timestamp: start, ..s };
    let b = WeatherSample {
        timestamp: start + span,
        ..s
    };
    WeatherSeries::from_samples(vec![a, b], *loc)
}

impl Forcing {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let total = cfg.time.total_seconds();
        let start = cfg.time.start;
        let (mut weather, patch_air) = match &cfg.weather {
            WeatherConfig::Csv { path, patch_forcing } => {
                let pf = patch_forcing.as_deref().map(PatchForcing::load).transpose()?;
                (load_weather(path)?, pf)
            }
            WeatherConfig::Synthetic { params, cadence_s } => {
                let days = (total / 86400.0).ceil().max(1.0) as u32;
                (synthetic_clear_sky(&cfg.location, start, days, *cadence_s, params)?, None)
            }
            WeatherConfig::Constant {
                tair_c,
                rh_pct,
                wind_ms,
                dni_wm2,
                dhi_wm2,
                pressure_pa,
                precip_mmhr,
            } => {
                let t_air = tair_c + KELVIN;
                let s = WeatherSample {
                    timestamp: start,
                    t_air,
                    t_sky: t_air,
                    relative_humidity: rh_pct / 100.0,
                    wind_speed_ref: *wind_ms,
                    wind_dir_deg: None,
                    pressure: *pressure_pa,
                    precipitation_rate: precip_mmhr / 3600.0,
                    i_direct: *dni_wm2,
                    i_diffuse: *dhi_wm2,
                };
                (constant_series(&cfg.location, start, total, s)?, None)
            }
        };
        weather.location = cfg.location;
        let offset = (start - weather.start()).num_milliseconds() as f64 / 1000.0;
        if offset < 0.0 || offset + total > weather.span_seconds() + 1e-9 {
            return Err(Error::Config(format!(
                "run {start} + {total} s is not covered by weather {} .. {}",
                weather.start(),
                weather.end()
            )));
        }
        Ok(Self {
            weather,
            offset,
            start,
            scale: cfg.forcing_scale,
            patch_air,
        })
    }

    /// Scaled weather at `t` seconds into the run.
    pub fn sample(&self, t: f64) -> Result<WeatherSample> {
        let mut s = self.weather.sample_seconds(self.offset + t)?;
        let sc = &self.scale;
        s.wind_speed_ref *= sc.wind;
        s.i_direct *= sc.dni;
        s.t_air = (s.t_air - KELVIN) * sc.tair_c + KELVIN;
        s.t_sky = (s.t_sky - KELVIN) * sc.tair_c + KELVIN;
        s.relative_humidity = (s.relative_humidity * sc.rh).min(1.0);
        Ok(s)
    }

    pub fn when(&self, t: f64) -> NaiveDateTime {
        self.start + Duration::milliseconds((t * 1000.0).round() as i64)
    }

    /// Flow-solver override for one patch, scaled like the weather.
    pub fn patch_air(&self, patch: usize, t: f64) -> Option<PatchAir> {
        self.patch_air.as_ref()?.at(patch, t).map(|a| PatchAir {
            v_z: a.v_z * self.scale.wind,
            t_air: (a.t_air - KELVIN) * self.scale.tair_c + KELVIN,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::tests::MINIMAL;

    #[test]
    fn constant_weather_covers_run_and_scales() {
        let mut cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        let f = Forcing::from_config(&cfg).unwrap();
        let s = f.sample(86400.0).unwrap();
        assert!((s.t_air - 293.15).abs() < 1e-12);
        assert_eq!(s.relative_humidity, 0.5);
        cfg.forcing_scale.tair_c = 1.2;
        cfg.forcing_scale.rh = 3.0;
        let f = Forcing::from_config(&cfg).unwrap();
        let s = f.sample(100.0).unwrap();
        assert!((s.t_air - (24.0 + KELVIN)).abs() < 1e-9);
        assert_eq!(s.relative_humidity, 1.0);
    }

    #[test]
    fn patch_forcing_interpolates_and_holds() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pf.csv");
        std::fs::write(&p, "patch_id,time_s,vz_ms,tair_c\n0,0,1.0,10\n0,100,3.0,20\n1,0,0.5,5\n").unwrap();
        let pf = PatchForcing::load(&p).unwrap();
        let a = pf.at(0, 50.0).unwrap();
        assert!((a.v_z - 2.0).abs() < 1e-12 && (a.t_air - (15.0 + KELVIN)).abs() < 1e-12);
        assert_eq!(pf.at(0, 500.0).unwrap().v_z, 3.0);
        assert_eq!(pf.at(1, -5.0).unwrap().v_z, 0.5);
        assert!(pf.at(2, 0.0).is_none());
        assert_eq!(pf.max_patch_id(), Some(1));
    }
}
