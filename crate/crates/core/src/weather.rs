//! Weather forcing: CSV ingestion, interpolation, log-law wind profile and a
//! synthetic clear-sky generator for tests and examples.

use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solar::{solar_position, Location};
use crate::KELVIN;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeatherSample {
    pub timestamp: NaiveDateTime,
    /// K
    pub t_air: f64,
    /// K, equal to the air temperature.
    pub t_sky: f64,
    /// Fraction in [0, 1].
    pub relative_humidity: f64,
    /// m s⁻¹ at the reference height.
    pub wind_speed_ref: f64,
    /// Direction the wind blows from, degrees clockwise from north.
    pub wind_dir_deg: Option<f64>,
    /// Pa
    pub pressure: f64,
    /// kg m⁻² s⁻¹
    pub precipitation_rate: f64,
    /// W m⁻²
    pub i_direct: f64,
    /// W m⁻²
    pub i_diffuse: f64,
}

impl WeatherSample {
    /// Horizontal unit vector the wind blows toward, in scene axes.
    pub fn wind_heading(&self) -> Option<crate::Vec3> {
        self.wind_dir_deg.map(|d| {
            let (s, c) = d.to_radians().sin_cos();
            // from-direction (cos d, -sin d) in x-north / y-west axes
            crate::Vec3::new(-c, s, 0.0)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    pub samples: Vec<WeatherSample>,
    pub location: Location,
    /// s
    pub cadence: f64,
}

#[derive(Debug, Deserialize)]
struct Row {
    timestamp: String,
    dni_wm2: Option<f64>,
    dhi_wm2: Option<f64>,
    tair_c: Option<f64>,
    rh_pct: Option<f64>,
    wind_ms: Option<f64>,
    pressure_pa: Option<f64>,
    precip_mmhr: Option<f64>,
    #[serde(default)]
    wind_dir_deg: Option<f64>,
}

pub(crate) fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
    let s = s.trim();
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

const REQUIRED: [&str; 8] = [
    "timestamp",
    "dni_wm2",
    "dhi_wm2",
    "tair_c",
    "rh_pct",
    "wind_ms",
    "pressure_pa",
    "precip_mmhr",
];

pub fn load_weather(path: impl AsRef<Path>) -> Result<WeatherSeries> {
    let path = path.as_ref();
    let werr = |msg: String| Error::Weather {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| werr(e.to_string()))?;
    let headers = rdr.headers()?.clone();
    for col in REQUIRED {
        if !headers.iter().any(|h| h == col) {
            return Err(werr(format!("missing required column '{col}'")));
        }
    }

    let mut samples: Vec<WeatherSample> = Vec::new();
    for (k, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = k + 2; // header is line 1
        let r = rec.map_err(|e| werr(format!("row {row}: {e}")))?;
        let need = |v: Option<f64>, col: &str| v.ok_or_else(|| werr(format!("row {row}, column {col}: empty cell")));
        let ts = parse_timestamp(&r.timestamp).ok_or_else(|| werr(format!("row {row}, column timestamp: cannot parse '{}'", r.timestamp)))?;
        let dni = need(r.dni_wm2, "dni_wm2")?;
        let dhi = need(r.dhi_wm2, "dhi_wm2")?;
        let tair = need(r.tair_c, "tair_c")?;
        let rh = need(r.rh_pct, "rh_pct")?;
        let wind = need(r.wind_ms, "wind_ms")?;
        let pres = need(r.pressure_pa, "pressure_pa")?;
        let precip = need(r.precip_mmhr, "precip_mmhr")?;
        let check = |ok: bool, col: &str, v: f64| {
            if ok {
                Ok(())
            } else {
                Err(werr(format!("row {row}, column {col}: invalid value {v}")))
            }
        };
        check(dni >= 0.0, "dni_wm2", dni)?;
        check(dhi >= 0.0, "dhi_wm2", dhi)?;
        check(tair > -KELVIN, "tair_c", tair)?;
        check((0.0..=100.0).contains(&rh), "rh_pct", rh)?;
        check(wind >= 0.0, "wind_ms", wind)?;
        check(pres > 0.0, "pressure_pa", pres)?;
        check(precip >= 0.0, "precip_mmhr", precip)?;
        samples.push(WeatherSample {
            timestamp: ts,
            t_air: tair + KELVIN,
            t_sky: tair + KELVIN,
            relative_humidity: rh / 100.0,
            wind_speed_ref: wind,
            wind_dir_deg: r.wind_dir_deg,
            pressure: pres,
            precipitation_rate: precip / 3600.0,
            i_direct: dni,
            i_diffuse: dhi,
        });
    }
    WeatherSeries::from_samples(samples, Location::default()).map_err(|e| match e {
        Error::InvalidArgument(msg) => werr(msg),
        other => other,
    })
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

fn interpolate(a: &WeatherSample, b: &WeatherSample, w: f64) -> WeatherSample {
    let dir = match (a.wind_dir_deg, b.wind_dir_deg) {
        (Some(da), Some(db)) => {
            let (sa, ca) = da.to_radians().sin_cos();
            let (sb, cb) = db.to_radians().sin_cos();
            Some(lerp(sa, sb, w).atan2(lerp(ca, cb, w)).to_degrees().rem_euclid(360.0))
        }
        (x, y) => x.or(y),
    };
    let dt = (b.timestamp - a.timestamp).num_milliseconds() as f64 * w;
    let t_air = lerp(a.t_air, b.t_air, w);
    WeatherSample {
        timestamp: a.timestamp + Duration::milliseconds(dt.round() as i64),
        t_air,
        t_sky: t_air,
        relative_humidity: lerp(a.relative_humidity, b.relative_humidity, w),
        wind_speed_ref: lerp(a.wind_speed_ref, b.wind_speed_ref, w),
        wind_dir_deg: dir,
        pressure: lerp(a.pressure, b.pressure, w),
        precipitation_rate: lerp(a.precipitation_rate, b.precipitation_rate, w),
        i_direct: lerp(a.i_direct, b.i_direct, w),
        i_diffuse: lerp(a.i_diffuse, b.i_diffuse, w),
    }
}

impl WeatherSeries {
    /// Validates ordering and cadence. A single missing sample (gap of two
    /// cadences) is filled linearly with a warning; longer gaps are errors.
    pub fn from_samples(samples: Vec<WeatherSample>, location: Location) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("weather series needs at least two samples".into()));
        }
        let diffs: Vec<i64> = samples.windows(2).map(|w| (w[1].timestamp - w[0].timestamp).num_seconds()).collect();
        if let Some(k) = diffs.iter().position(|&d| d <= 0) {
            return Err(Error::InvalidArgument(format!(
                "timestamps not strictly increasing at row {}",
                k + 3
            )));
        }
        let cadence = *diffs.iter().min().expect("nonempty");
        let mut out = Vec::with_capacity(samples.len());
        out.push(samples[0]);
        for (k, &d) in diffs.iter().enumerate() {
            let (a, b) = (&samples[k], &samples[k + 1]);
            if d == cadence {
            } else if d == 2 * cadence {
                log::warn!("weather gap after {}: filled one sample by interpolation", a.timestamp);
                out.push(interpolate(a, b, 0.5));
            } else {
                return Err(Error::InvalidArgument(format!(
                    "gap of {d} s after {} exceeds one cadence ({cadence} s)",
                    a.timestamp
                )));
            }
            out.push(*b);
        }
        Ok(Self {
            samples: out,
            location,
            cadence: cadence as f64,
        })
    }

    pub fn start(&self) -> NaiveDateTime {
        self.samples[0].timestamp
    }

    pub fn end(&self) -> NaiveDateTime {
        self.samples[self.samples.len() - 1].timestamp
    }

    pub fn span_seconds(&self) -> f64 {
        (self.end() - self.start()).num_milliseconds() as f64 / 1000.0
    }

    /// Linear interpolation at `t` seconds after the first sample.
    pub fn sample_seconds(&self, t: f64) -> Result<WeatherSample> {
        let span = self.span_seconds();
        if !(0.0..=span).contains(&t) {
            return Err(Error::OutOfSpan { t, start: 0.0, end: span });
        }
        let pos = t / self.cadence;
        let k = (pos.floor() as usize).min(self.samples.len() - 2);
        let w = pos - k as f64;
        if w == 0.0 {
            return Ok(self.samples[k]);
        }
        if w == 1.0 {
            return Ok(self.samples[k + 1]);
        }
        Ok(interpolate(&self.samples[k], &self.samples[k + 1], w))
    }

    /// Linear interpolation at a local wall-clock time.
    pub fn sample(&self, when: NaiveDateTime) -> Result<WeatherSample> {
        let t = (when - self.start()).num_milliseconds() as f64 / 1000.0;
        self.sample_seconds(t)
    }

    /// Mean and half-range of air temperature over the first `seconds`.
    pub fn air_temperature_stats(&self, seconds: f64) -> (f64, f64) {
        let n = ((seconds / self.cadence).floor() as usize + 1).clamp(1, self.samples.len());
        let ts: Vec<f64> = self.samples[..n].iter().map(|s| s.t_air).collect();
        let mean = ts.iter().sum::<f64>() / n as f64;
        let (lo, hi) = ts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
        (mean, 0.5 * (hi - lo))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        writeln!(w, "timestamp,dni_wm2,dhi_wm2,tair_c,rh_pct,wind_ms,pressure_pa,precip_mmhr,wind_dir_deg").map_err(io)?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{:.3},{:.3},{:.4},{:.4},{:.4},{:.1},{:.5},{}",
                s.timestamp.format("%Y-%m-%dT%H:%M:%S"),
                s.i_direct,
                s.i_diffuse,
                s.t_air - KELVIN,
                s.relative_humidity * 100.0,
                s.wind_speed_ref,
                s.pressure,
                s.precipitation_rate * 3600.0,
                s.wind_dir_deg.map(|d| format!("{d:.1}")).unwrap_or_default()
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Log-law wind speed at height `z` from a reference reading.
pub fn wind_at_height(u_ref: f64, z_ref: f64, z: f64, z0: f64) -> Result<f64> {
    if !(z0 > 0.0) {
        return Err(Error::InvalidArgument(format!("roughness length must be positive, got {z0}")));
    }
    if !(z_ref > z0) {
        return Err(Error::InvalidArgument(format!("reference height {z_ref} must exceed z0 {z0}")));
    }
    if z <= z0 {
        return Ok(0.0);
    }
    Ok(u_ref * (z / z0).ln() / (z_ref / z0).ln())
}

/// Parameters of the synthetic diurnal weather generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWeather {
    /// °C
    pub tair_mean_c: f64,
    /// °C, half of the daily range
    pub tair_amp_c: f64,
    /// %
    pub rh_mean_pct: f64,
    /// %
    pub rh_amp_pct: f64,
    /// m s⁻¹
    pub wind_ms: f64,
    pub wind_dir_deg: Option<f64>,
    /// Local hour of the temperature maximum.
    pub peak_hour: f64,
    /// Scale on the clear-sky irradiance, 0 gives an overcast-dark day.
    pub clearness: f64,
}

impl Default for SyntheticWeather {
    fn default() -> Self {
        Self {
            tair_mean_c: 22.0,
            tair_amp_c: 6.0,
            rh_mean_pct: 55.0,
            rh_amp_pct: 20.0,
            wind_ms: 2.0,
            wind_dir_deg: None,
            peak_hour: 15.0,
            clearness: 1.0,
        }
    }
}

/// Repeating clear-sky days. Direct normal irradiance follows an air-mass
/// attenuation `1353·0.7^(AM^0.678)`, diffuse is a tenth of the beam on a
/// horizontal surface; temperature and humidity are antiphased sinusoids.
pub fn synthetic_clear_sky(
    loc: &Location,
    start: NaiveDateTime,
    days: u32,
    cadence_s: i64,
    p: &SyntheticWeather,
) -> Result<WeatherSeries> {
    let n = (i64::from(days) * 86400 / cadence_s) as usize + 1;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let ts = start + Duration::seconds(k as i64 * cadence_s);
        let (_, zen) = solar_position(loc.latitude, loc.longitude, ts, loc.timezone)?;
        let cz = zen.to_radians().cos();
        let (dni, dhi) = if cz > 0.01 {
            let am = 1.0 / cz;
            let dni = p.clearness * 1353.0 * 0.7f64.powf(am.powf(0.678));
            (dni, 0.1 * dni * cz)
        } else {
            (0.0, 0.0)
        };
        let hour = f64::from(chrono::Timelike::num_seconds_from_midnight(&ts)) / 3600.0;
        let phase = 2.0 * std::f64::consts::PI * (hour - p.peak_hour) / 24.0;
        let t_air = p.tair_mean_c + p.tair_amp_c * phase.cos() + KELVIN;
        let rh = (p.rh_mean_pct - p.rh_amp_pct * phase.cos()).clamp(1.0, 100.0) / 100.0;
        samples.push(WeatherSample {
            timestamp: ts,
            t_air,
            t_sky: t_air,
            relative_humidity: rh,
            wind_speed_ref: p.wind_ms,
            wind_dir_deg: p.wind_dir_deg,
            pressure: 101325.0,
            precipitation_rate: 0.0,
            i_direct: dni,
            i_diffuse: dhi,
        });
    }
    WeatherSeries::from_samples(samples, *loc)
}
