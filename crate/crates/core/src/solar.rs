//! Solar position after the NOAA solar-calculator spreadsheet, and the
//! scene-frame sun vector.
//!
//! Longitude is west-positive throughout this crate (Vancouver is +123.12,
//! Paris is -2.35). Time zones are hours east of UTC (PDT is -7).

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location {
    /// Degrees north.
    pub latitude: f64,
    /// Degrees west.
    pub longitude: f64,
    /// Hours east of UTC.
    pub timezone: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolarState {
    /// Degrees clockwise from north.
    pub azimuth: f64,
    /// Degrees from vertical, refraction corrected.
    pub zenith: f64,
    pub r_unit: Vec3,
    /// W m⁻²
    pub i_direct: f64,
    /// W m⁻²
    pub i_diffuse: f64,
    pub sun_up: bool,
}

impl SolarState {
    pub fn new(azimuth: f64, zenith: f64, i_direct: f64, i_diffuse: f64) -> Self {
        Self {
            azimuth,
            zenith,
            r_unit: solar_unit_vector(azimuth, zenith),
            i_direct,
            i_diffuse,
            sun_up: zenith < 90.0,
        }
    }

    pub fn at(loc: &Location, when: NaiveDateTime, i_direct: f64, i_diffuse: f64) -> Result<Self> {
        let (az, zen) = solar_position(loc.latitude, loc.longitude, when, loc.timezone)?;
        Ok(Self::new(az, zen, i_direct, i_diffuse))
    }
}

/// Unit vector toward the sun in the scene frame (x north, y west, z up).
pub fn solar_unit_vector(azimuth_deg: f64, zenith_deg: f64) -> Vec3 {
    let (sa, ca) = azimuth_deg.to_radians().sin_cos();
    let (sz, cz) = zenith_deg.to_radians().sin_cos();
    Vec3::new(ca * sz, -sa * sz, cz)
}

fn julian_day(utc: NaiveDateTime) -> f64 {
    let secs = utc.and_utc().timestamp() as f64 + f64::from(utc.nanosecond()) * 1e-9;
    secs / 86400.0 + 2440587.5
}

/// `(azimuth, zenith)` in degrees for a local wall-clock time.
pub fn solar_position(latitude: f64, longitude_west: f64, local: NaiveDateTime, timezone: f64) -> Result<(f64, f64)> {
    if !(-90.0..=90.0).contains(&latitude) || !latitude.is_finite() {
        return Err(Error::InvalidArgument(format!("latitude {latitude} outside [-90, 90]")));
    }
    if !longitude_west.is_finite() || !timezone.is_finite() {
        return Err(Error::InvalidArgument("longitude and time zone must be finite".into()));
    }
    let year = chrono::Datelike::year(&local);
    if !(1900..=2100).contains(&year) {
        return Err(Error::InvalidArgument(format!("year {year} outside 1900-2100")));
    }
    let utc = local - chrono::Duration::milliseconds((timezone * 3.6e6).round() as i64);
    let jc = (julian_day(utc) - 2451545.0) / 36525.0;

    let l0 = (280.46646 + jc * (36000.76983 + jc * 0.0003032)).rem_euclid(360.0);
    let m = 357.52911 + jc * (35999.05029 - 0.0001537 * jc);
    let e = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);
    let mr = m.to_radians();
    let c = mr.sin() * (1.914602 - jc * (0.004817 + 0.000014 * jc))
        + (2.0 * mr).sin() * (0.019993 - 0.000101 * jc)
        + (3.0 * mr).sin() * 0.000289;
    let true_long = l0 + c;
    let omega = (125.04 - 1934.136 * jc).to_radians();
    let app_long = true_long - 0.00569 - 0.00478 * omega.sin();
    let obliq0 = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
    let obliq = obliq0 + 0.00256 * omega.cos();
    let decl = (obliq.to_radians().sin() * app_long.to_radians().sin()).asin();

    let y = (obliq.to_radians() / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eq_time = 4.0
        * (y * (2.0 * l0r).sin() - 2.0 * e * mr.sin() + 4.0 * e * y * mr.sin() * (2.0 * l0r).cos()
            - 0.5 * y * y * (4.0 * l0r).sin()
            - 1.25 * e * e * (2.0 * mr).sin())
        .to_degrees();

    let minutes = f64::from(local.num_seconds_from_midnight()) / 60.0 + f64::from(local.nanosecond()) * 1e-9 / 60.0;
    let true_solar = (minutes + eq_time - 4.0 * longitude_west - 60.0 * timezone).rem_euclid(1440.0);
    let hour_angle = if true_solar / 4.0 < 0.0 { true_solar / 4.0 + 180.0 } else { true_solar / 4.0 - 180.0 };

    let lat = latitude.to_radians();
    let cos_zen = (lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.to_radians().cos()).clamp(-1.0, 1.0);
    let zen = cos_zen.acos();
    let elev = 90.0 - zen.to_degrees();

    let te = elev.to_radians().tan();
    let refraction = if elev > 85.0 {
        0.0
    } else if elev > 5.0 {
        58.1 / te - 0.07 / te.powi(3) + 0.000086 / te.powi(5)
    } else if elev > -0.575 {
        1735.0 + elev * (-518.2 + elev * (103.4 + elev * (-12.79 + elev * 0.711)))
    } else {
        -20.772 / te
    } / 3600.0;
    let zenith = 90.0 - (elev + refraction);

    let denom = lat.cos() * zen.sin();
    let az_core = if denom.abs() < 1e-12 {
        0.0
    } else {
        ((lat.sin() * zen.cos() - decl.sin()) / denom).clamp(-1.0, 1.0).acos().to_degrees()
    };
    let azimuth = if hour_angle > 0.0 {
        (az_core + 180.0).rem_euclid(360.0)
    } else {
        (540.0 - az_core).rem_euclid(360.0)
    };
    Ok((azimuth, zenith))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn at(y: i32, mo: u32, d: u32, h: u32, mi: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, mo, d).unwrap().and_hms_opt(h, mi, 0).unwrap()
    }

    #[test]
    fn unit_vector_cases() {
        assert!((solar_unit_vector(37.0, 0.0) - Vec3::z()).norm() < 1e-12);
        assert!((solar_unit_vector(0.0, 90.0) - Vec3::x()).norm() < 1e-12);
        assert!((solar_unit_vector(90.0, 90.0) + Vec3::y()).norm() < 1e-12);
        let a = solar_unit_vector(123.0, 40.0);
        assert!((a - solar_unit_vector(483.0, 40.0)).norm() < 1e-12);
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equator_equinox_noon_is_overhead() {
        // apparent solar noon at Greenwich on the March equinox is close to 12:07 UTC
        let best = (0..60 * 4)
            .map(|k| solar_position(0.0, 0.0, at(2020, 3, 20, 10, 0) + chrono::Duration::minutes(k), 0.0).unwrap().1)
            .fold(f64::INFINITY, f64::min);
        assert!(best < 0.5, "{best}");
    }

    #[test]
    fn midnight_is_dark() {
        let (_, z) = solar_position(45.0, 0.0, at(2021, 6, 1, 0, 0), 0.0).unwrap();
        assert!(z > 90.0);
        assert!(!SolarState::new(0.0, z, 0.0, 0.0).sun_up);
    }

    #[test]
    fn range_checks() {
        assert!(solar_position(91.0, 0.0, at(2021, 6, 1, 0, 0), 0.0).is_err());
        assert!(solar_position(10.0, 0.0, at(1850, 6, 1, 0, 0), 0.0).is_err());
    }

    #[test]
    fn vancouver_afternoon() {
        // frozen from an independent solar-position implementation (SPA)
        let (az, zen) = solar_position(49.28, 123.12, at(1992, 8, 15, 13, 30), -7.0).unwrap();
        assert!((az - 185.5145).abs() < 0.1, "{az}");
        assert!((zen - 35.5995).abs() < 0.1, "{zen}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn one_daily_zenith_minimum(day in 0i64..365, lat in 25.0..60.0f64, lon in -180.0..180.0f64) {
            let start = at(2021, 1, 1, 0, 0) + chrono::Duration::days(day);
            let tz = (-lon / 15.0).round();
            let z: Vec<f64> = (0..1440)
                .map(|k| solar_position(lat, lon, start + chrono::Duration::minutes(k), tz).unwrap().1)
                .collect();
            let minima = (1..z.len() - 1).filter(|&k| z[k] < z[k - 1] && z[k] <= z[k + 1]).count();
            prop_assert!(minima <= 1);
        }
    }
}
