//! Solar position, relative air mass and clear-sky irradiance.
//!
//! Position uses the low-precision almanac formulation (mean longitude and
//! anomaly, ecliptic longitude, obliquity, sidereal time); it stays within a
//! few hundredths of a degree of full ephemerides between 1950 and 2050,
//! which is ample for proxy synthesis. Clear-sky irradiance is the Meinel
//! beam model with a fixed diffuse fraction.

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::timeseries::SiteLocation;

/// Zenith angle at and beyond which the sun is below the horizon.
pub const HORIZON_ZENITH: f64 = 90.0;

/// Zenith angle beyond which an interval counts as night for base-load
/// detection (10 degrees below the horizon keeps twilight out).
pub const NIGHT_ZENITH: f64 = 100.0;

pub const SOLAR_CONSTANT: f64 = 1353.0;
pub const DIFFUSE_FRACTION: f64 = 0.10;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolarAngles {
    /// Degrees from the vertical, in [0, 180].
    pub zenith: f64,
    /// Degrees clockwise from north, in [0, 360).
    pub azimuth: f64,
    pub declination: f64,
    /// Degrees, negative before local solar noon.
    pub hour_angle: f64,
}

impl SolarAngles {
    pub fn is_up(&self) -> bool {
        self.zenith < HORIZON_ZENITH
    }

    pub fn is_night(&self) -> bool {
        self.zenith >= NIGHT_ZENITH
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClearSkyIrradiance {
    pub dni: f64,
    pub dhi: f64,
    pub ghi: f64,
}

fn j2000() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2000, 1, 1, 12, 0, 0).unwrap()
}

fn wrap_180(deg: f64) -> f64 {
    let w = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

pub fn solar_position(loc: &SiteLocation, t: DateTime<Utc>) -> SolarAngles {
    let since = t - j2000();
    let n = since.num_seconds() as f64 / 86_400.0
        + since.subsec_nanos() as f64 / 86_400.0e9;

    let mean_long = (280.460 + 0.985_647_4 * n).rem_euclid(360.0);
    let mean_anom = (357.528 + 0.985_600_3 * n).rem_euclid(360.0).to_radians();
    let ecl_long = (mean_long + 1.915 * mean_anom.sin() + 0.020 * (2.0 * mean_anom).sin())
        .to_radians();
    let obliquity = (23.439 - 0.000_000_4 * n).to_radians();

    let right_ascension = (obliquity.cos() * ecl_long.sin())
        .atan2(ecl_long.cos())
        .to_degrees()
        .rem_euclid(360.0);
    let declination = (obliquity.sin() * ecl_long.sin()).asin();

    let ut_hours = (n + 0.5).rem_euclid(1.0) * 24.0;
    let gmst = (6.697_375 + 0.065_709_824_2 * n + ut_hours).rem_euclid(24.0);
    let lmst = (gmst + loc.longitude / 15.0).rem_euclid(24.0);
    let hour_angle = wrap_180(lmst * 15.0 - right_ascension);

    let lat = loc.latitude.to_radians();
    let ha = hour_angle.to_radians();
    let cos_zenith = (lat.sin() * declination.sin()
        + lat.cos() * declination.cos() * ha.cos())
    .clamp(-1.0, 1.0);
    let zenith = cos_zenith.acos().to_degrees();

    let azimuth = (-declination.cos() * ha.sin())
        .atan2(declination.sin() * lat.cos() - declination.cos() * lat.sin() * ha.cos())
        .to_degrees()
        .rem_euclid(360.0);

    SolarAngles {
        zenith,
        azimuth,
        declination: declination.to_degrees(),
        hour_angle,
    }
}

/// Kasten-Young relative air mass; infinite once the sun is down.
pub fn air_mass(zenith: f64) -> f64 {
    if zenith >= HORIZON_ZENITH {
        return f64::INFINITY;
    }
    1.0 / (zenith.to_radians().cos() + 0.50572 * (96.07995 - zenith).powf(-1.6364))
}

pub fn clear_sky_for_zenith(zenith: f64) -> ClearSkyIrradiance {
    if zenith >= HORIZON_ZENITH {
        return ClearSkyIrradiance::default();
    }
    let cos_z = zenith.to_radians().cos().max(0.0);
    let dni = SOLAR_CONSTANT * 0.7f64.powf(air_mass(zenith).powf(0.678));
    let dhi = DIFFUSE_FRACTION * dni * cos_z;
    ClearSkyIrradiance {
        dni,
        dhi,
        ghi: dni * cos_z + dhi,
    }
}

pub fn clear_sky(loc: &SiteLocation, t: DateTime<Utc>) -> ClearSkyIrradiance {
    clear_sky_for_zenith(solar_position(loc, t).zenith)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use chrono::{Datelike, Duration};
    use proptest::prelude::*;

    /// Solar noon found by scanning the zenith minimum at one-minute resolution.
    fn solar_noon(loc: &SiteLocation, date: DateTime<Utc>) -> DateTime<Utc> {
        let approx = date + Duration::minutes((720.0 - 4.0 * loc.longitude) as i64);
        (-60..=60)
            .map(|m| approx + Duration::minutes(m))
            .min_by(|a, b| {
                solar_position(loc, *a)
                    .zenith
                    .partial_cmp(&solar_position(loc, *b).zenith)
                    .unwrap()
            })
            .unwrap()
    }

    #[test]
    fn equator_equinox_noon_is_overhead() {
        let loc = SiteLocation::new(0.0, 0.0, 0.0).unwrap();
        let noon = solar_noon(&loc, Utc.with_ymd_and_hms(2018, 3, 20, 0, 0, 0).unwrap());
        let p = solar_position(&loc, noon);
        assert!(p.zenith < 0.5, "zenith {}", p.zenith);
    }

    #[test]
    fn june_solstice_declination() {
        // Day 172 of 2018.
        let t = Utc.with_ymd_and_hms(2018, 6, 21, 12, 0, 0).unwrap();
        assert_eq!(t.ordinal(), 172);
        let p = solar_position(&SiteLocation::austin(), t);
        assert_abs_diff_eq!(p.declination, 23.45, epsilon = 0.05);
    }

    #[test]
    fn northern_noon_sun_is_due_south() {
        let loc = SiteLocation::austin();
        let noon = solar_noon(&loc, Utc.with_ymd_and_hms(2018, 12, 10, 0, 0, 0).unwrap());
        let p = solar_position(&loc, noon);
        assert_abs_diff_eq!(p.azimuth, 180.0, epsilon = 0.5);
        assert!(p.hour_angle.abs() < 0.3);
    }

    #[test]
    fn air_mass_examples() {
        assert_abs_diff_eq!(air_mass(0.0), 0.99971, epsilon = 1e-4);
        assert_abs_diff_eq!(air_mass(60.0), 1.99429, epsilon = 1e-4);
        assert!(air_mass(95.0).is_infinite());
    }

    #[test]
    fn clear_sky_examples() {
        assert_eq!(clear_sky_for_zenith(95.0), ClearSkyIrradiance::default());
        assert_eq!(clear_sky_for_zenith(90.0), ClearSkyIrradiance::default());
        let top = clear_sky_for_zenith(0.0);
        assert_abs_diff_eq!(top.dni, 947.1, epsilon = 0.1);
        assert_abs_diff_eq!(top.dhi, 94.7, epsilon = 0.1);
        assert_abs_diff_eq!(top.ghi, 1041.8, epsilon = 0.1);

        let z = (2.0f64 / 3.0).acos().to_degrees();
        let c = clear_sky_for_zenith(z);
        let cos_z = z.to_radians().cos();
        assert_abs_diff_eq!(c.ghi, c.dni * cos_z + c.dhi, epsilon = 1e-12);
    }

    #[test]
    fn night_has_no_irradiance() {
        let loc = SiteLocation::austin();
        // 06:00 UTC is local midnight in Austin.
        let t = Utc.with_ymd_and_hms(2018, 6, 15, 6, 0, 0).unwrap();
        let p = solar_position(&loc, t);
        assert!(p.is_night());
        assert_eq!(clear_sky(&loc, t), ClearSkyIrradiance::default());
    }

    proptest! {
        #[test]
        fn noon_zenith_matches_latitude_minus_declination(
            lat in -65.0f64..65.0,
            lon in -180.0f64..180.0,
            day in 0i64..365,
        ) {
            let loc = SiteLocation::new(lat, lon, 0.0).unwrap();
            let date = Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap() + Duration::days(day);
            let noon = solar_noon(&loc, date);
            let p = solar_position(&loc, noon);
            prop_assert!((p.zenith - (lat - p.declination).abs()).abs() < 1.0);
        }

        #[test]
        fn azimuth_mirrors_about_meridian(
            lat in -60.0f64..60.0,
            day in 0i64..365,
            offset in 30i64..240,
        ) {
            let loc = SiteLocation::new(lat, 10.0, 0.0).unwrap();
            let date = Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap() + Duration::days(day);
            let noon = solar_noon(&loc, date);
            let am = solar_position(&loc, noon - Duration::minutes(offset));
            let pm = solar_position(&loc, noon + Duration::minutes(offset));
            prop_assume!(am.is_up() && pm.is_up() && am.zenith > 3.0);
            // Mirror images satisfy az_am + az_pm = 360 (mod 360).
            let mirrored = (am.azimuth + pm.azimuth).rem_euclid(360.0);
            let err = mirrored.min(360.0 - mirrored);
            prop_assert!(err < 1.0, "am {} pm {}", am.azimuth, pm.azimuth);
        }

        #[test]
        fn dni_monotone_in_zenith(a in 0.0f64..89.99, b in 0.0f64..89.99) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(clear_sky_for_zenith(lo).dni >= clear_sky_for_zenith(hi).dni);
        }

        #[test]
        fn ghi_identity(z in 0.0f64..180.0) {
            let c = clear_sky_for_zenith(z);
            let cos_z = z.to_radians().cos().max(0.0);
            if z >= HORIZON_ZENITH {
                prop_assert_eq!(c, ClearSkyIrradiance::default());
            } else {
                prop_assert_eq!(c.ghi, c.dni * cos_z + c.dhi);
            }
        }
    }
}
