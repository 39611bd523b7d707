//! Physical PV performance model: isotropic-sky transposition, Sandia
//! open-rack cell temperature and the PVWatts DC power equation.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clear_sky_for_zenith, solar_position, SolarAngles};
use crate::timeseries::{SiteLocation, TimeSeries, Unit};

pub const DEFAULT_GAMMA: f64 = -0.0047;
pub const DEFAULT_E_REF: f64 = 1000.0;
pub const DEFAULT_T_REF: f64 = 25.0;
pub const DEFAULT_ALBEDO: f64 = 0.2;

/// Sandia open-rack glass/polymer coefficients.
const SANDIA_A: f64 = -3.56;
const SANDIA_B: f64 = -0.075;
const SANDIA_DELTA_T: f64 = 3.0;

/// Wind speed assumed when computing clear-sky potential generation.
pub const MAX_GEN_WIND: f64 = 1.0;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvParams {
    /// Degrees from horizontal.
    pub tilt: f64,
    /// Surface azimuth, degrees clockwise from north (180 faces south).
    pub orientation: f64,
    /// DC rating in kW.
    pub dc_rating: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_e_ref")]
    pub e_ref: f64,
    #[serde(default = "default_t_ref")]
    pub t_ref: f64,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_e_ref() -> f64 {
    DEFAULT_E_REF
}
fn default_t_ref() -> f64 {
    DEFAULT_T_REF
}

impl PvParams {
    pub fn new(tilt: f64, orientation: f64, dc_rating: f64) -> Result<Self> {
        let p = PvParams {
            tilt,
            orientation,
            dc_rating,
            gamma: DEFAULT_GAMMA,
            e_ref: DEFAULT_E_REF,
            t_ref: DEFAULT_T_REF,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=90.0).contains(&self.tilt) {
            return Err(Error::InvalidParams(format!("tilt {}", self.tilt)));
        }
        if !(0.0..360.0).contains(&self.orientation) {
            return Err(Error::InvalidParams(format!("orientation {}", self.orientation)));
        }
        if !(self.dc_rating > 0.0 && self.dc_rating.is_finite()) {
            return Err(Error::InvalidParams(format!("dc_rating {}", self.dc_rating)));
        }
        if !(self.e_ref > 0.0) {
            return Err(Error::InvalidParams(format!("e_ref {}", self.e_ref)));
        }
        Ok(())
    }

    pub fn with_rating(mut self, dc_rating: f64) -> Self {
        self.dc_rating = dc_rating;
        self
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub ambient_temp: f64,
    pub wind_speed: f64,
    pub dni: f64,
    pub dhi: f64,
    pub ghi: f64,
}

/// Transmitted plane-of-array irradiance (W/m2).
pub fn poa_irradiance(w: &WeatherRecord, sun: &SolarAngles, p: &PvParams, albedo: f64) -> f64 {
    let tilt = p.tilt.to_radians();
    let zen = sun.zenith.to_radians();
    let cos_aoi = zen.cos() * tilt.cos()
        + zen.sin() * tilt.sin() * (sun.azimuth - p.orientation).to_radians().cos();
    let beam = if sun.is_up() { w.dni * cos_aoi.max(0.0) } else { 0.0 };
    let sky = w.dhi * (1.0 + tilt.cos()) / 2.0;
    let ground = w.ghi * albedo * (1.0 - tilt.cos()) / 2.0;
    (beam + sky + ground).max(0.0)
}

pub fn cell_temperature(poa: f64, ambient: f64, wind: f64) -> f64 {
    let module = poa * (SANDIA_A + SANDIA_B * wind).exp() + ambient;
    module + poa / 1000.0 * SANDIA_DELTA_T
}

/// DC output in kW, never negative.
pub fn pv_power(i_tr: f64, t_cell: f64, p: &PvParams) -> f64 {
    (i_tr / p.e_ref * p.dc_rating * (1.0 + p.gamma * (t_cell - p.t_ref))).max(0.0)
}

fn power_at(w: &WeatherRecord, sun: &SolarAngles, p: &PvParams) -> f64 {
    if !sun.is_up() {
        return 0.0;
    }
    let poa = poa_irradiance(w, sun, p, DEFAULT_ALBEDO);
    pv_power(poa, cell_temperature(poa, w.ambient_temp, w.wind_speed), p)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Channel {
    Temp,
    Wind,
    Dni,
    Dhi,
    Ghi,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Channel::Temp, Channel::Wind, Channel::Dni, Channel::Dhi, Channel::Ghi];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Temp => "temp_c",
            Channel::Wind => "wind_ms",
            Channel::Dni => "dni",
            Channel::Dhi => "dhi",
            Channel::Ghi => "ghi",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            Channel::Temp => Unit::DegC,
            Channel::Wind => Unit::MPerS,
            _ => Unit::WPerM2,
        }
    }
}

/// City-level weather feed. Channels may be absent; consumers ask for what
/// they need and get [`Error::MissingChannel`] otherwise.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeatherBundle {
    pub temp: Option<TimeSeries>,
    pub wind: Option<TimeSeries>,
    pub dni: Option<TimeSeries>,
    pub dhi: Option<TimeSeries>,
    pub ghi: Option<TimeSeries>,
}

impl WeatherBundle {
    pub fn channel(&self, c: Channel) -> Result<&TimeSeries> {
        let slot = match c {
            Channel::Temp => &self.temp,
            Channel::Wind => &self.wind,
            Channel::Dni => &self.dni,
            Channel::Dhi => &self.dhi,
            Channel::Ghi => &self.ghi,
        };
        slot.as_ref().ok_or(Error::MissingChannel(c.name()))
    }

    pub fn set(&mut self, c: Channel, series: TimeSeries) {
        let slot = match c {
            Channel::Temp => &mut self.temp,
            Channel::Wind => &mut self.wind,
            Channel::Dni => &mut self.dni,
            Channel::Dhi => &mut self.dhi,
            Channel::Ghi => &mut self.ghi,
        };
        *slot = Some(series);
    }

    /// Every channel present and aligned; returns the temperature series as
    /// the index reference.
    pub fn require_all(&self) -> Result<&TimeSeries> {
        let reference = self.channel(Channel::Temp)?;
        for c in Channel::ALL {
            self.channel(c)?.ensure_aligned(reference)?;
        }
        Ok(reference)
    }

    pub fn record(&self, index: usize) -> Result<WeatherRecord> {
        Ok(WeatherRecord {
            ambient_temp: self.channel(Channel::Temp)?.values()[index],
            wind_speed: self.channel(Channel::Wind)?.values()[index],
            dni: self.channel(Channel::Dni)?.values()[index],
            dhi: self.channel(Channel::Dhi)?.values()[index],
            ghi: self.channel(Channel::Ghi)?.values()[index],
        })
    }

    /// Restricts every present channel to `len` samples from `offset`.
    pub fn window(&self, offset: usize, len: usize) -> Result<WeatherBundle> {
        let cut = |s: &Option<TimeSeries>| s.as_ref().map(|s| s.window(offset, len)).transpose();
        Ok(WeatherBundle {
            temp: cut(&self.temp)?,
            wind: cut(&self.wind)?,
            dni: cut(&self.dni)?,
            dhi: cut(&self.dhi)?,
            ghi: cut(&self.ghi)?,
        })
    }
}

/// Generation of a PV system driven by measured weather.
pub fn synthesize_proxy(p: &PvParams, loc: &SiteLocation, weather: &WeatherBundle) -> Result<TimeSeries> {
    let index = weather.require_all()?;
    let mut out = Vec::with_capacity(index.len());
    for (i, t) in index.timestamps().enumerate() {
        let sun = solar_position(loc, t);
        out.push(power_at(&weather.record(i)?, &sun, p));
    }
    TimeSeries::new(index.start(), index.step(), out, Unit::Kw)
}

/// Per-interval sun position, clear-sky irradiance and ambient temperature,
/// precomputed once so many candidate systems can be evaluated cheaply.
#[derive(Clone, Debug)]
pub struct ClearSkyTrack {
    index: TimeSeries,
    samples: Vec<(SolarAngles, WeatherRecord)>,
}

impl ClearSkyTrack {
    pub fn new(loc: &SiteLocation, ambient: &TimeSeries) -> Self {
        let samples = ambient
            .timestamps()
            .zip(ambient.values())
            .map(|(t, &temp)| {
                let sun = solar_position(loc, t);
                let cs = clear_sky_for_zenith(sun.zenith);
                let rec = WeatherRecord {
                    ambient_temp: temp,
                    wind_speed: MAX_GEN_WIND,
                    dni: cs.dni,
                    dhi: cs.dhi,
                    ghi: cs.ghi,
                };
                (sun, rec)
            })
            .collect();
        ClearSkyTrack {
            index: ambient.clone(),
            samples,
        }
    }

    pub fn timestamps(&self) -> impl Iterator<Item = DateTime<Utc>> + '_ {
        self.index.timestamps()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn generation_values(&self, p: &PvParams) -> Vec<f64> {
        self.samples.iter().map(|(sun, rec)| power_at(rec, sun, p)).collect()
    }

    pub fn generation(&self, p: &PvParams) -> TimeSeries {
        self.index
            .with_values(self.generation_values(p))
            .expect("same length as index")
            .with_unit(Unit::Kw)
    }
}

/// Clear-sky potential generation of a system.
pub fn max_generation(p: &PvParams, loc: &SiteLocation, ambient: &TimeSeries) -> TimeSeries {
    ClearSkyTrack::new(loc, ambient).generation(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HORIZON_ZENITH;
    use crate::timeseries::Step;
    use approx::assert_abs_diff_eq;
    use chrono::{Duration, TimeZone, Timelike};
    use proptest::prelude::*;

    fn sun(zenith: f64, azimuth: f64) -> SolarAngles {
        SolarAngles {
            zenith,
            azimuth,
            declination: 0.0,
            hour_angle: 0.0,
        }
    }

    fn weather(dni: f64, dhi: f64, ghi: f64) -> WeatherRecord {
        WeatherRecord {
            ambient_temp: 25.0,
            wind_speed: 1.0,
            dni,
            dhi,
            ghi,
        }
    }

    pub(crate) fn clear_sky_weather(loc: &SiteLocation, start: DateTime<Utc>, step: Step, n: usize) -> WeatherBundle {
        let temp = TimeSeries::new(start, step, vec![25.0; n], Unit::DegC).unwrap();
        let mut dni = Vec::new();
        let mut dhi = Vec::new();
        let mut ghi = Vec::new();
        for t in temp.timestamps() {
            let cs = crate::geometry::clear_sky(loc, t);
            dni.push(cs.dni);
            dhi.push(cs.dhi);
            ghi.push(cs.ghi);
        }
        WeatherBundle {
            wind: Some(temp.with_values(vec![MAX_GEN_WIND; n]).unwrap().with_unit(Unit::MPerS)),
            dni: Some(temp.with_values(dni).unwrap().with_unit(Unit::WPerM2)),
            dhi: Some(temp.with_values(dhi).unwrap().with_unit(Unit::WPerM2)),
            ghi: Some(temp.with_values(ghi).unwrap().with_unit(Unit::WPerM2)),
            temp: Some(temp),
        }
    }

    #[test]
    fn poa_examples() {
        let p = PvParams::new(30.0, 180.0, 3.0).unwrap();
        assert_eq!(poa_irradiance(&weather(0.0, 0.0, 0.0), &sun(40.0, 150.0), &p, 0.2), 0.0);

        let flat = PvParams::new(0.0, 180.0, 3.0).unwrap();
        let z: f64 = 50.0;
        let dni = 700.0;
        let dhi = 90.0;
        let ghi = dni * z.to_radians().cos() + dhi;
        let poa = poa_irradiance(&weather(dni, dhi, ghi), &sun(z, 120.0), &flat, 0.0);
        assert_abs_diff_eq!(poa, ghi, epsilon = 1e-9);

        // Sun normal to a 30 degree south-facing panel.
        let poa = poa_irradiance(&weather(800.0, 100.0, 600.0), &sun(30.0, 180.0), &p, 0.2);
        let expected = 800.0
            + 100.0 * (1.0 + 30f64.to_radians().cos()) / 2.0
            + 600.0 * 0.2 * (1.0 - 30f64.to_radians().cos()) / 2.0;
        assert_abs_diff_eq!(poa, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(poa, 901.34, epsilon = 0.01);
    }

    #[test]
    fn cell_temperature_examples() {
        assert_eq!(cell_temperature(0.0, 17.5, 3.0), 17.5);
        let t = cell_temperature(1000.0, 25.0, 0.0);
        assert_abs_diff_eq!(t, 25.0 + 1000.0 * (-3.56f64).exp() + 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t, 56.44, epsilon = 0.01);
        assert!(cell_temperature(800.0, 20.0, 2.0) < cell_temperature(800.0, 20.0, 1.0));
    }

    #[test]
    fn pv_power_examples() {
        let p = PvParams::new(30.0, 180.0, 3.0).unwrap();
        assert_eq!(pv_power(1000.0, 25.0, &p), 3.0);
        assert_eq!(pv_power(0.0, 40.0, &p), 0.0);
        assert_abs_diff_eq!(pv_power(500.0, 35.0, &p), 1.5 * (1.0 - 0.047), epsilon = 1e-12);
        assert_abs_diff_eq!(pv_power(500.0, 35.0, &p), 1.4295, epsilon = 1e-12);
        // Extreme temperatures would drive the equation negative.
        assert_eq!(pv_power(10.0, 300.0, &p), 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(PvParams::new(91.0, 180.0, 3.0).is_err());
        assert!(PvParams::new(30.0, 360.0, 3.0).is_err());
        assert!(PvParams::new(30.0, 180.0, 0.0).is_err());
        let json = r#"{"tilt": 20, "orientation": 90, "dc_rating": 4.5}"#;
        let p: PvParams = serde_json::from_str(json).unwrap();
        assert_eq!(p.gamma, DEFAULT_GAMMA);
        assert_eq!(p.e_ref, DEFAULT_E_REF);
    }

    #[test]
    fn missing_channel_is_named() {
        let loc = SiteLocation::austin();
        let start = Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap();
        let mut w = clear_sky_weather(&loc, start, Step::from_minutes(30).unwrap(), 48);
        w.dhi = None;
        let p = PvParams::new(30.0, 180.0, 3.0).unwrap();
        match synthesize_proxy(&p, &loc, &w) {
            Err(Error::MissingChannel(name)) => assert_eq!(name, "dhi"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_irradiance_gives_zero_generation() {
        let loc = SiteLocation::austin();
        let start = Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap();
        let mut w = clear_sky_weather(&loc, start, Step::from_minutes(30).unwrap(), 96);
        for c in [Channel::Dni, Channel::Dhi, Channel::Ghi] {
            let zero = w.channel(c).unwrap().map(|_| 0.0).unwrap();
            w.set(c, zero);
        }
        let p = PvParams::new(30.0, 180.0, 3.0).unwrap();
        let g = synthesize_proxy(&p, &loc, &w).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_rating_doubles_output() {
        let loc = SiteLocation::austin();
        let start = Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap();
        let w = clear_sky_weather(&loc, start, Step::from_minutes(30).unwrap(), 96);
        let p = PvParams::new(25.0, 200.0, 3.0).unwrap();
        let a = synthesize_proxy(&p, &loc, &w).unwrap();
        let b = synthesize_proxy(&p.with_rating(6.0), &loc, &w).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_abs_diff_eq!(2.0 * x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn south_facing_peak_at_solar_noon() {
        // Table 1 SP1 for Austin: south, tilt 30.3, 3 kW; 15-minute data.
        let loc = SiteLocation::austin();
        let step = Step::from_minutes(15).unwrap();
        let start = Utc.with_ymd_and_hms(2018, 6, 15, 0, 0, 0).unwrap();
        let w = clear_sky_weather(&loc, start, step, 96);
        let p = PvParams::new(30.3, 180.0, 3.0).unwrap();
        let g = synthesize_proxy(&p, &loc, &w).unwrap();
        let (peak, _) = g
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        // Solar noon: the interval where the hour angle changes sign.
        let noon = (0..g.len() - 1)
            .find(|&i| {
                solar_position(&loc, g.timestamp(i)).hour_angle <= 0.0
                    && solar_position(&loc, g.timestamp(i + 1)).hour_angle > 0.0
            })
            .unwrap();
        assert!((peak as i64 - noon as i64).abs() <= 1, "peak {peak} noon {noon}");
        assert!(g.timestamp(peak).hour() >= 18 && g.timestamp(peak).hour() <= 19);
    }

    #[test]
    fn max_generation_is_zero_at_night_and_ignores_measured_irradiance() {
        let loc = SiteLocation::austin();
        let step = Step::from_minutes(30).unwrap();
        let start = Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap();
        let ambient = TimeSeries::new(start, step, vec![28.0; 48], Unit::DegC).unwrap();
        let p = PvParams::new(20.0, 160.0, 4.0).unwrap();
        let m = max_generation(&p, &loc, &ambient);
        for (t, v) in m.timestamps().zip(m.values()) {
            if solar_position(&loc, t).zenith >= HORIZON_ZENITH {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(m.values().iter().any(|&v| v > 1.0));
    }

    #[test]
    fn east_west_daily_energy_symmetric() {
        let loc = SiteLocation::austin();
        let step = Step::from_minutes(15).unwrap();
        for (month, day) in [(3, 10), (6, 15), (9, 20), (12, 5)] {
            let start = Utc.with_ymd_and_hms(2018, month, day, 0, 0, 0).unwrap();
            let w = clear_sky_weather(&loc, start, step, 96 * 2);
            let east: f64 = synthesize_proxy(&PvParams::new(30.0, 90.0, 3.0).unwrap(), &loc, &w)
                .unwrap()
                .values()
                .iter()
                .sum();
            let west: f64 = synthesize_proxy(&PvParams::new(30.0, 270.0, 3.0).unwrap(), &loc, &w)
                .unwrap()
                .values()
                .iter()
                .sum();
            assert!((east - west).abs() / east.max(west) < 0.05, "{month}: {east} vs {west}");
        }
    }

    proptest! {
        #[test]
        fn flat_panel_without_albedo_sees_ghi(
            zenith in 0.0f64..89.9,
            azimuth in 0.0f64..360.0,
            dni in 0.0f64..1000.0,
            dhi in 0.0f64..300.0,
        ) {
            let ghi = dni * zenith.to_radians().cos() + dhi;
            let p = PvParams::new(0.0, 180.0, 1.0).unwrap();
            let poa = poa_irradiance(&weather(dni, dhi, ghi), &sun(zenith, azimuth), &p, 0.0);
            prop_assert!((poa - ghi).abs() <= 1e-9 * ghi.max(1.0));
        }

        #[test]
        fn power_linear_in_rating_affine_in_temperature(
            i_tr in 1.0f64..1200.0,
            t1 in -10.0f64..60.0,
            t2 in -10.0f64..60.0,
            rating in 0.5f64..10.0,
        ) {
            let p = PvParams::new(20.0, 180.0, rating).unwrap();
            let unit = PvParams::new(20.0, 180.0, 1.0).unwrap();
            prop_assert!((pv_power(i_tr, t1, &p) - rating * pv_power(i_tr, t1, &unit)).abs() < 1e-9);
            let slope = (pv_power(i_tr, t2, &p) - pv_power(i_tr, t1, &p)) / (t2 - t1);
            prop_assume!((t2 - t1).abs() > 1e-3);
            prop_assert!((slope - i_tr / 1000.0 * rating * DEFAULT_GAMMA).abs() < 1e-6);
            prop_assert!(slope < 0.0);
        }

        #[test]
        fn max_generation_dominates_dimmed_weather(
            tilt in 0.0f64..60.0,
            orientation in 0.0f64..359.0,
            dims in prop::collection::vec(0.0f64..=1.0, 48),
        ) {
            let loc = SiteLocation::austin();
            let step = Step::from_minutes(30).unwrap();
            let start = Utc.with_ymd_and_hms(2018, 4, 2, 0, 0, 0).unwrap();
            let mut w = clear_sky_weather(&loc, start, step, 48);
            for c in [Channel::Dni, Channel::Dhi, Channel::Ghi] {
                let s = w.channel(c).unwrap();
                let dimmed: Vec<f64> = s.values().iter().zip(&dims).map(|(v, d)| v * d).collect();
                w.set(c, s.with_values(dimmed).unwrap());
            }
            let p = PvParams::new(tilt, orientation, 3.0).unwrap();
            let measured = synthesize_proxy(&p, &loc, &w).unwrap();
            let potential = max_generation(&p, &loc, w.channel(Channel::Temp).unwrap());
            for (m, c) in measured.values().iter().zip(potential.values()) {
                prop_assert!(*m <= *c + 1e-12);
            }
        }

        #[test]
        fn proxy_nonnegative_and_dark_at_night(
            tilt in 0.0f64..90.0,
            orientation in 0.0f64..359.0,
            day in 0i64..365,
        ) {
            let loc = SiteLocation::sydney();
            let step = Step::from_minutes(60).unwrap();
            let start = Utc.with_ymd_and_hms(2013, 1, 1, 0, 0, 0).unwrap() + Duration::days(day);
            let w = clear_sky_weather(&loc, start, step, 24);
            let g = synthesize_proxy(&PvParams::new(tilt, orientation, 2.0).unwrap(), &loc, &w).unwrap();
            for (t, v) in g.timestamps().zip(g.values()) {
                prop_assert!(*v >= 0.0);
                if solar_position(&loc, t).zenith >= HORIZON_ZENITH {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }
    }
}
