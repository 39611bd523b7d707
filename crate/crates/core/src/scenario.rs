//! Synthetic neighbourhoods with known ground truth.
//!
//! A smoothed lognormal cloud field is shared by all homes (with a little
//! per-home jitter); the city weather feed only sees a coarse moving average
//! of it, so synthetic proxies miss the fine cloud structure that real
//! neighbours capture. Loads are functions of the four load features plus
//! noise.

use chrono::{DateTime, TimeZone, Timelike, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Hemisphere;
use crate::geometry::clear_sky_for_zenith;
use crate::geometry::solar_position;
use crate::load::build_features;
use crate::pv::{synthesize_proxy, PvParams, WeatherBundle};
use crate::seed;
use crate::timeseries::{SiteLocation, Step, TimeSeries, Unit};

pub const MIN_CLOUD: f64 = 0.15;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Mean and spread of the day-level log attenuation.
    pub cloud_day_log_mean: f64,
    pub cloud_day_log_sigma: f64,
    /// Spread of the intra-day log attenuation.
    pub cloud_log_sigma: f64,
    /// Correlation time of intra-day cloud fluctuations.
    pub cloud_tau_minutes: f64,
    /// Width of the moving average the city weather feed applies.
    pub feed_smoothing_minutes: f64,
    pub home_jitter_sigma: f64,
    pub temp_day_sigma: f64,
    pub temp_interval_sigma: f64,
    pub wind_sigma: f64,
    pub load_noise_sigma: f64,
    /// Amplitude (kW) of a slow random load component no feature explains.
    pub unrealizable: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            cloud_day_log_mean: -0.15,
            cloud_day_log_sigma: 0.35,
            cloud_log_sigma: 0.35,
            cloud_tau_minutes: 60.0,
            feed_smoothing_minutes: 180.0,
            home_jitter_sigma: 0.05,
            temp_day_sigma: 1.5,
            temp_interval_sigma: 0.3,
            wind_sigma: 0.5,
            load_noise_sigma: 0.1,
            unrealizable: 0.0,
        }
    }
}

impl NoiseConfig {
    /// Clear skies, deterministic weather and noiseless loads.
    pub fn zeroed() -> Self {
        NoiseConfig {
            cloud_day_log_mean: 0.0,
            cloud_day_log_sigma: 0.0,
            cloud_log_sigma: 0.0,
            home_jitter_sigma: 0.0,
            temp_day_sigma: 0.0,
            temp_interval_sigma: 0.0,
            wind_sigma: 0.0,
            load_noise_sigma: 0.0,
            unrealizable: 0.0,
            ..NoiseConfig::default()
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_homes: usize,
    pub days: usize,
    pub step_minutes: u32,
    pub location: SiteLocation,
    pub start: DateTime<Utc>,
    pub temp_mean: f64,
    pub temp_amplitude: f64,
    pub noise: NoiseConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            n_homes: 20,
            days: 30,
            step_minutes: 30,
            location: SiteLocation::austin(),
            start: Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap(),
            temp_mean: 28.0,
            temp_amplitude: 6.0,
            noise: NoiseConfig::default(),
        }
    }
}

/// Ground-truth load model of one home; evaluating it on the load features
/// reproduces the noiseless load.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub base: f64,
    pub morning_peak: f64,
    pub evening_peak: f64,
    pub cooling_slope: f64,
    pub cooling_setpoint: f64,
    pub daytime_weekday_drop: f64,
}

impl LoadProfile {
    pub fn eval(&self, c: f64, c_wmv: f64, h: f64, d: f64) -> f64 {
        let morning = self.morning_peak * (-(h - 7.0).powi(2) / 3.0).exp();
        let evening = self.evening_peak * (-(h - 19.5).powi(2) / 5.0).exp();
        let cooling = self.cooling_slope
            * (0.6 * (c - self.cooling_setpoint).max(0.0) + 0.4 * (c_wmv - self.cooling_setpoint).max(0.0));
        let away = if d > 0.5 && (9.0..17.0).contains(&h) { -self.daytime_weekday_drop } else { 0.0 };
        (self.base + morning + evening + cooling + away).max(0.05)
    }

    fn draw(rng: &mut ChaCha8Rng) -> Self {
        LoadProfile {
            base: rng.random_range(0.3..0.8),
            morning_peak: rng.random_range(0.3..1.2),
            evening_peak: rng.random_range(0.8..2.0),
            cooling_slope: rng.random_range(0.08..0.25),
            cooling_setpoint: rng.random_range(21.0..25.0),
            daytime_weekday_drop: rng.random_range(0.1..0.4),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Home {
    pub id: usize,
    pub params: PvParams,
    pub profile: LoadProfile,
    pub true_load: TimeSeries,
    pub true_solar: TimeSeries,
    pub net: TimeSeries,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioBundle {
    pub location: SiteLocation,
    pub weather: WeatherBundle,
    pub homes: Vec<Home>,
    pub seed: u64,
}

impl ScenarioBundle {
    pub fn len(&self) -> usize {
        self.homes[0].net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.homes.is_empty()
    }

    pub fn temperature(&self) -> &TimeSeries {
        self.weather.temp.as_ref().expect("scenario weather is complete")
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Unit-variance AR(1) sequence with the given lag-one correlation.
fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64) -> Vec<f64> {
    let innov = (1.0 - phi * phi).sqrt();
    let mut x = normal(rng);
    (0..n)
        .map(|_| {
            let v = x;
            x = phi * x + innov * normal(rng);
            v
        })
        .collect()
}

fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return values.to_vec();
    }
    let half = width / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn scaled_irradiance(index: &TimeSeries, loc: &SiteLocation, attenuation: &[f64], temp: &TimeSeries, wind: &TimeSeries) -> Result<WeatherBundle> {
    let mut dni = Vec::with_capacity(index.len());
    let mut dhi = Vec::with_capacity(index.len());
    let mut ghi = Vec::with_capacity(index.len());
    for (t, &k) in index.timestamps().zip(attenuation) {
        let z = solar_position(loc, t).zenith;
        let cs = clear_sky_for_zenith(z);
        let (n, d) = (cs.dni * k, cs.dhi * k);
        dni.push(n);
        dhi.push(d);
        ghi.push(n * z.to_radians().cos().max(0.0) + d);
    }
    Ok(WeatherBundle {
        temp: Some(temp.clone()),
        wind: Some(wind.clone()),
        dni: Some(index.with_values(dni)?.with_unit(Unit::WPerM2)),
        dhi: Some(index.with_values(dhi)?.with_unit(Unit::WPerM2)),
        ghi: Some(index.with_values(ghi)?.with_unit(Unit::WPerM2)),
    })
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<ScenarioBundle> {
    if cfg.n_homes < 2 {
        return Err(Error::Config(format!("need at least 2 homes, got {}", cfg.n_homes)));
    }
    if cfg.days < 1 {
        return Err(Error::Config("need at least 1 day".into()));
    }
    cfg.location.validate()?;
    let step = Step::from_minutes(cfg.step_minutes)?;
    let per_day = step.per_day();
    let n = cfg.days * per_day;
    let nz = &cfg.noise;
    let loc = cfg.location;
    let index = TimeSeries::new(cfg.start, step, vec![0.0; n], Unit::Dimensionless)?;
    let step_min = step.minutes() as f64;

    // Temperature: daily AR(1) level plus a diurnal cycle peaking at 15:00 local.
    let mut rng = seed::rng(seed::derive(cfg.seed, 1));
    let mut level = 0.0;
    let offset_h = loc.utc_offset;
    let mut temp = Vec::with_capacity(n);
    for day in 0..cfg.days {
        level = 0.7 * level + nz.temp_day_sigma * normal(&mut rng);
        for i in 0..per_day {
            let t = day * per_day + i;
            let utc_h = index.timestamp(t).num_seconds_from_midnight() as f64 / 3600.0;
            let local_h = (utc_h + offset_h).rem_euclid(24.0);
            let diurnal = cfg.temp_amplitude * (std::f64::consts::TAU * (local_h - 15.0) / 24.0).cos();
            temp.push(cfg.temp_mean + level + diurnal + nz.temp_interval_sigma * normal(&mut rng));
        }
    }
    let temp = index.with_values(temp)?.with_unit(Unit::DegC);

    let mut rng = seed::rng(seed::derive(cfg.seed, 2));
    let wind: Vec<f64> = (0..n).map(|_| (1.0 + nz.wind_sigma * normal(&mut rng)).max(0.0)).collect();
    let wind = index.with_values(wind)?.with_unit(Unit::MPerS);

    // Shared cloud field.
    let mut rng = seed::rng(seed::derive(cfg.seed, 3));
    let phi = (-step_min / nz.cloud_tau_minutes.max(1e-9)).exp();
    let day_means: Vec<f64> = (0..cfg.days)
        .map(|_| nz.cloud_day_log_mean + nz.cloud_day_log_sigma * normal(&mut rng))
        .collect();
    let fluct = ar1(&mut rng, n, phi);
    let log_field: Vec<f64> = (0..n).map(|t| day_means[t / per_day] + nz.cloud_log_sigma * fluct[t]).collect();
    let field: Vec<f64> = log_field.iter().map(|l| l.exp().clamp(MIN_CLOUD, 1.0)).collect();
    let feed_width = (nz.feed_smoothing_minutes / step_min).round().max(1.0) as usize;
    let feed_field: Vec<f64> = moving_average(&field, feed_width);
    let weather = scaled_irradiance(&index, &loc, &feed_field, &temp, &wind)?;

    let features = build_features(&temp, &loc);
    let cols = features.columns();
    let hemisphere = Hemisphere::of(&loc);
    let mut homes = Vec::with_capacity(cfg.n_homes);
    for id in 0..cfg.n_homes {
        let mut rng = seed::rng(seed::derive_path(cfg.seed, &[4, id as u64]));
        let tilt = rng.random_range(10.0..45.0);
        let orientation = (hemisphere.ideal_orientation() + rng.random_range(-60.0..60.0)).rem_euclid(360.0);
        let rating = rng.random_range(2.0..8.0);
        let params = PvParams::new(tilt, orientation, rating)?;
        let profile = LoadProfile::draw(&mut rng);

        let jitter = ar1(&mut rng, n, phi);
        let attenuation: Vec<f64> = log_field
            .iter()
            .zip(&jitter)
            .map(|(l, j)| (l + nz.home_jitter_sigma * j).exp().clamp(MIN_CLOUD, 1.0))
            .collect();
        let home_weather = scaled_irradiance(&index, &loc, &attenuation, &temp, &wind)?;
        let true_solar = synthesize_proxy(&params, &loc, &home_weather)?;

        let slow = ar1(&mut rng, n, (-step_min / 720.0).exp());
        let load: Vec<f64> = (0..n)
            .map(|t| {
                let clean = profile.eval(cols[0][t], cols[1][t], cols[2][t], cols[3][t]);
                let noisy = clean + nz.load_noise_sigma * normal(&mut rng) + nz.unrealizable * slow[t];
                noisy.max(0.05)
            })
            .collect();
        let true_load = index.with_values(load)?.with_unit(Unit::Kw);
        let net = true_load.sub(&true_solar)?.with_unit(Unit::Kw);
        homes.push(Home { id, params, profile, true_load, true_solar, net });
    }

    Ok(ScenarioBundle { location: loc, weather, homes, seed: cfg.seed })
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
