//! Base load, approximate target solar and PV deployment estimation.

use std::collections::BTreeSet;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::solar_position;
use crate::pv::{ClearSkyTrack, PvParams};
use crate::timeseries::{truncate_nonneg, SiteLocation, TimeSeries};

/// Minimum number of days with some generation before the deployment fit
/// is attempted.
pub const MIN_GENERATION_DAYS: usize = 5;

pub const GRID_STEP: f64 = 5.0;
pub const MAX_TILT: f64 = 60.0;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseLoad {
    pub value: f64,
    pub night_interval_count: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    North,
    South,
}

impl Hemisphere {
    pub fn of(loc: &SiteLocation) -> Self {
        if loc.is_northern() {
            Hemisphere::North
        } else {
            Hemisphere::South
        }
    }

    /// Candidate orientations in ascending order.
    pub fn orientations(self) -> Vec<f64> {
        let steps = (360.0 / GRID_STEP) as usize;
        (0..steps)
            .map(|i| i as f64 * GRID_STEP)
            .filter(|&o| match self {
                Hemisphere::North => (90.0..=270.0).contains(&o),
                Hemisphere::South => o <= 90.0 || o >= 270.0,
            })
            .collect()
    }

    /// Orientation facing the equator.
    pub fn ideal_orientation(self) -> f64 {
        match self {
            Hemisphere::North => 180.0,
            Hemisphere::South => 0.0,
        }
    }
}

pub fn tilts() -> Vec<f64> {
    (0..=(MAX_TILT / GRID_STEP) as usize)
        .map(|i| i as f64 * GRID_STEP)
        .collect()
}

fn night_values(y: &TimeSeries, loc: &SiteLocation) -> Vec<f64> {
    y.timestamps()
        .zip(y.values())
        .filter(|(t, _)| solar_position(loc, *t).is_night())
        .map(|(_, &v)| v)
        .collect()
}

/// Minimum of net load over night intervals.
pub fn estimate_base_load(y: &TimeSeries, loc: &SiteLocation) -> Result<BaseLoad> {
    let night = night_values(y, loc);
    if night.is_empty() {
        return Err(Error::NoNightIntervals);
    }
    Ok(BaseLoad {
        value: night.iter().copied().fold(f64::INFINITY, f64::min),
        night_interval_count: night.len(),
    })
}

/// Nearest-rank percentile `p` in (0, 50] of night-time net load; a robust
/// alternative to the plain minimum when meters glitch.
pub fn estimate_base_load_percentile(y: &TimeSeries, loc: &SiteLocation, p: f64) -> Result<BaseLoad> {
    if !(p > 0.0 && p <= 50.0) {
        return Err(Error::Config(format!("base-load percentile {p} outside (0, 50]")));
    }
    let mut night = night_values(y, loc);
    if night.is_empty() {
        return Err(Error::NoNightIntervals);
    }
    night.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * night.len() as f64).ceil().max(1.0) as usize;
    Ok(BaseLoad {
        value: night[rank - 1],
        night_interval_count: night.len(),
    })
}

/// `[base − y]⁺`: exports below the base load are attributed to solar.
pub fn approx_target_solar(y: &TimeSeries, base: &BaseLoad) -> TimeSeries {
    let diff = y.map(|v| base.value - v).expect("finite inputs stay finite");
    truncate_nonneg(&diff)
}

fn slot_of(t: chrono::DateTime<chrono::Utc>, step_minutes: u32) -> usize {
    ((t.hour() * 60 + t.minute()) / step_minutes) as usize
}

/// Per-time-of-day maximum across days.
pub fn daily_envelope(series: &TimeSeries) -> Vec<f64> {
    envelope_of(series, series.values())
}

fn envelope_of(index: &TimeSeries, values: &[f64]) -> Vec<f64> {
    let step = index.step().minutes();
    let mut env = vec![0.0f64; index.step().per_day()];
    let mut seen = vec![false; env.len()];
    for (t, &v) in index.timestamps().zip(values) {
        let s = slot_of(t, step);
        if !seen[s] || v > env[s] {
            env[s] = v;
            seen[s] = true;
        }
    }
    env
}

fn generation_days(gen: &TimeSeries) -> usize {
    gen.timestamps()
        .zip(gen.values())
        .filter(|(_, &v)| v > 0.0)
        .map(|(t, _)| t.date_naive().num_days_from_ce())
        .collect::<BTreeSet<_>>()
        .len()
}

/// Grid search over tilt and orientation with a closed-form DC rating per
/// candidate, matching clear-sky potential to the daily upper envelope of
/// the observed generation.
pub fn fit_pv_params(
    gen: &TimeSeries,
    loc: &SiteLocation,
    ambient: &TimeSeries,
    hemisphere: Hemisphere,
) -> Result<PvParams> {
    gen.ensure_aligned(ambient)?;
    let target = daily_envelope(gen);
    if target.iter().all(|&v| v <= 0.0) {
        return Err(Error::DegenerateGeneration);
    }
    let days = generation_days(gen);
    if days < MIN_GENERATION_DAYS {
        return Err(Error::InsufficientData(format!(
            "{days} days with generation, need {MIN_GENERATION_DAYS}"
        )));
    }

    let track = ClearSkyTrack::new(loc, ambient);
    let mut best: Option<(f64, PvParams)> = None;
    for orientation in hemisphere.orientations() {
        for tilt in tilts() {
            let unit = PvParams::new(tilt, orientation, 1.0)?;
            let model = envelope_of(gen, &track.generation_values(&unit));
            let mm: f64 = model.iter().map(|m| m * m).sum();
            if mm <= 0.0 {
                continue;
            }
            let em: f64 = target.iter().zip(&model).map(|(e, m)| e * m).sum();
            let scale = em / mm;
            if scale <= 0.0 {
                continue;
            }
            let sse: f64 = target
                .iter()
                .zip(&model)
                .map(|(e, m)| (e - scale * m).powi(2))
                .sum();
            // Strict improvement beyond round-off keeps the earliest
            // (lowest orientation, then lowest tilt) candidate on ties.
            let better = match &best {
                None => true,
                Some((b, _)) => sse < b - 1e-12 * b.abs().max(f64::MIN_POSITIVE),
            };
            if better {
                best = Some((sse, unit.with_rating(scale)));
            }
        }
    }
    best.map(|(_, p)| p).ok_or(Error::DegenerateGeneration)
}
