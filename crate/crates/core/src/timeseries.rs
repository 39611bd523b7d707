//! Uniformly sampled time series and the site description shared by every
//! other module.
//!
//! All timestamps are UTC. The site's `utc_offset` is only consulted when a
//! local clock is needed (hour-of-day features).

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest run of consecutive missing intervals that ingestion repairs by
/// linear interpolation.
pub const MAX_REPAIRABLE_GAP: usize = 4;

const ALLOWED_STEPS: [u32; 4] = [1, 15, 30, 60];

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "kw")]
    Kw,
    #[serde(rename = "degc")]
    DegC,
    #[serde(rename = "w_per_m2")]
    WPerM2,
    #[serde(rename = "m_per_s")]
    MPerS,
    #[serde(rename = "dimensionless")]
    Dimensionless,
}

impl Unit {
    /// Canonical CSV header token.
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Kw => "kw",
            Unit::DegC => "degc",
            Unit::WPerM2 => "w_per_m2",
            Unit::MPerS => "m_per_s",
            Unit::Dimensionless => "dimensionless",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kw" => Ok(Unit::Kw),
            "degc" | "c" | "temp_c" => Ok(Unit::DegC),
            "w_per_m2" | "w/m2" | "w_m2" => Ok(Unit::WPerM2),
            "m_per_s" | "m/s" | "wind_ms" => Ok(Unit::MPerS),
            "dimensionless" | "1" => Ok(Unit::Dimensionless),
            other => Err(Error::UnitUnknown(other.to_string())),
        }
    }
}

/// Sampling interval in minutes.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Step(u32);

impl Step {
    pub fn from_minutes(minutes: u32) -> Result<Self> {
        if ALLOWED_STEPS.contains(&minutes) {
            Ok(Step(minutes))
        } else {
            Err(Error::InvalidStep(minutes))
        }
    }

    pub fn minutes(self) -> u32 {
        self.0
    }

    pub fn duration(self) -> Duration {
        Duration::minutes(self.0 as i64)
    }

    /// Number of intervals in 24 hours.
    pub fn per_day(self) -> usize {
        (24 * 60 / self.0) as usize
    }
}

impl TryFrom<u32> for Step {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        Step::from_minutes(value)
    }
}

impl From<Step> for u32 {
    fn from(s: Step) -> u32 {
        s.0
    }
}

/// Approximate location of a site (city-level coordinates).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteLocation {
    pub latitude: f64,
    pub longitude: f64,
    /// Hours east of UTC of the local standard clock.
    pub utc_offset: f64,
}

impl SiteLocation {
    pub fn new(latitude: f64, longitude: f64, utc_offset: f64) -> Result<Self> {
        let loc = SiteLocation {
            latitude,
            longitude,
            utc_offset,
        };
        loc.validate()?;
        Ok(loc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::InvalidLocation(format!("latitude {}", self.latitude)));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::InvalidLocation(format!("longitude {}", self.longitude)));
        }
        if !(-12.0..=14.0).contains(&self.utc_offset) {
            return Err(Error::InvalidLocation(format!("utc_offset {}", self.utc_offset)));
        }
        Ok(())
    }

    /// Austin, Texas.
    pub fn austin() -> Self {
        SiteLocation {
            latitude: 30.292432,
            longitude: -97.699662,
            utc_offset: -6.0,
        }
    }

    /// Sydney, Australia.
    pub fn sydney() -> Self {
        SiteLocation {
            latitude: -33.888575,
            longitude: 151.187349,
            utc_offset: 10.0,
        }
    }

    pub fn is_northern(&self) -> bool {
        self.latitude >= 0.0
    }

    pub fn local_offset(&self) -> FixedOffset {
        let secs = (self.utc_offset * 3600.0).round() as i32;
        FixedOffset::east_opt(secs).expect("utc_offset validated to [-12, 14] hours")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    start: DateTime<Utc>,
    step: Step,
    values: Vec<f64>,
    unit: Unit,
}

impl TimeSeries {
    pub fn new(start: DateTime<Utc>, step: Step, values: Vec<f64>, unit: Unit) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(TimeSeries {
            start,
            step,
            values,
            unit,
        })
    }

    /// Builds a series from timestamped samples. Samples are sorted by time,
    /// the step is taken as the smallest spacing, and gaps of up to
    /// [`MAX_REPAIRABLE_GAP`] intervals (missing rows or `None` values) are
    /// filled by linear interpolation. Samples are `(line, timestamp, value)`
    /// so errors can point back at the source.
    pub fn from_samples(
        mut samples: Vec<(usize, DateTime<Utc>, Option<f64>)>,
        unit: Unit,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySeries);
        }
        samples.sort_by_key(|s| s.1);
        for pair in samples.windows(2) {
            if pair[0].1 == pair[1].1 {
                return Err(Error::Parse {
                    line: pair[1].0.max(pair[0].0),
                    msg: format!("duplicate timestamp {}", pair[1].1.format("%Y-%m-%dT%H:%M:%SZ")),
                });
            }
        }
        let step = if samples.len() == 1 {
            // A single sample carries no spacing information; use the
            // coarsest supported step.
            Step(60)
        } else {
            let min_gap = samples
                .windows(2)
                .map(|p| (p[1].1 - p[0].1).num_seconds())
                .min()
                .expect("at least two samples");
            if min_gap % 60 != 0 {
                return Err(Error::NonUniformStep { line: samples[1].0 });
            }
            Step::from_minutes((min_gap / 60) as u32)?
        };
        let step_secs = step.minutes() as i64 * 60;
        let start = samples[0].1;
        let span = (samples[samples.len() - 1].1 - start).num_seconds();
        let len = (span / step_secs) as usize + 1;

        let mut slots: Vec<Option<f64>> = vec![None; len];
        for (line, ts, value) in &samples {
            let offset = (*ts - start).num_seconds();
            if offset % step_secs != 0 {
                return Err(Error::NonUniformStep { line: *line });
            }
            slots[(offset / step_secs) as usize] = value.filter(|v| v.is_finite());
        }
        let values = repair_gaps(&slots, start, step)?;
        TimeSeries::new(start, step, values, unit)
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn step(&self) -> Step {
        self.step
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::minutes(self.step.minutes() as i64 * index as i64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.len() - 1)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = DateTime<Utc>> + '_ {
        (0..self.len()).map(move |i| self.timestamp(i))
    }

    pub fn is_aligned_with(&self, other: &TimeSeries) -> bool {
        self.start == other.start && self.step == other.step && self.len() == other.len()
    }

    pub fn ensure_aligned(&self, other: &TimeSeries) -> Result<()> {
        if self.is_aligned_with(other) {
            Ok(())
        } else {
            Err(Error::Misaligned)
        }
    }

    /// Same index and unit, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<TimeSeries> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: values.len(),
            });
        }
        TimeSeries::new(self.start, self.step, values, self.unit)
    }

    pub fn with_unit(mut self, unit: Unit) -> TimeSeries {
        self.unit = unit;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<TimeSeries> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise `self - other` on aligned series.
    pub fn sub(&self, other: &TimeSeries) -> Result<TimeSeries> {
        self.ensure_aligned(other)?;
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    /// Elementwise `self + other` on aligned series.
    pub fn add(&self, other: &TimeSeries) -> Result<TimeSeries> {
        self.ensure_aligned(other)?;
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, factor: f64) -> Result<TimeSeries> {
        self.map(|v| v * factor)
    }

    /// `len` samples starting at `offset`.
    pub fn window(&self, offset: usize, len: usize) -> Result<TimeSeries> {
        if len == 0 || offset + len > self.len() {
            return Err(Error::LengthTooLong {
                length: offset + len,
                available: self.len(),
            });
        }
        TimeSeries::new(
            self.timestamp(offset),
            self.step,
            self.values[offset..offset + len].to_vec(),
            self.unit,
        )
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Index of `ts` on this series' grid, if it falls on a sample.
    pub fn index_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        let offset = (ts - self.start).num_seconds();
        let step = self.step.minutes() as i64 * 60;
        if offset < 0 || offset % step != 0 {
            return None;
        }
        let idx = (offset / step) as usize;
        (idx < self.len()).then_some(idx)
    }
}

fn repair_gaps(slots: &[Option<f64>], start: DateTime<Utc>, step: Step) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(slots.len());
    let mut i = 0;
    while i < slots.len() {
        match slots[i] {
            Some(v) => {
                values.push(v);
                i += 1;
            }
            None => {
                let gap_start = i;
                while i < slots.len() && slots[i].is_none() {
                    i += 1;
                }
                let missing = i - gap_start;
                let first_missing =
                    start + Duration::minutes(step.minutes() as i64 * gap_start as i64);
                // Gaps touching either end cannot be interpolated.
                if missing > MAX_REPAIRABLE_GAP || gap_start == 0 || i == slots.len() {
                    return Err(Error::GapTooLong {
                        first_missing,
                        missing,
                    });
                }
                let left = values[gap_start - 1];
                let right = slots[i].expect("gap ends on a present sample");
                let span = (missing + 1) as f64;
                for k in 1..=missing {
                    values.push(left + (right - left) * k as f64 / span);
                }
            }
        }
    }
    Ok(values)
}

/// Trims every series to the common time window.
///
/// All inputs must share one step and one sampling grid.
pub fn align(series: &[TimeSeries]) -> Result<Vec<TimeSeries>> {
    let first = series.first().ok_or(Error::EmptyIntersection)?;
    for s in &series[1..] {
        if s.step != first.step {
            return Err(Error::StepMismatch(first.step.minutes(), s.step.minutes()));
        }
    }
    let start = series.iter().map(|s| s.start).max().expect("non-empty");
    let end = series.iter().map(|s| s.end()).min().expect("non-empty");
    if start > end {
        return Err(Error::EmptyIntersection);
    }
    let mut out = Vec::with_capacity(series.len());
    for s in series {
        // Offsets that fall between samples mean the grids never coincide.
        let lo = s.index_of(start).ok_or(Error::EmptyIntersection)?;
        let hi = s.index_of(end).ok_or(Error::EmptyIntersection)?;
        out.push(s.window(lo, hi - lo + 1)?);
    }
    Ok(out)
}

/// Linear upsampling to a finer step that divides the current one.
pub fn upsample_linear(s: &TimeSeries, target: Step) -> Result<TimeSeries> {
    let step = s.step.minutes();
    if target.minutes() > step || !step.is_multiple_of(target.minutes()) {
        return Err(Error::NotDivisible {
            step,
            target: target.minutes(),
        });
    }
    let factor = (step / target.minutes()) as usize;
    let v = s.values();
    let mut out = Vec::with_capacity((v.len() - 1) * factor + 1);
    for pair in v.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        out.push(a);
        for k in 1..factor {
            out.push(a + (b - a) * k as f64 / factor as f64);
        }
    }
    out.push(v[v.len() - 1]);
    TimeSeries::new(s.start, target, out, s.unit)
}

/// The `[v]^+` operator: negative elements become zero.
pub fn truncate_nonneg(v: &TimeSeries) -> TimeSeries {
    TimeSeries {
        values: v.values.iter().map(|&x| x.max(0.0)).collect(),
        ..v.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap()
    }

    fn series(step: u32, values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(t0(), Step::from_minutes(step).unwrap(), values, Unit::Kw).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        let step = Step::from_minutes(30).unwrap();
        assert!(matches!(TimeSeries::new(t0(), step, vec![], Unit::Kw), Err(Error::EmptySeries)));
        assert!(matches!(
            TimeSeries::new(t0(), step, vec![1.0, f64::NAN], Unit::Kw),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(Step::from_minutes(7), Err(Error::InvalidStep(7))));
    }

    #[test]
    fn align_identical_is_identity() {
        let a = series(30, vec![1.0, 2.0, 3.0]);
        let out = align(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(out, vec![a.clone(), a]);
    }

    #[test]
    fn align_trims_to_intersection() {
        let step = Step::from_minutes(60).unwrap();
        let day = 24usize;
        // A: days 1-10, B: days 5-15 (hourly).
        let a = TimeSeries::new(t0(), step, (0..10 * day).map(|i| i as f64).collect(), Unit::Kw)
            .unwrap();
        let b_start = t0() + Duration::days(4);
        let b = TimeSeries::new(b_start, step, (0..11 * day).map(|i| -(i as f64)).collect(), Unit::Kw)
            .unwrap();
        let out = align(&[a, b]).unwrap();
        assert_eq!(out[0].start(), b_start);
        assert_eq!(out[0].len(), 6 * day);
        assert!(out[0].is_aligned_with(&out[1]));
        assert_eq!(out[0].values()[0], (4 * day) as f64);
        assert_eq!(out[1].values()[0], 0.0);
        assert_eq!(out[0].end(), t0() + Duration::days(10) - Duration::hours(1));
    }

    #[test]
    fn align_errors() {
        let a = series(15, vec![1.0; 4]);
        let b = series(30, vec![1.0; 4]);
        assert!(matches!(align(&[a, b]), Err(Error::StepMismatch(15, 30))));

        let step = Step::from_minutes(30).unwrap();
        let late = TimeSeries::new(t0() + Duration::days(5), step, vec![1.0; 4], Unit::Kw).unwrap();
        assert!(matches!(align(&[series(30, vec![1.0; 4]), late]), Err(Error::EmptyIntersection)));
    }

    #[test]
    fn upsample_examples() {
        let quarter = Step::from_minutes(15).unwrap();
        let up = |v: Vec<f64>| upsample_linear(&series(30, v), quarter).unwrap().into_values();
        assert_eq!(up(vec![0.0, 2.0]), vec![0.0, 1.0, 2.0]);
        assert_eq!(up(vec![1.0, 1.0, 1.0]), vec![1.0; 5]);
        assert_eq!(up(vec![0.0, 3.0, 0.0]), vec![0.0, 1.5, 3.0, 1.5, 0.0]);

        let s = series(15, vec![0.0, 1.0]);
        assert!(matches!(
            upsample_linear(&s, Step::from_minutes(30).unwrap()),
            Err(Error::NotDivisible { .. })
        ));
        assert!(upsample_linear(&series(60, vec![0.0, 1.0]), Step::from_minutes(1).unwrap()).is_ok());
    }

    #[test]
    fn truncate_examples() {
        let t = |v: Vec<f64>| truncate_nonneg(&series(30, v)).into_values();
        assert_eq!(t(vec![1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(t(vec![-1.0, 0.0, 1.0]), vec![0.0, 0.0, 1.0]);
        assert_eq!(t(vec![-0.2, 1.7, 0.0]), vec![0.0, 1.7, 0.0]);
    }

    #[test]
    fn ingestion_repairs_short_gaps_only() {
        let step = Duration::minutes(30);
        let mk = |idx: &[usize]| -> Vec<(usize, DateTime<Utc>, Option<f64>)> {
            idx.iter()
                .map(|&i| (i + 2, t0() + step * i as i32, Some(i as f64)))
                .collect()
        };
        // Four missing intervals (1..=4) are repaired.
        let s = TimeSeries::from_samples(mk(&[0, 5, 6]), Unit::Kw).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.step().minutes(), 30);

        // Five missing intervals abort and name the first one.
        match TimeSeries::from_samples(mk(&[0, 6, 7]), Unit::Kw) {
            Err(Error::GapTooLong { first_missing, missing }) => {
                assert_eq!(missing, 5);
                assert_eq!(first_missing, t0() + step);
            }
            other => panic!("unexpected {other:?}"),
        }

        // Explicitly missing values count as gaps too.
        let mut samples = mk(&[0, 1, 2]);
        samples[1].2 = None;
        let s = TimeSeries::from_samples(samples, Unit::Kw).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn local_offset_rounds_to_seconds() {
        let loc = SiteLocation::new(10.0, 20.0, 5.5).unwrap();
        assert_eq!(loc.local_offset().local_minus_utc(), 5 * 3600 + 1800);
        assert!(SiteLocation::new(91.0, 0.0, 0.0).is_err());
        assert!(SiteLocation::new(0.0, 0.0, 15.0).is_err());
    }

    proptest! {
        #[test]
        fn truncate_is_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..50)) {
            let s = series(30, v);
            let once = truncate_nonneg(&s);
            prop_assert_eq!(truncate_nonneg(&once), once);
        }

        #[test]
        fn upsample_then_decimate_roundtrips(
            v in prop::collection::vec(-100.0f64..100.0, 1..40),
            coarse in prop::sample::select(vec![15u32, 30, 60]),
        ) {
            let s = series(coarse, v);
            let fine = Step::from_minutes(if coarse == 60 { 15 } else { 1 }).unwrap();
            let up = upsample_linear(&s, fine).unwrap();
            let factor = (coarse / fine.minutes()) as usize;
            prop_assert_eq!(up.len(), (s.len() - 1) * factor + 1);
            let back: Vec<f64> = up.values().iter().step_by(factor).copied().collect();
            prop_assert_eq!(back.as_slice(), s.values());
        }

        #[test]
        fn align_never_fabricates(offset in 0usize..20, la in 1usize..30, lb in 1usize..30) {
            let step = Step::from_minutes(30).unwrap();
            let a = TimeSeries::new(t0(), step, (0..la).map(|i| i as f64).collect(), Unit::Kw).unwrap();
            let b_start = t0() + Duration::minutes(30 * offset as i64);
            let b = TimeSeries::new(b_start, step, (0..lb).map(|i| 1000.0 + i as f64).collect(), Unit::Kw).unwrap();
            match align(&[a.clone(), b.clone()]) {
                Ok(out) => {
                    prop_assert!(out[0].is_aligned_with(&out[1]));
                    for (ts, v) in out[0].timestamps().zip(out[0].values()) {
                        prop_assert_eq!(a.values()[a.index_of(ts).unwrap()], *v);
                    }
                    for (ts, v) in out[1].timestamps().zip(out[1].values()) {
                        prop_assert_eq!(b.values()[b.index_of(ts).unwrap()], *v);
                    }
                }
                Err(e) => {
                    prop_assert!(matches!(e, Error::EmptyIntersection));
                    prop_assert!(offset >= la);
                }
            }
        }
    }
}
