//! Home-load regressor: the four explanatory features and a forest fitted on
//! them.

use chrono::{Datelike, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, ForestConfig};
use crate::timeseries::{SiteLocation, TimeSeries, Unit};

pub const FEATURE_NAMES: [&str; 4] = ["c", "c_wmv", "h", "d"];

#[derive(Clone, Debug, PartialEq)]
pub struct LoadFeatures {
    index: TimeSeries,
    schema: Vec<String>,
    /// Column-major, one vector per schema entry.
    columns: Vec<Vec<f64>>,
}

impl LoadFeatures {
    pub fn from_columns(index: &TimeSeries, schema: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::DimensionMismatch { expected: schema.len(), actual: columns.len() });
        }
        for c in &columns {
            if c.len() != index.len() {
                return Err(Error::DimensionMismatch { expected: index.len(), actual: c.len() });
            }
        }
        Ok(LoadFeatures { index: index.clone(), schema, columns })
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.schema.iter().position(|s| s == name).map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.index.len()
    }

    /// Series carrying the row timestamps.
    pub fn index(&self) -> &TimeSeries {
        &self.index
    }

    pub fn window(&self, offset: usize, len: usize) -> Result<LoadFeatures> {
        Ok(LoadFeatures {
            index: self.index.window(offset, len)?,
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c[offset..offset + len].to_vec()).collect(),
        })
    }
}

/// EWMA with α = 2/(N+1), N intervals per day, seeded with the first value.
pub fn ewma_daily(values: &[f64], per_day: usize) -> Vec<f64> {
    let alpha = 2.0 / (per_day as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = match values.first() {
        Some(&v) => v,
        None => return out,
    };
    for &v in values {
        acc = alpha * v + (1.0 - alpha) * acc;
        out.push(acc);
    }
    out
}

pub fn build_features(temp: &TimeSeries, loc: &SiteLocation) -> LoadFeatures {
    let offset = loc.local_offset();
    let mut hour = Vec::with_capacity(temp.len());
    let mut weekday = Vec::with_capacity(temp.len());
    for t in temp.timestamps() {
        let local = t.with_timezone(&offset);
        hour.push(local.hour() as f64);
        weekday.push(match local.weekday() {
            Weekday::Sat | Weekday::Sun => 0.0,
            _ => 1.0,
        });
    }
    let c = temp.values().to_vec();
    let c_wmv = ewma_daily(&c, temp.step().per_day());
    LoadFeatures {
        index: temp.clone(),
        schema: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        columns: vec![c, c_wmv, hour, weekday],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadModel {
    pub schema: Vec<String>,
    pub forest: Forest,
}

impl LoadModel {
    pub fn fit(features: &LoadFeatures, target: &TimeSeries, seed: u64, cfg: &ForestConfig) -> Result<Self> {
        if features.rows() != target.len() {
            return Err(Error::Misaligned);
        }
        Ok(LoadModel {
            schema: features.schema.clone(),
            forest: Forest::fit(&features.columns, target.values(), seed, cfg)?,
        })
    }

    /// Fits and predicts on the training rows in one pass.
    pub fn fit_predict(features: &LoadFeatures, target: &TimeSeries, seed: u64, cfg: &ForestConfig) -> Result<(Self, TimeSeries)> {
        if features.rows() != target.len() {
            return Err(Error::Misaligned);
        }
        let (forest, pred) = Forest::fit_predict(&features.columns, target.values(), seed, cfg)?;
        let model = LoadModel { schema: features.schema.clone(), forest };
        Ok((model, features.index.with_values(pred)?.with_unit(Unit::Kw)))
    }

    pub fn predict(&self, features: &LoadFeatures) -> Result<TimeSeries> {
        if features.schema != self.schema {
            return Err(Error::SchemaMismatch {
                expected: self.schema.clone(),
                actual: features.schema.clone(),
            });
        }
        let values = self.forest.predict(&features.columns)?;
        Ok(features.index.with_values(values)?.with_unit(Unit::Kw))
    }
}
