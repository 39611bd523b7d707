use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

fn check(truth: &TimeSeries, pred: &TimeSeries) -> Result<()> {
    if truth.len() != pred.len() || truth.start() != pred.start() || truth.step() != pred.step() {
        return Err(Error::Misaligned);
    }
    Ok(())
}

pub fn rmse_values(truth: &[f64], pred: &[f64]) -> f64 {
    let sse: f64 = truth.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    (sse / truth.len() as f64).sqrt()
}

pub fn rmse(truth: &TimeSeries, pred: &TimeSeries) -> Result<f64> {
    check(truth, pred)?;
    Ok(rmse_values(truth.values(), pred.values()))
}

/// RMSE normalized by the mean of the truth over every interval, nights
/// included.
pub fn nrmse(truth: &TimeSeries, pred: &TimeSeries) -> Result<f64> {
    ErrorStats::compute(truth, pred)?.nrmse()
}

/// RMSE together with the normalizing mean, so the normalized figure is
/// always derived rather than stored independently.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub rmse: f64,
    pub truth_mean: f64,
}

impl ErrorStats {
    pub fn compute(truth: &TimeSeries, pred: &TimeSeries) -> Result<Self> {
        check(truth, pred)?;
        Ok(Self::from_values(truth.values(), pred.values()))
    }

    pub fn from_values(truth: &[f64], pred: &[f64]) -> Self {
        ErrorStats {
            rmse: rmse_values(truth, pred),
            truth_mean: truth.iter().sum::<f64>() / truth.len() as f64,
        }
    }

    pub fn nrmse(&self) -> Result<f64> {
        if !(self.truth_mean > 0.0) {
            return Err(Error::ZeroMeanTruth);
        }
        Ok(self.rmse / self.truth_mean)
    }
}

/// Box-plot style summary: whiskers reach the most extreme observations
/// within 1.5 IQR of the quartiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Distribution {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q1 = quantile(&v, 0.25);
        let q3 = quantile(&v, 0.75);
        let iqr = q3 - q1;
        let whisker_low = v.iter().copied().find(|&x| x >= q1 - 1.5 * iqr).unwrap_or(v[0]);
        let whisker_high = v.iter().rev().copied().find(|&x| x <= q3 + 1.5 * iqr).unwrap_or(v[v.len() - 1]);
        Some(Distribution {
            n: v.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: quantile(&v, 0.5),
            q1,
            q3,
            whisker_low,
            whisker_high,
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}
