//! Linear solar mixture: target solar ≈ Σ w_k · proxy_k with w ≥ 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnls::nnls;
use crate::timeseries::{TimeSeries, Unit};

/// Floor applied to initial weights so every proxy starts active.
pub const MIN_INIT_WEIGHT: f64 = 1e-6;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxyMatrix {
    columns: Vec<TimeSeries>,
    provenance: Vec<Provenance>,
}

impl ProxyMatrix {
    pub fn new(columns: Vec<TimeSeries>, provenance: Vec<Provenance>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::NoProxies);
        }
        if provenance.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: provenance.len(),
            });
        }
        for (k, c) in columns.iter().enumerate() {
            c.ensure_aligned(&columns[0])?;
            if !c.values().iter().any(|&v| v > 0.0) {
                return Err(Error::ZeroProxy { index: k });
            }
        }
        Ok(ProxyMatrix { columns, provenance })
    }

    pub fn columns(&self) -> &[TimeSeries] {
        &self.columns
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn index(&self) -> &TimeSeries {
        &self.columns[0]
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.columns.iter().map(|c| c.values()).collect()
    }

    /// `X·w` as raw values.
    pub fn product(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: w.len(),
            });
        }
        let mut out = vec![0.0; self.rows()];
        for (c, &wk) in self.columns.iter().zip(w) {
            for (o, v) in out.iter_mut().zip(c.values()) {
                *o += wk * v;
            }
        }
        Ok(out)
    }

    /// Restricts every column to `len` samples from `offset`.
    pub fn window(&self, offset: usize, len: usize) -> Result<ProxyMatrix> {
        let columns = self
            .columns
            .iter()
            .map(|c| c.window(offset, len))
            .collect::<Result<Vec<_>>>()?;
        ProxyMatrix::new(columns, self.provenance.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParams(format!("weight {i} is {}", weights[i])));
        }
        Ok(WeightVector { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_abs_diff(&self, other: &WeightVector) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Scalar least-squares fit of `m_c` by `w·m_p`, floored to stay positive.
pub fn init_weight(m_p: &TimeSeries, m_c: &TimeSeries) -> Result<f64> {
    init_weight_at(m_p, m_c, 0)
}

fn init_weight_at(m_p: &TimeSeries, m_c: &TimeSeries, index: usize) -> Result<f64> {
    m_p.ensure_aligned(m_c)?;
    let pp: f64 = m_p.values().iter().map(|v| v * v).sum();
    if pp == 0.0 {
        return Err(Error::ZeroProxy { index });
    }
    let pc: f64 = m_p.values().iter().zip(m_c.values()).map(|(p, c)| p * c).sum();
    Ok((pc / pp).max(MIN_INIT_WEIGHT))
}

/// Per-proxy initial weights, each divided by the number of proxies.
pub fn init_weights(max_gens: &[TimeSeries], m_c: &TimeSeries) -> Result<WeightVector> {
    if max_gens.is_empty() {
        return Err(Error::NoProxies);
    }
    let k = max_gens.len() as f64;
    let weights = max_gens
        .iter()
        .enumerate()
        .map(|(i, m)| init_weight_at(m, m_c, i).map(|w| w / k))
        .collect::<Result<Vec<_>>>()?;
    WeightVector::new(weights)
}

/// Non-negative least-squares mixture weights for `s`.
pub fn solve_weights(x: &ProxyMatrix, s: &TimeSeries) -> Result<WeightVector> {
    Ok(solve_weights_with_objective(x, s)?.0)
}

/// As [`solve_weights`], also returning ‖Xw − s‖².
pub fn solve_weights_with_objective(x: &ProxyMatrix, s: &TimeSeries) -> Result<(WeightVector, f64)> {
    if !x.index().is_aligned_with(s) {
        return Err(Error::Misaligned);
    }
    let sol = nnls(&x.slices(), s.values());
    Ok((WeightVector { weights: sol.x }, sol.objective))
}

/// ‖Xw − s‖².
pub fn objective(x: &ProxyMatrix, w: &WeightVector, s: &TimeSeries) -> Result<f64> {
    let fitted = x.product(&w.weights)?;
    if fitted.len() != s.len() {
        return Err(Error::Misaligned);
    }
    Ok(fitted.iter().zip(s.values()).map(|(f, v)| (f - v).powi(2)).sum())
}

pub fn predict_solar(x: &ProxyMatrix, w: &WeightVector) -> Result<TimeSeries> {
    let values = x.product(&w.weights)?;
    Ok(x.index().with_values(values)?.with_unit(Unit::Kw))
}
