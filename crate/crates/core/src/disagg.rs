//! Alternating estimation of home load and mixture weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::geometry::solar_position;
use crate::load::{LoadFeatures, LoadModel};
use crate::mixture::{solve_weights_with_objective, ProxyMatrix, WeightVector};
use crate::timeseries::{SiteLocation, TimeSeries, Unit};

/// Residual growth factor that aborts the loop.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisaggConfig {
    pub max_iterations: usize,
    pub epsilon: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub forest: ForestConfig,
}

impl Default for DisaggConfig {
    fn default() -> Self {
        DisaggConfig {
            max_iterations: 100,
            epsilon: 1e-3,
            master_seed: 0,
            forest: ForestConfig::default(),
        }
    }
}

impl DisaggConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisaggResult {
    pub solar: TimeSeries,
    pub load: TimeSeries,
    pub weights: WeightVector,
    pub iterations: usize,
    pub weight_trajectory: Vec<WeightVector>,
    /// ‖Xw − s‖ after each weight solve.
    pub residual_trajectory: Vec<f64>,
    pub converged: bool,
}

/// Estimates solar and load for one customer.
pub fn disaggregate(
    y: &TimeSeries,
    x: &ProxyMatrix,
    w0: &WeightVector,
    features: &LoadFeatures,
    loc: &SiteLocation,
    cfg: &DisaggConfig,
) -> Result<DisaggResult> {
    cfg.validate()?;
    if !x.index().is_aligned_with(y) || !features.index().is_aligned_with(y) {
        return Err(Error::Misaligned);
    }
    if w0.len() != x.k() {
        return Err(Error::DimensionMismatch { expected: x.k(), actual: w0.len() });
    }

    let y_norm = y.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut w = w0.clone();
    let mut s = x.index().with_values(x.product(&w.weights)?)?;
    let mut trajectory = vec![w.clone()];
    let mut residuals = Vec::new();
    let mut reference: Option<f64> = None;
    let mut converged = false;

    for iter in 1..=cfg.max_iterations {
        let load_target = s.add(y)?;
        let (_, load) = LoadModel::fit_predict(features, &load_target, cfg.master_seed, &cfg.forest)?;
        let solar_target = load.sub(y)?;
        let (w_next, objective) = solve_weights_with_objective(x, &solar_target)?;
        s = x.index().with_values(x.product(&w_next.weights)?)?;

        let residual = objective.sqrt();
        residuals.push(residual);
        let base = *reference.get_or_insert(residual.max(1e-6 * y_norm));
        let change = w_next.max_abs_diff(&w);
        w = w_next;
        trajectory.push(w.clone());
        if residual > DIVERGENCE_FACTOR * base {
            return Err(Error::NonConvergence {
                iterations: iter,
                trajectory: trajectory.into_iter().map(|w| w.weights).collect(),
            });
        }
        log::debug!("iteration {iter}: weights {:?}, change {change:.3e}, residual {residual:.4}", w.weights);
        if change <= cfg.epsilon {
            converged = true;
            break;
        }
    }

    let solar_values: Vec<f64> = x
        .product(&w.weights)?
        .into_iter()
        .zip(y.timestamps())
        .map(|(v, t)| if solar_position(loc, t).is_up() { v.max(0.0) } else { 0.0 })
        .collect();
    let solar = y.with_values(solar_values)?.with_unit(Unit::Kw);
    let load = y.add(&solar)?.with_unit(Unit::Kw);
    Ok(DisaggResult {
        solar,
        load,
        iterations: trajectory.len() - 1,
        weights: w,
        weight_trajectory: trajectory,
        residual_trajectory: residuals,
        converged,
    })
}

/// Rounding slack, in units of machine epsilon, for `ℓ̂ − ŝ = y`: the sum
/// `y + ŝ` is rounded once, the check subtracts once more.
pub const IDENTITY_ULPS: f64 = 2.0;

/// Checks `ℓ̂ − ŝ = y`, `ŝ ≥ 0` and `ŝ = 0` while the sun is down.
pub fn verify_output(y: &TimeSeries, res: &DisaggResult, loc: &SiteLocation) -> std::result::Result<(), String> {
    if !res.solar.is_aligned_with(y) || !res.load.is_aligned_with(y) {
        return Err("outputs not aligned with the input".into());
    }
    for (i, ((&yv, &s), &l)) in y.values().iter().zip(res.solar.values()).zip(res.load.values()).enumerate() {
        if (l - s - yv).abs() > IDENTITY_ULPS * f64::EPSILON * l.abs().max(s.abs()).max(yv.abs()) {
            return Err(format!("identity violated at {i}: {l} != {yv} + {s}"));
        }
        if s < 0.0 {
            return Err(format!("negative solar at {i}: {s}"));
        }
        if s != 0.0 && !solar_position(loc, y.timestamp(i)).is_up() {
            return Err(format!("solar {s} at night interval {i}"));
        }
    }
    Ok(())
}
