//! Closed-form delay and efficiency model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("gossip coefficient needs d >= 3, got {0}")]
    DegreeTooSmall(usize),
    #[error("invalid model parameter: {0}")]
    BadParam(String),
    #[error("q = {q} is beyond the model's range: delta_r * C_d * ln q = {reduction} >= Delta_1 = {delta_1}")]
    QTooLarge { q: u32, reduction: f64, delta_1: f64 },
}

/// Coefficient of `ln n` in the gossip broadcast-time bound on a random
/// d-regular graph: `1/ln(2(1-1/d)) - 1/(d ln(1-1/d))`.
pub fn c_d(d: usize) -> Result<f64, ModelError> {
    if d < 3 {
        return Err(ModelError::DegreeTooSmall(d));
    }
    let x = 1.0 - 1.0 / d as f64;
    Ok(1.0 / (2.0 * x).ln() - 1.0 / (d as f64 * x.ln()))
}

/// Parameters of the delay/efficiency model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub n: usize,
    /// Mean link delay of the whole network.
    pub delta: f64,
    /// Mean link delay inside lower-order sub-networks; defaults to `delta`.
    #[serde(default)]
    pub delta_r: Option<f64>,
    /// Block rate of the root chain.
    pub lambda_1: f64,
    #[serde(default)]
    pub beta: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: &str| Err(ModelError::BadParam(s.to_string()));
        if self.d < 3 {
            return Err(ModelError::DegreeTooSmall(self.d));
        }
        if self.n <= self.d {
            return bad("n must exceed d");
        }
        if !(self.delta > 0.0) || self.delta_r.is_some_and(|x| !(x > 0.0)) {
            return bad("delays must be positive");
        }
        if !(self.lambda_1 > 0.0) {
            return bad("lambda_1 must be positive");
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn delta_r(&self) -> f64 {
        self.delta_r.unwrap_or(self.delta)
    }

    pub fn delta_1(&self) -> Result<f64, ModelError> {
        delay_bound(self.delta, self.d, self.n)
    }
}

/// Broadcast-time bound `delta * C_d * ln(size)` for a sub-network of `size`
/// nodes.
pub fn delay_bound(delta: f64, d: usize, size: usize) -> Result<f64, ModelError> {
    if size < 2 {
        return Err(ModelError::BadParam("sub-network needs at least two nodes".into()));
    }
    Ok(delta * c_d(d)? * (size as f64).ln())
}

/// Fraction of work that ends up canonical; `beta` is the adversary's share
/// and the result is the honest efficiency.
pub fn efficiency(lambda: f64, delay: f64, beta: f64) -> f64 {
    (1.0 - beta) / (1.0 + (1.0 - beta) * lambda * delay)
}

/// Rate at which blocks join the canonical chain.
pub fn effective_rate(lambda: f64, delay: f64) -> f64 {
    lambda / (1.0 + lambda * delay)
}

/// Block rate that gives a chain with broadcast time `delay` the efficiency
/// `target` (inverse of [`efficiency`] at `beta = 0`).
pub fn rate_for_efficiency(target: f64, delay: f64) -> f64 {
    (1.0 / target - 1.0) / delay
}

/// Model prediction for one value of q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub q: u32,
    /// Broadcast-time bound of one order-r sub-network.
    pub delta_r_bound: f64,
    /// Block rate per order-r chain at equal efficiency.
    pub lambda_r: f64,
    /// Effective rate per order-r chain.
    pub lambda_r_star: f64,
    /// `q * lambda_r_star`.
    pub aggregate: f64,
    /// `aggregate(q) / (q * aggregate(1))`.
    pub ratio: f64,
}

/// Per-chain and aggregate effective rate of `q` equal sub-networks whose
/// efficiency is held at the root's.
pub fn scaling_curve(params: &ModelParams, qs: &[u32]) -> Result<Vec<ScalingPoint>, ModelError> {
    params.validate()?;
    let cd = c_d(params.d)?;
    let delta_1 = params.delta_1()?;
    let root_star = effective_rate(params.lambda_1, delta_1);
    let e1 = efficiency(params.lambda_1, delta_1, 0.0);
    qs.iter()
        .map(|&q| {
            if q == 0 {
                return Err(ModelError::BadParam("q must be at least 1".into()));
            }
            let reduction = params.delta_r() * cd * (q as f64).ln();
            let delta_r = delta_1 - reduction;
            if delta_r <= 0.0 {
                return Err(ModelError::QTooLarge { q, reduction, delta_1 });
            }
            // equal efficiency: lambda_r * delta_r = lambda_1 * delta_1
            let lambda_r = rate_for_efficiency(e1, delta_r);
            let lambda_r_star = params.lambda_1 * delta_1 / (delta_r * (1.0 + params.lambda_1 * delta_1));
            let aggregate = q as f64 * lambda_r_star;
            Ok(ScalingPoint {
                q,
                delta_r_bound: delta_r,
                lambda_r,
                lambda_r_star,
                aggregate,
                ratio: aggregate / (q as f64 * root_star),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_d_values() {
        // independent evaluation of the same expression with d = 8 spelled out
        let by_hand = 1.0 / (2.0f64 * 7.0 / 8.0).ln() - 1.0 / (8.0 * (7.0f64 / 8.0).ln());
        assert!((c_d(8).unwrap() - by_hand).abs() < 1e-12);
        assert!((c_d(8).unwrap() - 2.723).abs() < 5e-4);
        let limit = 1.0 / std::f64::consts::LN_2 + 1.0;
        assert!((c_d(1_000_000).unwrap() - limit).abs() < 1e-5);
        let c3 = c_d(3).unwrap();
        assert!(c3.is_finite() && c3 > 0.0);
        assert!(c_d(2).is_err());
    }

    #[test]
    fn c_d_decreases() {
        for d in 3..500 {
            assert!(c_d(d + 1).unwrap() < c_d(d).unwrap());
        }
    }

    #[test]
    fn bound_splits_by_log_q() {
        let full = delay_bound(0.1, 8, 1000).unwrap();
        let sub = delay_bound(0.1, 8, 250).unwrap();
        assert!((full - sub - 0.1 * c_d(8).unwrap() * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn efficiency_values() {
        assert_eq!(efficiency(1.0, 0.0, 0.0), 1.0);
        assert_eq!(efficiency(1.0, 1.0, 0.0), 0.5);
        // 0.7 / 1.07
        assert!((efficiency(0.1, 1.0, 0.3) - 0.654_205_6).abs() < 1e-6);
        for (l, d) in [(0.3, 2.0), (1.0, 0.1), (5.0, 0.7)] {
            assert!((effective_rate(l, d) - l * efficiency(l, d, 0.0)).abs() < 1e-12);
            assert!((rate_for_efficiency(efficiency(l, d, 0.0), d) - l).abs() < 1e-9);
        }
    }

    fn params() -> ModelParams {
        ModelParams { d: 8, n: 1000, delta: 0.1, delta_r: None, lambda_1: 0.5, beta: 0.0 }
    }

    #[test]
    fn scaling_is_superlinear() {
        let pts = scaling_curve(&params(), &[1, 2, 4, 8]).unwrap();
        assert!((pts[0].ratio - 1.0).abs() < 1e-12);
        for w in pts.windows(2) {
            assert!(w[1].ratio > w[0].ratio);
        }
        assert!(pts[2].aggregate > 4.0 * pts[0].aggregate);
    }

    #[test]
    fn scaling_reports_model_boundary() {
        let r = scaling_curve(&params(), &[2000]);
        assert!(matches!(r, Err(ModelError::QTooLarge { .. })));
    }
}
