//! Per-video training loss: squared-error regression on fragment targets plus
//! a weighted penalty on the distance between the two cluster centers.
//!
//! The distance penalty is capped-linear for normal videos (`min(alpha, d)`,
//! pulling their clusters together) and inverse for anomalous ones (`1/d`,
//! pushing them apart).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::VideoLabel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the clustering term.
    pub lambda: f64,
    /// Cap on the normal-video distance penalty.
    pub alpha: f64,
    /// Lower clamp on the distance before inverting it.
    pub d_floor: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            alpha: 1.0,
            d_floor: 1e-3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        if !(finite(self.lambda) && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(finite(self.alpha) && self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(finite(self.d_floor) && self.d_floor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "d_floor must be > 0, got {}",
                self.d_floor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub regression: f64,
    /// `None` when the clustering term is switched off.
    pub clustering: Option<f64>,
    pub lambda: f64,
    pub total: f64,
    /// Distance actually fed to the loss (after the floor clamp for
    /// anomalous videos).
    pub d_used: f64,
}

/// Mean squared error over a video's fragments and its gradient with respect
/// to the scores.
pub fn regression_loss(targets: &[f64], scores: &[f64]) -> Result<(f64, Vec<f64>)> {
    if targets.len() != scores.len() || targets.is_empty() {
        return Err(Error::Shape(format!(
            "{} targets for {} scores",
            targets.len(),
            scores.len()
        )));
    }
    let m = targets.len() as f64;
    let loss = targets
        .iter()
        .zip(scores)
        .map(|(y, s)| (y - s) * (y - s))
        .sum::<f64>()
        / m;
    let grad = targets
        .iter()
        .zip(scores)
        .map(|(y, s)| 2.0 * (s - y) / m)
        .collect();
    Ok((loss, grad))
}

/// Clustering distance loss and its derivative with respect to `d`.
///
/// Kinks at `d = alpha` and `d = d_floor` take derivative 0.
pub fn clustering_loss(d: f64, label: VideoLabel, weights: &LossWeights) -> (f64, f64) {
    debug_assert!(d >= 0.0);
    match label {
        VideoLabel::Normal => {
            if d < weights.alpha {
                (d, 1.0)
            } else {
                (weights.alpha, 0.0)
            }
        }
        VideoLabel::Anomalous => {
            let clamped = d.max(weights.d_floor);
            let deriv = if d > weights.d_floor {
                -1.0 / (clamped * clamped)
            } else {
                0.0
            };
            (1.0 / clamped, deriv)
        }
    }
}

pub fn total_loss(regression: f64, clustering: f64, lambda: f64) -> f64 {
    regression + lambda * clustering
}
