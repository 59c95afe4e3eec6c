//! Simultaneous confidence band for the centered effect curve.

use serde::{Deserialize, Serialize};

use super::bootstrap::BootstrapResult;
use super::debias::DebiasedCurve;
use crate::error::{Error, Result};
use crate::localized_estimator::fit::interp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub alpha: f64,
    pub critical_value: f64,
    pub replicates: usize,
    pub grid: Vec<f64>,
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl ConfidenceBand {
    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().zip(&self.half_width).map(|(c, h)| c - h).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().zip(&self.half_width).map(|(c, h)| c + h).collect()
    }

    /// Band with center and width divided by `scale` (standardized to original time units).
    pub fn rescaled(&self, scale: f64) -> Self {
        let mut b = self.clone();
        b.center.iter_mut().for_each(|v| *v /= scale);
        b.half_width.iter_mut().for_each(|v| *v /= scale);
        b
    }

    /// Whether `truth` (on the same grid) lies inside the band at every point.
    pub fn covers(&self, truth: &[f64]) -> bool {
        truth
            .iter()
            .zip(self.center.iter().zip(&self.half_width))
            .all(|(t, (c, h))| (t - c).abs() <= *h)
    }

    /// `int 2 * half_width(t0) dt0` over the grid span with `points` evenly spaced evaluations.
    pub fn area(&self, points: usize) -> f64 {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        let points = points.max(1);
        let span = hi - lo;
        if span <= 0.0 {
            return 0.0;
        }
        let dx = span / points as f64;
        (0..points)
            .map(|i| 2.0 * interp(&self.grid, &self.half_width, lo + (i as f64 + 0.5) * dx) * dx)
            .sum()
    }
}

/// `center +- c sigma_n(t0) / sqrt(n h)`.
pub fn confidence_band(curve: &DebiasedCurve, boot: &BootstrapResult, alpha: f64, h: f64) -> Result<ConfidenceBand> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let c = boot.quantile(alpha);
    let denom = (curve.n_total as f64 * h).sqrt();
    let half_width = curve.sigma_n().iter().map(|s| c * s / denom).collect();
    Ok(ConfidenceBand {
        alpha,
        critical_value: c,
        replicates: boot.replicates(),
        grid: curve.grid.clone(),
        center: curve.centered.clone(),
        half_width,
    })
}
