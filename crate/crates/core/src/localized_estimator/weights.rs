//! Local kernel weights around a target time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `0.75 (1 - u^2)` on `|u| <= 1`.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// `c_h * n^(-2/9)`.
pub fn default_bandwidth(n: usize, c_h: f64) -> f64 {
    c_h * (n as f64).powf(-2.0 / 9.0)
}

/// Diagonal of `R_{t0}`, `R_h(t_i - t0) = R((t_i - t0) / h) / h`, stacked over
/// `experiments` copies of the time vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalWeights {
    pub t0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl LocalWeights {
    pub fn uniform(len: usize) -> Self {
        Self {
            t0: f64::NAN,
            h: f64::INFINITY,
            values: vec![1.0; len],
        }
    }

    /// Indices with strictly positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i] > 0.0).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn local_weights(t0: f64, h: f64, times: &[f64], experiments: usize) -> Result<LocalWeights> {
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {h}")));
    }
    let one: Vec<f64> = times.iter().map(|t| epanechnikov((t - t0) / h) / h).collect();
    if one.iter().all(|v| *v == 0.0) {
        return Err(Error::EmptyWindow { t0 });
    }
    let values = (0..experiments.max(1)).flat_map(|_| one.iter().copied()).collect();
    Ok(LocalWeights { t0, h, values })
}

/// Gaussian weights `exp(-(t - t0)^2 / (2 h^2))` (peak 1); strictly positive.
pub fn gaussian_surrogate(t0: f64, h: f64, times: &[f64], experiments: usize) -> Vec<f64> {
    let one: Vec<f64> = times
        .iter()
        .map(|t| (-(t - t0).powi(2) / (2.0 * h * h)).exp().max(f64::MIN_POSITIVE.sqrt()))
        .collect();
    (0..experiments.max(1)).flat_map(|_| one.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mass() {
        let n = 20000;
        let dx = 2.0 / n as f64;
        let mass: f64 = (0..n).map(|i| epanechnikov(-1.0 + (i as f64 + 0.5) * dx) * dx).sum();
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn window_and_empty() {
        let t = [0.0, 0.1, 0.2, 0.9];
        let w = local_weights(0.1, 0.15, &t, 1).unwrap();
        assert_eq!(w.support(), vec![0, 1, 2]);
        assert!((w.values[1] - 0.75 / 0.15).abs() < 1e-12);
        assert!(matches!(local_weights(0.5, 0.1, &t, 1), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn bandwidth_default() {
        assert!((default_bandwidth(40, 0.5) - 0.5 * 40f64.powf(-2.0 / 9.0)).abs() < 1e-15);
    }
}
