//! Gaussian multiplier bootstrap for the sup of the normalized process.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Sup statistics in replicate order.
    pub sups: Vec<f64>,
    sorted: Vec<f64>,
}

impl BootstrapResult {
    pub fn from_sups(sups: Vec<f64>) -> Self {
        let mut sorted = sups.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Self { sups, sorted }
    }

    pub fn replicates(&self) -> usize {
        self.sups.len()
    }

    /// Empirical `(1 - alpha)` quantile (order statistic `ceil((1 - alpha) B)`).
    pub fn quantile(&self, alpha: f64) -> f64 {
        let b = self.sorted.len();
        let k = ((1.0 - alpha) * b as f64).ceil() as usize;
        self.sorted[k.clamp(1, b) - 1]
    }

    /// `(#{sup >= stat} + 1) / (B + 1)`.
    pub fn p_value(&self, stat: f64) -> f64 {
        let b = self.sorted.len();
        let below = self.sorted.partition_point(|v| *v < stat);
        ((b - below) as f64 + 1.0) / (b as f64 + 1.0)
    }
}

/// Draws `sup_t |sqrt(h/n) sum_i xi_i sigma_j psi_i(t) / sigma_n(t)|` for
/// `b` replicates with `xi_i ~ N(0, 1)`. Grid points with `sigma_n = 0` are skipped.
pub fn multiplier_bootstrap(
    scores: &[Vec<f64>],
    sigma_n: &[f64],
    sigma_j: f64,
    h: f64,
    b: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if scores.len() != sigma_n.len() {
        return Err(Error::ShapeMismatch("one sigma_n per grid point".into()));
    }
    if b == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one replicate".into()));
    }
    let active: Vec<usize> = (0..scores.len()).filter(|&g| sigma_n[g] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::NoInformation("every grid point has sigma_n = 0".into()));
    }
    let n = scores[active[0]].len();
    let scale = (h / n as f64).sqrt() * sigma_j;
    let mut a = DMatrix::zeros(active.len(), n);
    for (r, &g) in active.iter().enumerate() {
        if scores[g].len() != n {
            return Err(Error::ShapeMismatch("scores differ in length".into()));
        }
        for i in 0..n {
            a[(r, i)] = scale * scores[g][i] / sigma_n[g];
        }
    }
    let sups: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let xi = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            (&a * xi).amax()
        })
        .collect();
    Ok(BootstrapResult::from_sups(sups))
}
