//! De-biasing, bootstrap calibration, bands, tests and network recovery.

pub mod band;
pub mod bootstrap;
pub mod debias;
pub mod testing;
pub mod variance;

pub use band::{confidence_band, ConfidenceBand};
pub use bootstrap::{multiplier_bootstrap, BootstrapResult};
pub use debias::{debias, DebiasedCurve, ScoreRule};
pub use testing::{bh_select, test_pair, PairTest};
pub use variance::{sigma_j_for_fit, sigma_j_hat, sigma_n_hat};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::localized_estimator::fit::{fit_pair, fit_pair_tuned, reference_points, tune_response, FitConfig, LocalizedFit, TuningRecord};
use crate::localized_estimator::Design;
use crate::seeds::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub alpha: f64,
    pub bootstrap: usize,
    pub rule: ScoreRule,
    /// Reference times for the noise-level estimate.
    pub sigma_refs: usize,
    pub fdr_q: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bootstrap: 500,
            rule: ScoreRule::default(),
            sigma_refs: 5,
            fdr_q: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAnalysis {
    pub fit: LocalizedFit,
    pub curve: DebiasedCurve,
    pub sigma_j: f64,
    /// Band on the standardized time axis, in standardized units.
    pub band: ConfidenceBand,
    pub test: PairTest,
}

impl PairAnalysis {
    /// Band in original time units.
    pub fn band_original_units(&self) -> ConfidenceBand {
        self.band.rescaled(self.fit.time_scale)
    }
}

/// Fit, de-bias, calibrate and test pair `(j, k)`.
pub fn analyze_pair(
    design: &Design,
    j: usize,
    k: usize,
    grid: &[f64],
    fit_cfg: &FitConfig,
    cfg: &InferenceConfig,
    seed: u64,
) -> Result<PairAnalysis> {
    let fit = fit_pair(design, j, k, grid, fit_cfg)?;
    analyze_fit(design, fit, cfg, seed)
}

pub fn analyze_fit(design: &Design, fit: LocalizedFit, cfg: &InferenceConfig, seed: u64) -> Result<PairAnalysis> {
    let curve = debias(design, &fit, cfg.rule)?;
    let sigma_j = sigma_j_for_fit(design, &fit, &reference_points(&fit.grid, cfg.sigma_refs))?;
    let h = fit.tuning.h;
    let boot = multiplier_bootstrap(&curve.scores, &curve.sigma_n(), sigma_j, h, cfg.bootstrap, seed)?;
    let band = confidence_band(&curve, &boot, cfg.alpha, h)?;
    let test = test_pair(&curve, &boot, h)?;
    Ok(PairAnalysis {
        fit,
        curve,
        sigma_j,
        band,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEstimate {
    pub p: usize,
    /// `statistics[j][k]`; `None` on the diagonal and for failed pairs.
    pub statistics: Vec<Vec<Option<f64>>>,
    pub p_values: Vec<Vec<Option<f64>>>,
    pub q: f64,
    /// Selected directed edges `(j, k)`: `x_k` regulates `x_j`.
    pub selected: Vec<(usize, usize)>,
    pub failures: Vec<((usize, usize), String)>,
}

/// All ordered pairs `(j, k)`, `j != k`, in row-major order.
pub fn ordered_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|j| (0..p).filter(move |&k| k != j).map(move |k| (j, k))).collect()
}

/// Analyzes every ordered pair, with tuning shared per response. Results are
/// in the order of [`ordered_pairs`].
pub fn analyze_network(
    design: &Design,
    grid: &[f64],
    fit_cfg: &FitConfig,
    cfg: &InferenceConfig,
    seed: u64,
) -> Vec<((usize, usize), Result<PairAnalysis>)> {
    let p = design.p;
    let tunings: Vec<Result<TuningRecord>> = (0..p)
        .into_par_iter()
        .map(|j| tune_response(design, j, grid, fit_cfg))
        .collect();
    let pairs = ordered_pairs(p);
    let results: Vec<Result<PairAnalysis>> = pairs
        .par_iter()
        .map(|&(j, k)| {
            let tuning = tunings[j].as_ref().map_err(Clone::clone)?.clone();
            let fit = fit_pair_tuned(design, j, k, grid, fit_cfg, tuning)?;
            analyze_fit(design, fit, cfg, derive_seed(seed, &[j as u64, k as u64]))
        })
        .collect();
    pairs.into_iter().zip(results).collect()
}

/// Tests every ordered pair and applies BH at level `cfg.fdr_q`. Failed pairs
/// are reported and receive p-value 1.
pub fn recover_network(design: &Design, grid: &[f64], fit_cfg: &FitConfig, cfg: &InferenceConfig, seed: u64) -> NetworkEstimate {
    network_estimate(design.p, cfg.fdr_q, &analyze_network(design, grid, fit_cfg, cfg, seed))
}

/// BH selection over analyzed pairs.
pub fn network_estimate(p: usize, q: f64, results: &[((usize, usize), Result<PairAnalysis>)]) -> NetworkEstimate {
    let mut statistics = vec![vec![None; p]; p];
    let mut p_values = vec![vec![None; p]; p];
    let mut failures = Vec::new();
    let mut flat = Vec::with_capacity(results.len());
    for ((j, k), r) in results {
        match r {
            Ok(a) => {
                statistics[*j][*k] = Some(a.test.statistic);
                p_values[*j][*k] = Some(a.test.p_value);
                flat.push(a.test.p_value);
            }
            Err(e) => {
                failures.push(((*j, *k), e.to_string()));
                flat.push(1.0);
            }
        }
    }
    let selected = bh_select(&flat, q).into_iter().map(|i| results[i].0).collect();
    NetworkEstimate {
        p,
        statistics,
        p_values,
        q,
        selected,
        failures,
    }
}
