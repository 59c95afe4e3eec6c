//! De-biased estimate of the time-varying effect and its influence scores.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localized_estimator::fit::{center, LocalizedFit};
use crate::localized_estimator::ridge::RidgeFactor;
use crate::localized_estimator::{local_weights, Design};

/// Direction used for the one-step correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ScoreRule {
    /// `w = n v / (v' R tbar)` with `v = P_0 tbar` at `eta_0 = factor * eta`.
    Projected { eta_factor: f64 },
    /// Row of `Sigma` at the observation nearest to `t0`, applied to the
    /// residual without the `alpha tbar` term.
    NearestRow,
}

impl Default for ScoreRule {
    fn default() -> Self {
        ScoreRule::Projected { eta_factor: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasedCurve {
    pub j: usize,
    pub k: usize,
    pub grid: Vec<f64>,
    pub rule: ScoreRule,
    pub alpha: Vec<f64>,
    pub correction: Vec<f64>,
    /// `alpha + correction`.
    pub values: Vec<f64>,
    /// `values` centered over the grid.
    pub centered: Vec<f64>,
    /// Influence of `y_j` on `centered`, one length-`n` vector per grid point.
    pub scores: Vec<Vec<f64>>,
    pub n_total: usize,
    pub time_scale: f64,
}

impl DebiasedCurve {
    /// `sqrt(n^-1 psi' psi)` per grid point.
    pub fn sigma_n(&self) -> Vec<f64> {
        self.scores
            .iter()
            .map(|s| (s.iter().map(|v| v * v).sum::<f64>() / self.n_total as f64).sqrt())
            .collect()
    }
}

struct PointEstimate {
    alpha: f64,
    correction: f64,
    score: DVector<f64>,
}

fn debias_point(design: &Design, fit: &LocalizedFit, g: usize, rule: ScoreRule, u: &DVector<f64>) -> Result<PointEstimate> {
    let sol = &fit.solutions[g];
    let n = design.n_total();
    let w = local_weights(sol.t0, fit.tuning.h, &design.times, design.experiments)?;
    let idx = w.support();
    let r_w: Vec<f64> = idx.iter().map(|&i| w.values[i]).collect();
    let r_v = DVector::from_column_slice(&r_w);
    let s_w = design.sigmas.combine(&fit.layout, &sol.theta, &idx);
    let u_w = u.select_rows(&idx);
    let t_w = design.tbar.select_rows(&idx);
    let c_w = DVector::from_iterator(idx.len(), idx.iter().map(|&i| sol.c[i]));
    let nf = n as f64;
    let mut score = DVector::zeros(n);
    match rule {
        ScoreRule::Projected { eta_factor } => {
            let eta = fit.tuning.eta;
            let f = RidgeFactor::new(&s_w, &r_w, eta, n)?;
            let f0 = RidgeFactor::new(&s_w, &r_w, eta * eta_factor, n)?;
            let v = f0.p(&t_w);
            let denom: f64 = (0..idx.len()).map(|a| r_w[a] * v[a] * t_w[a]).sum();
            if !(denom.abs() > 1e-300) {
                return Err(Error::NumericalRank("correction direction is orthogonal to tbar".into()));
            }
            let wv = &v * (nf / denom);
            let resid = &u_w - &t_w * sol.alpha - &s_w * &c_w;
            let rw = wv.component_mul(&r_v);
            let correction = rw.dot(&resid) / nf;
            // Linear map of alpha + correction on u restricted to the window.
            let rpt = f.rp(&t_w);
            let ell = &rpt / t_w.dot(&rpt);
            let ptrw = f.pt(&rw);
            let l_w = &ell + (&ptrw - &ell * t_w.dot(&ptrw)) / nf;
            for (a, &i) in idx.iter().enumerate() {
                score[i] = nf * l_w[a];
            }
            center_by_experiment(&mut score, design.n(), design.experiments);
            Ok(PointEstimate {
                alpha: sol.alpha,
                correction,
                score,
            })
        }
        ScoreRule::NearestRow => {
            let anchor = fit_nearest_obs(&design.times, sol.t0);
            let all: Vec<usize> = vec![anchor];
            let row = design.sigmas.combine_rect(&fit.layout, &sol.theta, &all, &idx);
            let resid = &u_w - &s_w * &c_w;
            let mut correction = 0.0;
            for (a, &i) in idx.iter().enumerate() {
                correction += row[(0, a)] * r_w[a] * resid[a];
                score[i] = r_w[a] * row[(0, a)];
            }
            Ok(PointEstimate {
                alpha: sol.alpha,
                correction: correction / nf,
                score,
            })
        }
    }
}

fn fit_nearest_obs(times: &[f64], t0: f64) -> usize {
    crate::localized_estimator::fit::nearest_index(times, t0)
}

fn center_by_experiment(v: &mut DVector<f64>, n: usize, s: usize) {
    for e in 0..s {
        let mut blk = v.rows_mut(e * n, n);
        let m = blk.mean();
        blk.add_scalar_mut(-m);
    }
}

/// De-biases every grid point of `fit`.
pub fn debias(design: &Design, fit: &LocalizedFit, rule: ScoreRule) -> Result<DebiasedCurve> {
    if fit.solutions.len() != fit.grid.len() {
        return Err(Error::ShapeMismatch("fit has inconsistent grid".into()));
    }
    let u = design.centered_response(fit.j);
    let pts = (0..fit.grid.len())
        .map(|g| debias_point(design, fit, g, rule, &u))
        .collect::<Result<Vec<_>>>()?;
    let alpha: Vec<f64> = pts.iter().map(|p| p.alpha).collect();
    let correction: Vec<f64> = pts.iter().map(|p| p.correction).collect();
    let values: Vec<f64> = alpha.iter().zip(&correction).map(|(a, c)| a + c).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalRank("non-finite de-biased value".into()));
    }
    let n = design.n_total();
    let gsz = pts.len() as f64;
    let mean_score = pts.iter().fold(DVector::zeros(n), |acc, p| acc + &p.score) / gsz;
    let scores = pts.iter().map(|p| (&p.score - &mean_score).iter().copied().collect()).collect();
    Ok(DebiasedCurve {
        j: fit.j,
        k: fit.k,
        grid: fit.grid.clone(),
        rule,
        alpha,
        correction,
        centered: center(&values),
        values,
        scores,
        n_total: n,
        time_scale: fit.time_scale,
    })
}
