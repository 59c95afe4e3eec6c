//! Alternating ridge / non-negative Lasso fit of one `(j, k)` pair over a
//! grid of target times, with GCV and cross-validated tuning.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::Design;
use super::lasso::LassoProblem;
use super::ridge::ridge_window;
use super::weights::{default_bandwidth, local_weights, LocalWeights};
use crate::error::{Error, Result};
use crate::kernels::ComponentLayout;
use crate::smoothing::log_grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Bandwidth constant; `h = c_h * n^(-2/9)` on the unit time window.
    pub c_h: f64,
    pub bandwidth: Option<f64>,
    pub eta: Option<f64>,
    pub kappa: Option<f64>,
    pub eta_grid: Vec<f64>,
    pub kappa_grid_points: usize,
    /// Smallest kappa on the CV grid as a fraction of kappa_max.
    pub kappa_grid_ratio: f64,
    pub cv_folds: usize,
    pub cv_reference_points: usize,
    pub cv_max_iter: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            c_h: 0.5,
            bandwidth: None,
            eta: None,
            kappa: None,
            eta_grid: log_grid(1e-7, 1e-1, 15),
            kappa_grid_points: 10,
            kappa_grid_ratio: 1e-4,
            cv_folds: 10,
            cv_reference_points: 5,
            cv_max_iter: 20,
            max_iter: 20,
            tol: 1e-4,
        }
    }
}

impl FitConfig {
    pub fn bandwidth_for(&self, n: usize) -> f64 {
        self.bandwidth.unwrap_or_else(|| default_bandwidth(n, self.c_h))
    }
}

/// Fit at one target time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSolution {
    pub t0: f64,
    pub alpha: f64,
    pub theta: Vec<f64>,
    /// Stacked representer coefficients (zero outside the window).
    pub c: Vec<f64>,
    /// Objective after every ridge and every Lasso half-step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub eta: f64,
    pub kappa: f64,
    pub h: f64,
    pub eta_scores: Vec<(f64, f64)>,
    pub kappa_scores: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedFit {
    pub j: usize,
    pub k: usize,
    pub grid: Vec<f64>,
    pub layout: ComponentLayout,
    pub tuning: TuningRecord,
    pub solutions: Vec<LocalSolution>,
    pub alpha_raw: Vec<f64>,
    pub alpha_centered: Vec<f64>,
    /// Initial-level estimate, one per experiment.
    pub theta0: Vec<f64>,
    pub converged: bool,
    /// Original time units per unit of standardized time.
    pub time_scale: f64,
}

impl LocalizedFit {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Linear interpolation of the raw local intercept.
    pub fn alpha_at(&self, t0: f64) -> f64 {
        interp(&self.grid, &self.alpha_raw, t0)
    }

    pub fn nearest(&self, t0: f64) -> usize {
        nearest_index(&self.grid, t0)
    }
}

pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 || x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|v| *v <= x).min(last).max(1);
    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] * (1.0 - w) + ys[i] * w
}

pub fn nearest_index(xs: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if (v - x).abs() < (xs[best] - x).abs() {
            best = i;
        }
    }
    best
}

pub fn center(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

/// Result of the alternation on a window.
#[derive(Debug, Clone)]
pub struct WindowFit {
    pub alpha: f64,
    pub theta: Vec<f64>,
    pub c_w: DVector<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// The `(j, k)` problem on a design: response `u`, components excluding `k`.
///
/// The global variant (uniform weights, no time term, arbitrary layout) is
/// the unlocalized kernel ODE fit.
pub struct PairProblem<'a> {
    pub design: &'a Design,
    pub j: usize,
    pub k: usize,
    pub layout: ComponentLayout,
    pub u: DVector<f64>,
    pub with_alpha: bool,
    pub localized: bool,
}

impl<'a> PairProblem<'a> {
    pub fn new(design: &'a Design, j: usize, k: usize) -> Result<Self> {
        let p = design.p;
        if j >= p || k >= p || j == k {
            return Err(Error::InvalidConfig(format!("invalid pair ({j}, {k}) for dimension {p}")));
        }
        let layout = ComponentLayout::new(p, Some(k), design.sigmas.has_pairs());
        Ok(Self {
            design,
            j,
            k,
            layout,
            u: design.centered_response(j),
            with_alpha: true,
            localized: true,
        })
    }

    /// Unlocalized fit of `x_j` on the components of `layout`, without time term.
    pub fn global(design: &'a Design, j: usize, layout: ComponentLayout) -> Result<Self> {
        if j >= design.p || layout.p != design.p {
            return Err(Error::InvalidConfig(format!("invalid response {j} for dimension {}", design.p)));
        }
        Ok(Self {
            design,
            j,
            k: usize::MAX,
            layout,
            u: design.centered_response(j),
            with_alpha: false,
            localized: false,
        })
    }

    pub fn weights(&self, t0: f64, h: f64) -> Result<LocalWeights> {
        if self.localized {
            local_weights(t0, h, &self.design.times, self.design.experiments)
        } else {
            Ok(LocalWeights::uniform(self.n_total()))
        }
    }

    pub fn n_total(&self) -> usize {
        self.design.n_total()
    }

    /// Objective `(1/n) e'Re + eta c' S_theta c + kappa sum(theta)` on a window.
    #[allow(clippy::too_many_arguments)]
    pub fn window_objective(
        &self,
        idx: &[usize],
        r_w: &[f64],
        eta: f64,
        kappa: f64,
        alpha: f64,
        theta: &[f64],
        c_w: &DVector<f64>,
    ) -> f64 {
        let g = self.design.sigmas.g_matrix(&self.layout, c_w, idx);
        let sc = g * DVector::from_column_slice(theta);
        let n = self.n_total() as f64;
        let mut loss = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            let e = self.u[i] - alpha * self.design.tbar[i] - sc[a];
            loss += r_w[a] * e * e;
        }
        loss / n + eta * c_w.dot(&sc) + kappa * theta.iter().sum::<f64>()
    }

    /// Alternates ridge and Lasso steps on the rows `idx` with weights `r_w`.
    #[allow(clippy::too_many_arguments)]
    pub fn alternate(
        &self,
        idx: &[usize],
        r_w: &[f64],
        eta: f64,
        kappa: f64,
        theta_init: &[f64],
        max_iter: usize,
        tol: f64,
    ) -> Result<WindowFit> {
        let n = self.n_total();
        let u_w = self.u.select_rows(idx);
        let t_w = self.design.tbar.select_rows(idx);
        let mut theta = theta_init.to_vec();
        let mut alpha_prev: Option<f64> = None;
        let mut trace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..max_iter.max(1) {
            iterations = it + 1;
            let s_w = self.design.sigmas.combine(&self.layout, &theta, idx);
            let (alpha, c_w) = ridge_window(&s_w, r_w, &u_w, &t_w, eta, n, self.with_alpha)?;
            let g = self.design.sigmas.g_matrix(&self.layout, &c_w, idx);
            let r0 = &u_w - &t_w * alpha;
            let th = DVector::from_column_slice(&theta);
            trace.push(objective_from_g(&r0, &g, r_w, &c_w, &th, eta, kappa, n));
            let half = 0.5 * n as f64 * eta;
            let z = DVector::from_fn(idx.len(), |a, _| r0[a] - half * c_w[a] / r_w[a]);
            let new_theta = LassoProblem::with_n(&z, &g, r_w, n)?.solve(kappa, Some(&theta));
            let nt = DVector::from_column_slice(&new_theta);
            trace.push(objective_from_g(&r0, &g, r_w, &c_w, &nt, eta, kappa, n));
            let mut diff = 0.0;
            let mut norm = 0.0;
            if let Some(a0) = alpha_prev {
                diff += (alpha - a0).powi(2);
                norm += a0 * a0;
            } else {
                diff = f64::INFINITY;
            }
            for (a, b) in new_theta.iter().zip(&theta) {
                diff += (a - b).powi(2);
                norm += b * b;
            }
            theta = new_theta;
            alpha_prev = Some(alpha);
            if diff.sqrt() <= tol * norm.sqrt().max(1e-12) {
                converged = true;
                break;
            }
        }
        // Closing ridge step so that (alpha, c) match the returned theta.
        let s_w = self.design.sigmas.combine(&self.layout, &theta, idx);
        let (alpha, c_w) = ridge_window(&s_w, r_w, &u_w, &t_w, eta, n, self.with_alpha)?;
        let g = self.design.sigmas.g_matrix(&self.layout, &c_w, idx);
        let r0 = &u_w - &t_w * alpha;
        trace.push(objective_from_g(&r0, &g, r_w, &c_w, &DVector::from_column_slice(&theta), eta, kappa, n));
        Ok(WindowFit {
            alpha,
            theta,
            c_w,
            trace,
            iterations,
            converged,
        })
    }

    /// Fits at a single target time from `theta = 1`.
    pub fn fit_at(&self, t0: f64, h: f64, eta: f64, kappa: f64, max_iter: usize, tol: f64) -> Result<LocalSolution> {
        let w = self.weights(t0, h)?;
        let idx = w.support();
        let r_w: Vec<f64> = idx.iter().map(|&i| w.values[i]).collect();
        let ones = vec![1.0; self.layout.len()];
        let f = self.alternate(&idx, &r_w, eta, kappa, &ones, max_iter, tol)?;
        let mut c = vec![0.0; self.n_total()];
        for (a, &i) in idx.iter().enumerate() {
            c[i] = f.c_w[a];
        }
        Ok(LocalSolution {
            t0,
            alpha: f.alpha,
            theta: f.theta,
            c,
            objective_trace: f.trace,
            iterations: f.iterations,
            converged: f.converged,
        })
    }

    /// GCV over `grid` for the unlocalized fit with all weights 1.
    pub fn tune_eta(&self, grid: &[f64]) -> Result<(f64, Vec<(f64, f64)>)> {
        let n = self.n_total();
        let all: Vec<usize> = (0..n).collect();
        let ones = vec![1.0; self.layout.len()];
        let s = self.design.sigmas.combine(&self.layout, &ones, &all);
        let eig = SymmetricEigen::new(s);
        let ut = eig.eigenvectors.transpose();
        let pu = &ut * &self.u;
        let pt = &ut * &self.design.tbar;
        let nf = n as f64;
        let mut sorted = grid.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let mut scores = Vec::new();
        let mut best: Option<(f64, f64)> = None;
        for &eta in &sorted {
            let d: Vec<f64> = eig.eigenvalues.iter().map(|l| nf * eta / (l.max(0.0) + nf * eta)).collect();
            let tpt: f64 = (0..n).map(|i| d[i] * pt[i] * pt[i]).sum();
            let tpu: f64 = (0..n).map(|i| d[i] * pt[i] * pu[i]).sum();
            let tppt: f64 = (0..n).map(|i| d[i] * d[i] * pt[i] * pt[i]).sum();
            let (alpha, tr) = if self.with_alpha {
                if tpt <= 0.0 {
                    continue;
                }
                (tpu / tpt, d.iter().sum::<f64>() - tppt / tpt)
            } else {
                (0.0, d.iter().sum::<f64>())
            };
            let rss: f64 = (0..n).map(|i| (d[i] * (pu[i] - alpha * pt[i])).powi(2)).sum();
            if tr <= 1e-12 * nf {
                continue;
            }
            let score = nf * rss / (tr * tr);
            scores.push((eta, score));
            match best {
                Some((b, _)) if score > b * (1.0 + 1e-12) => {}
                _ => best = Some((score, eta)),
            }
        }
        let (_, eta) = best.ok_or_else(|| Error::DegenerateSmoother("GCV undefined for every eta".into()))?;
        Ok((eta, scores))
    }

    /// Smallest kappa that zeroes every weight after one ridge step from `theta = 1`.
    fn kappa_max(&self, refs: &[f64], h: f64, eta: f64) -> Result<f64> {
        let n = self.n_total();
        let mut kmax: f64 = 0.0;
        for &t0 in refs {
            let w = self.weights(t0, h)?;
            let idx = w.support();
            let r_w: Vec<f64> = idx.iter().map(|&i| w.values[i]).collect();
            let ones = vec![1.0; self.layout.len()];
            let s_w = self.design.sigmas.combine(&self.layout, &ones, &idx);
            let u_w = self.u.select_rows(&idx);
            let t_w = self.design.tbar.select_rows(&idx);
            let (alpha, c_w) = ridge_window(&s_w, &r_w, &u_w, &t_w, eta, n, self.with_alpha)?;
            let g = self.design.sigmas.g_matrix(&self.layout, &c_w, &idx);
            let half = 0.5 * n as f64 * eta;
            let z = DVector::from_fn(idx.len(), |a, _| u_w[a] - alpha * t_w[a] - half * c_w[a] / r_w[a]);
            let lp = LassoProblem::with_n(&z, &g, &r_w, n)?;
            kmax = kmax.max(lp.b.max());
        }
        Ok(if kmax > 0.0 { kmax } else { 1e-8 })
    }

    /// K-fold CV of kappa at reference target times; ties go to the larger kappa.
    pub fn tune_kappa(&self, refs: &[f64], h: f64, eta: f64, cfg: &FitConfig) -> Result<(f64, Vec<(f64, f64)>)> {
        let kmax = self.kappa_max(refs, h, eta)?;
        let mut grid = log_grid(kmax * cfg.kappa_grid_ratio, kmax, cfg.kappa_grid_points.max(1));
        grid.reverse();
        let n = self.design.n();
        let folds = cfg.cv_folds.max(2);
        let ones = vec![1.0; self.layout.len()];
        let mut scores = Vec::new();
        let mut best: Option<(f64, f64)> = None;
        for &kappa in &grid {
            let mut err = 0.0;
            for &t0 in refs {
                let w = self.weights(t0, h)?;
                let idx = w.support();
                for f in 0..folds {
                    let (test, train): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| (i % n) % folds == f);
                    if test.is_empty() || train.len() < 2 {
                        continue;
                    }
                    let r_tr: Vec<f64> = train.iter().map(|&i| w.values[i]).collect();
                    let fit = match self.alternate(&train, &r_tr, eta, kappa, &ones, cfg.cv_max_iter, cfg.tol) {
                        Ok(f) => f,
                        Err(Error::NumericalRank(_)) => continue,
                        Err(e) => return Err(e),
                    };
                    let s_tt = self.design.sigmas.combine_rect(&self.layout, &fit.theta, &test, &train);
                    let pred = s_tt * &fit.c_w;
                    for (a, &i) in test.iter().enumerate() {
                        let e = self.u[i] - fit.alpha * self.design.tbar[i] - pred[a];
                        err += w.values[i] * e * e;
                    }
                }
            }
            scores.push((kappa, err));
            if best.is_none_or(|(b, _)| err < b * (1.0 - 1e-12)) {
                best = Some((err, kappa));
            }
        }
        Ok((best.expect("non-empty kappa grid").1, scores))
    }
}

#[allow(clippy::too_many_arguments)]
fn objective_from_g(
    r0: &DVector<f64>,
    g: &DMatrix<f64>,
    r_w: &[f64],
    c_w: &DVector<f64>,
    theta: &DVector<f64>,
    eta: f64,
    kappa: f64,
    n: usize,
) -> f64 {
    let sc = g * theta;
    let loss: f64 = (0..r0.len()).map(|a| r_w[a] * (r0[a] - sc[a]).powi(2)).sum();
    loss / n as f64 + eta * c_w.dot(&sc) + kappa * theta.sum()
}

/// Evenly spaced reference points strictly inside the grid range.
pub fn reference_points(grid: &[f64], count: usize) -> Vec<f64> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let count = count.max(1);
    (0..count)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / count as f64)
        .collect()
}

/// Tunes `eta` (GCV) and `kappa` (CV) for pair `(j, k)`, or takes them from `cfg`.
pub fn tune_pair(design: &Design, j: usize, k: usize, grid: &[f64], cfg: &FitConfig) -> Result<TuningRecord> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty t0 grid".into()));
    }
    let prob = PairProblem::new(design, j, k)?;
    let h = cfg.bandwidth_for(design.n());
    let (eta, eta_scores) = match cfg.eta {
        Some(e) => (e, vec![]),
        None => prob.tune_eta(&cfg.eta_grid)?,
    };
    let (kappa, kappa_scores) = match cfg.kappa {
        Some(k) => (k, vec![]),
        None => prob.tune_kappa(&reference_points(grid, cfg.cv_reference_points), h, eta, cfg)?,
    };
    Ok(TuningRecord {
        eta,
        kappa,
        h,
        eta_scores,
        kappa_scores,
    })
}

/// Tuning shared by every pair with response `j`, computed on the pair
/// `(j, j + 1 mod p)`.
pub fn tune_response(design: &Design, j: usize, grid: &[f64], cfg: &FitConfig) -> Result<TuningRecord> {
    if design.p < 2 {
        return Err(Error::InvalidConfig("need at least two variables".into()));
    }
    tune_pair(design, j, (j + 1) % design.p, grid, cfg)
}

/// Full fit of pair `(j, k)` over `grid` (0-based indices).
pub fn fit_pair(design: &Design, j: usize, k: usize, grid: &[f64], cfg: &FitConfig) -> Result<LocalizedFit> {
    let tuning = tune_pair(design, j, k, grid, cfg)?;
    fit_pair_tuned(design, j, k, grid, cfg, tuning)
}

/// Fit of pair `(j, k)` with fixed tuning parameters.
pub fn fit_pair_tuned(
    design: &Design,
    j: usize,
    k: usize,
    grid: &[f64],
    cfg: &FitConfig,
    tuning: TuningRecord,
) -> Result<LocalizedFit> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty t0 grid".into()));
    }
    let prob = PairProblem::new(design, j, k)?;
    let (h, eta, kappa) = (tuning.h, tuning.eta, tuning.kappa);
    let solutions = grid
        .par_iter()
        .map(|&t0| prob.fit_at(t0, h, eta, kappa, cfg.max_iter, cfg.tol))
        .collect::<Result<Vec<_>>>()?;
    let alpha_raw: Vec<f64> = solutions.iter().map(|s| s.alpha).collect();
    let converged = solutions.iter().all(|s| s.converged);
    let mut fit = LocalizedFit {
        j,
        k,
        grid: grid.to_vec(),
        layout: prob.layout.clone(),
        tuning,
        alpha_centered: center(&alpha_raw),
        alpha_raw,
        solutions,
        theta0: vec![],
        converged,
        time_scale: design.time_scale,
    };
    fit.theta0 = super::predict::fit_theta0(design, &fit)?;
    Ok(fit)
}
