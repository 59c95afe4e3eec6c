//! Unlocalized kernel ODE baselines with Bonferroni pointwise intervals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::Baseline;
use crate::error::{Error, Result};
use crate::inference::ConfidenceBand;
use crate::kernels::{Component, ComponentLayout};
use crate::localized_estimator::fit::{center, FitConfig, PairProblem};
use crate::localized_estimator::ridge::RidgeFactor;
use crate::localized_estimator::Design;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFit {
    pub j: usize,
    pub layout: ComponentLayout,
    pub theta: Vec<f64>,
    pub c: Vec<f64>,
    pub eta: f64,
    pub kappa: f64,
    pub converged: bool,
}

/// Uniform-weight fit of `x_j` on all components of `layout`, without time term.
pub fn fit_global(design: &Design, j: usize, layout: ComponentLayout, cfg: &FitConfig) -> Result<GlobalFit> {
    let prob = PairProblem::global(design, j, layout)?;
    let (eta, _) = match cfg.eta {
        Some(e) => (e, vec![]),
        None => prob.tune_eta(&cfg.eta_grid)?,
    };
    let (kappa, _) = match cfg.kappa {
        Some(k) => (k, vec![]),
        None => prob.tune_kappa(&[0.5], f64::INFINITY, eta, cfg)?,
    };
    let sol = prob.fit_at(0.5, f64::INFINITY, eta, kappa, cfg.max_iter, cfg.tol)?;
    Ok(GlobalFit {
        j,
        layout: prob.layout,
        theta: sol.theta,
        c: sol.c,
        eta,
        kappa,
        converged: sol.converged,
    })
}

/// Component layout of a baseline for dimension `p`.
pub fn baseline_layout(b: Baseline, p: usize) -> ComponentLayout {
    match b {
        Baseline::AdditiveOde => ComponentLayout::new(p, None, false),
        Baseline::KernelOdeBonferroni | Baseline::LinearOde => ComponentLayout::new(p, None, true),
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Effect of `x_k` on `x_j` in the global fit along the smoothed trajectory,
/// centered over `grid`, with its Bonferroni pointwise band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineBand {
    pub method: Baseline,
    pub sigma_j: f64,
    pub band: ConfidenceBand,
}

pub fn baseline_band(design: &Design, fit: &GlobalFit, method: Baseline, k: usize, grid: &[f64], alpha: f64) -> Result<BaselineBand> {
    if design.experiments != 1 {
        return Err(Error::InvalidConfig("baselines support a single experiment".into()));
    }
    let n = design.n_total();
    let all: Vec<usize> = (0..n).collect();
    let s = design.sigmas.combine(&fit.layout, &fit.theta, &all);
    let ones = vec![1.0; n];
    let factor = RidgeFactor::new(&s, &ones, fit.eta, n)?;
    let u = design.centered_response(fit.j);
    // noise level from the global residual: ||P u||^2 / tr(P)
    let pu = factor.p(&u);
    let mut tr = 0.0;
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        tr += factor.p(&e)[i];
    }
    if !(tr > 0.0) {
        return Err(Error::DegenerateSmoother("tr(P) is not positive".into()));
    }
    let sigma_j = (pu.norm_squared() / tr).sqrt();

    let d = design.quad.centered_weights();
    let states = design.smoothed[0].eval_grid(grid);
    let anchors = &design.grid_states[0];
    let involving: Vec<(Component, f64)> = fit
        .layout
        .components()
        .iter()
        .copied()
        .zip(fit.theta.iter().copied())
        .filter(|(c, t)| c.involves(k) && *t != 0.0)
        .collect();
    let m = design.quad.m();
    let coords = &design.coords;
    let mut kv = DMatrix::zeros(grid.len(), m);
    for g in 0..grid.len() {
        for sidx in 0..m {
            let mut v = 0.0;
            for (c, th) in &involving {
                let x = states.row(g);
                let a = anchors.row(sidx);
                v += th * match *c {
                    Component::Main(l) => coords[l].eval(x[l], a[l]),
                    Component::Pair(l, r) => coords[l].eval(x[l], a[l]) * coords[r].eval(x[r], a[r]),
                };
            }
            kv[(g, sidx)] = v;
        }
    }
    // effect(t0) = a(t0)' c with a(t0) = D' kv(t0); c = (S + n eta I)^{-1} u
    let amat = &kv * &d; // grid x n
    let c = DVector::from_column_slice(&fit.c);
    let raw: Vec<f64> = (0..grid.len()).map(|g| amat.row(g).transpose().dot(&c)).collect();
    let centered = center(&raw);
    // influence vectors: n C (S + n eta I)^{-1} a(t0), then centered over the grid
    let mut infl: Vec<DVector<f64>> = (0..grid.len())
        .map(|g| {
            let a = amat.row(g).transpose();
            let mut v = factor.solve(&a) * n as f64;
            let mean = v.mean();
            v.add_scalar_mut(-mean);
            v
        })
        .collect();
    let mean_infl = infl.iter().fold(DVector::zeros(n), |acc, v| acc + v) / grid.len() as f64;
    for v in infl.iter_mut() {
        *v -= &mean_infl;
    }
    let z = normal_quantile(1.0 - alpha / (2.0 * grid.len() as f64));
    let half_width = infl.iter().map(|v| z * sigma_j * v.norm() / n as f64).collect();
    Ok(BaselineBand {
        method,
        sigma_j,
        band: ConfidenceBand {
            alpha,
            critical_value: z,
            replicates: 0,
            grid: grid.to_vec(),
            center: centered,
            half_width,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantiles() {
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
        assert!((normal_quantile(1.0 - 0.05 / 1000.0) - 3.890_591_886_413_12).abs() < 1e-9);
        assert!((normal_quantile(0.01) + 2.326347874040841).abs() < 1e-9);
    }
}
