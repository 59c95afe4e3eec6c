//! Evaluation of the fitted nonparametric part, the initial level and the
//! pointwise prediction of `F_j`.

use nalgebra::{DMatrix, DVector};

use super::design::Design;
use super::fit::LocalizedFit;
use super::quadrature::Quadrature;
use crate::error::{Error, Result};
use crate::kernels::{Component, ComponentLayout, KernelSpec};

/// `H(x) = sum_s b_s K_theta(x, a_s)` over anchor states `a_s`.
#[derive(Debug, Clone)]
pub struct HFunctional {
    coords: Vec<KernelSpec>,
    components: Vec<(Component, f64)>,
    anchors: DMatrix<f64>,
    b: DVector<f64>,
    /// Per-component coefficients when every coordinate kernel is linear.
    linear: Option<Vec<f64>>,
}

impl HFunctional {
    pub fn new(coords: Vec<KernelSpec>, layout: &ComponentLayout, theta: &[f64], anchors: DMatrix<f64>, b: DVector<f64>) -> Self {
        let components: Vec<(Component, f64)> = layout
            .components()
            .iter()
            .copied()
            .zip(theta.iter().copied())
            .filter(|(_, t)| *t != 0.0)
            .collect();
        let all_linear = coords.iter().all(|k| matches!(k, KernelSpec::CenteredLinear { .. }));
        let linear = all_linear.then(|| {
            components
                .iter()
                .map(|(c, th)| {
                    let mut acc = 0.0;
                    for s in 0..anchors.nrows() {
                        acc += b[s] * feature(&coords, *c, |l| anchors[(s, l)]);
                    }
                    th * acc
                })
                .collect()
        });
        Self {
            coords,
            components,
            anchors,
            b,
            linear,
        }
    }

    pub fn from_fit(design: &Design, fit: &LocalizedFit, grid_index: usize) -> Self {
        let sol = &fit.solutions[grid_index];
        let c = DVector::from_column_slice(&sol.c);
        let parts = design.grid_coefficients(&c);
        let m = design.quad.m();
        let s = design.experiments;
        let mut anchors = DMatrix::zeros(m * s, design.p);
        let mut b = DVector::zeros(m * s);
        for e in 0..s {
            anchors.view_mut((e * m, 0), (m, design.p)).copy_from(&design.grid_states[e]);
            b.rows_mut(e * m, m).copy_from(&parts[e]);
        }
        Self::new(design.coords.clone(), &fit.layout, &sol.theta, anchors, b)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if let Some(coef) = &self.linear {
            return self
                .components
                .iter()
                .zip(coef)
                .map(|((c, _), w)| w * feature(&self.coords, *c, |l| x[l]))
                .sum();
        }
        let p = self.coords.len();
        let mut kv = vec![0.0; p];
        let mut total = 0.0;
        for s in 0..self.anchors.nrows() {
            let bs = self.b[s];
            if bs == 0.0 {
                continue;
            }
            for (l, v) in kv.iter_mut().enumerate() {
                *v = self.coords[l].eval(x[l], self.anchors[(s, l)]);
            }
            let mut ks = 0.0;
            for (c, th) in &self.components {
                ks += th
                    * match *c {
                        Component::Main(l) => kv[l],
                        Component::Pair(l, r) => kv[l] * kv[r],
                    };
            }
            total += bs * ks;
        }
        total
    }
}

fn feature(coords: &[KernelSpec], c: Component, x: impl Fn(usize) -> f64) -> f64 {
    let phi = |l: usize| match coords[l] {
        KernelSpec::CenteredLinear { center } => x(l) - center,
        _ => unreachable!("linear expansion needs linear kernels"),
    };
    match c {
        Component::Main(l) => phi(l),
        Component::Pair(l, r) => phi(l) * phi(r),
    }
}

/// `ybar - int Tbar(t) F(t) dt` from values of `F` on the quadrature nodes.
pub fn estimate_theta0(ybar: f64, f_on_nodes: &[f64], quad: &Quadrature) -> Result<f64> {
    if f_on_nodes.len() != quad.m() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {} quadrature nodes",
            f_on_nodes.len(),
            quad.m()
        )));
    }
    let w = quad.mean_step_weights();
    Ok(ybar - w.iter().zip(f_on_nodes).map(|(a, b)| a * b).sum::<f64>())
}

/// Initial level per experiment, using the fit at the nearest grid time for
/// each quadrature node.
pub fn fit_theta0(design: &Design, fit: &LocalizedFit) -> Result<Vec<f64>> {
    let nodes = &design.quad.nodes;
    let nearest: Vec<usize> = nodes.iter().map(|s| fit.nearest(*s)).collect();
    let mut f = vec![vec![0.0; nodes.len()]; design.experiments];
    let mut used: Vec<usize> = nearest.clone();
    used.sort_unstable();
    used.dedup();
    for g in used {
        let h = HFunctional::from_fit(design, fit, g);
        for (s, &ng) in nearest.iter().enumerate() {
            if ng != g {
                continue;
            }
            for (e, fe) in f.iter_mut().enumerate() {
                let x: Vec<f64> = design.grid_states[e].row(s).iter().copied().collect();
                fe[s] = fit.alpha_raw[g] + h.eval(&x);
            }
        }
    }
    let ybar = design.response_means(fit.j);
    (0..design.experiments)
        .map(|e| estimate_theta0(ybar[e], &f[e], &design.quad))
        .collect()
}

/// `theta0 + alpha(t0) + H_{t0}(x)`, with `alpha` interpolated linearly and
/// `H` taken from the nearest grid time.
pub fn predict_f(design: &Design, fit: &LocalizedFit, t0: f64, x: &[f64]) -> f64 {
    let h = HFunctional::from_fit(design, fit, fit.nearest(t0));
    fit.theta0.first().copied().unwrap_or(0.0) + fit.alpha_at(t0) + h.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta0_constant_integrand() {
        let times = [0.0, 0.25, 0.5, 1.0];
        let q = Quadrature::new(&times, 41).unwrap();
        let t = estimate_theta0(2.0, &vec![1.0; 41], &q).unwrap();
        let tbar = times.iter().sum::<f64>() / 4.0;
        assert!((t - (2.0 - tbar)).abs() < 1e-13);
    }

    #[test]
    fn linear_path_matches_generic() {
        let coords = vec![
            KernelSpec::CenteredLinear { center: 0.2 },
            KernelSpec::CenteredLinear { center: -0.1 },
            KernelSpec::CenteredLinear { center: 0.5 },
        ];
        let layout = ComponentLayout::excluding(3, 1);
        let theta = vec![0.5, 1.5, 0.3, 0.0];
        let anchors = DMatrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64 * 0.37).sin());
        let b = DVector::from_fn(7, |i, _| (i as f64 * 0.9).cos());
        let fast = HFunctional::new(coords.clone(), &layout, &theta, anchors.clone(), b.clone());
        let mut slow = fast.clone();
        slow.linear = None;
        let x = [0.3, 9.0, -0.7];
        assert!((fast.eval(&x) - slow.eval(&x)).abs() < 1e-12);
    }
}
