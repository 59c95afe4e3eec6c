//! Uniform-grid quadrature for integrals of step functions against
//! piecewise-linear interpolants, with exact partial-cell weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode_systems::uniform_times;

/// Nodes `s_0 < ... < s_{m-1}` on `[0, 1]` and the step-function weights of
/// the observation times.
///
/// `q_s(a) = int_0^a phi_s(t) dt` for the hat function `phi_s` at node `s`, so
/// `int_0^a g(t) dt = sum_s q_s(a) g(s_s)` for the interpolant of `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
    /// Sparse increments `q(t_i) - q(t_{i-1})` (with `q(t_0)` for `i = 0`).
    increments: Vec<Vec<(usize, f64)>>,
}

pub fn default_nodes(n: usize) -> usize {
    (5 * n).max(200)
}

impl Quadrature {
    pub fn new(times: &[f64], m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidConfig("quadrature needs at least two nodes".into()));
        }
        if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidConfig("observation times must lie in [0, 1]".into()));
        }
        let nodes = uniform_times(0.0, 1.0, m);
        let dx = 1.0 / (m - 1) as f64;
        let mut increments = Vec::with_capacity(times.len());
        let mut prev: f64 = 0.0;
        for &t in times {
            let (lo, hi) = (prev.min(t), prev.max(t));
            let first = ((lo / dx).floor() as usize).saturating_sub(1);
            let last = (((hi / dx).ceil() as usize) + 1).min(m - 1);
            let mut inc = Vec::new();
            for s in first..=last {
                let d = hat_integral(&nodes, s, t) - hat_integral(&nodes, s, prev);
                if d != 0.0 {
                    inc.push((s, d));
                }
            }
            increments.push(inc);
            prev = t;
        }
        Ok(Self {
            nodes,
            times: times.to_vec(),
            increments,
        })
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    /// Dense `m x n` matrix `Q[s, i] = q_s(t_i)`.
    pub fn step_weights(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.m(), self.n());
        let mut col = DVector::zeros(self.m());
        for (i, inc) in self.increments.iter().enumerate() {
            for &(s, w) in inc {
                col[s] += w;
            }
            q.set_column(i, &col);
        }
        q
    }

    /// Dense `m x n` matrix `D[s, i] = q_s(t_i) - mean_i' q_s(t_i')`, so that
    /// `sum_s D[s, i] g(s_s) = int (T_i(t) - Tbar(t)) g(t) dt`.
    pub fn centered_weights(&self) -> DMatrix<f64> {
        let mut q = self.step_weights();
        let n = self.n() as f64;
        for mut row in q.row_iter_mut() {
            let mean = row.sum() / n;
            row.add_scalar_mut(-mean);
        }
        q
    }

    /// Weights for `int Tbar(t) g(t) dt`.
    pub fn mean_step_weights(&self) -> DVector<f64> {
        let q = self.step_weights();
        let n = self.n() as f64;
        DVector::from_iterator(self.m(), q.row_iter().map(|r| r.sum() / n))
    }

    /// Trapezoid weights for `int_0^1 g(t) dt`.
    pub fn trapezoid_weights(&self) -> DVector<f64> {
        let m = self.m();
        let dx = 1.0 / (m - 1) as f64;
        DVector::from_fn(m, |s, _| if s == 0 || s == m - 1 { 0.5 * dx } else { dx })
    }

    /// `t_i - mean(t)`, the integral of `T_i - Tbar` against the constant 1.
    pub fn tbar(&self) -> DVector<f64> {
        let n = self.n() as f64;
        let mean = self.times.iter().sum::<f64>() / n;
        DVector::from_iterator(self.n(), self.times.iter().map(|t| t - mean))
    }

    /// `D^T K D` for a kernel matrix `K` on the nodes, in `O(m^2 + m n + n^2)`.
    pub fn sandwich(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        self.sandwich_cross(k)
    }

    /// `D^T K D'` for a (possibly non-symmetric) cross kernel block.
    pub fn sandwich_cross(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        let (m, n) = (self.m(), self.n());
        assert_eq!(k.shape(), (m, m), "kernel matrix must be m x m");
        // K Q via the increments and a running column sum.
        let mut kq = DMatrix::zeros(m, n);
        let mut acc = DVector::zeros(m);
        for (i, inc) in self.increments.iter().enumerate() {
            for &(s, w) in inc {
                acc.axpy(w, &k.column(s), 1.0);
            }
            kq.set_column(i, &acc);
        }
        // Q^T (K Q) via the increments and a running row sum.
        let mut out = DMatrix::zeros(n, n);
        let mut racc = DVector::zeros(n);
        for (i, inc) in self.increments.iter().enumerate() {
            for &(s, w) in inc {
                for c in 0..n {
                    racc[c] += w * kq[(s, c)];
                }
            }
            for c in 0..n {
                out[(i, c)] = racc[c];
            }
        }
        double_center(&mut out);
        out
    }
}

/// `C X C` with `C = I - 11^T / n`.
fn double_center(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    let col_means: Vec<f64> = x.column_iter().map(|c| c.sum() / n).collect();
    let row_means: Vec<f64> = x.row_iter().map(|r| r.sum() / n).collect();
    let grand = col_means.iter().sum::<f64>() / n;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            x[(i, j)] += grand - row_means[i] - col_means[j];
        }
    }
}

/// `int_0^a phi_s(t) dt` for the hat function at node `s`.
fn hat_integral(nodes: &[f64], s: usize, a: f64) -> f64 {
    let c = nodes[s];
    let mut total = 0.0;
    if s > 0 {
        let l = nodes[s - 1];
        let dx = c - l;
        let x = a.clamp(l, c);
        total += (x - l).powi(2) / (2.0 * dx);
    }
    if s + 1 < nodes.len() {
        let r = nodes[s + 1];
        let dx = r - c;
        let x = a.clamp(c, r);
        total += 0.5 * dx - (r - x).powi(2) / (2.0 * dx);
    }
    total
}
