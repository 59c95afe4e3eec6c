//! Weighted kernel ridge step: minimize over `(alpha, c)`
//! `(1/n) (u - alpha tbar - S c)' R (u - alpha tbar - S c) + eta c' S c`.
//!
//! The minimizer has `c = R e / (n eta)` for the residual `e`, so `c` vanishes
//! outside the support of `R` and only the window block of `S` is needed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolution {
    pub alpha: f64,
    /// Full-length coefficient vector (zero outside the window).
    pub c: DVector<f64>,
    /// Full-length residual `u - alpha tbar - S c`.
    pub resid: DVector<f64>,
    pub objective: f64,
}

/// Factorization of `S_w = D Sigma_ww D + n eta I`, `D = R_w^{1/2}`.
pub struct RidgeFactor {
    pub sqrt_r: DVector<f64>,
    pub n_eta: f64,
    chol: Cholesky<f64, Dyn>,
}

impl RidgeFactor {
    pub fn new(sigma_w: &DMatrix<f64>, r_w: &[f64], eta: f64, n_total: usize) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
        }
        let w = r_w.len();
        if sigma_w.shape() != (w, w) {
            return Err(Error::ShapeMismatch("window block of Sigma has wrong shape".into()));
        }
        let sqrt_r = DVector::from_iterator(w, r_w.iter().map(|r| r.sqrt()));
        let n_eta = n_total as f64 * eta;
        let mut s = DMatrix::from_fn(w, w, |a, b| sqrt_r[a] * sigma_w[(a, b)] * sqrt_r[b]);
        for a in 0..w {
            s[(a, a)] += n_eta;
        }
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::NumericalRank("ridge system is not positive definite".into()))?;
        Ok(Self { sqrt_r, n_eta, chol })
    }

    pub fn solve(&self, x: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(x)
    }

    /// `R P x` with `P = n eta (Sigma R + n eta I)^{-1}`; symmetric in `x`.
    pub fn rp(&self, x: &DVector<f64>) -> DVector<f64> {
        let dx = x.component_mul(&self.sqrt_r);
        self.solve(&dx).component_mul(&self.sqrt_r) * self.n_eta
    }

    /// `P x`.
    pub fn p(&self, x: &DVector<f64>) -> DVector<f64> {
        let dx = x.component_mul(&self.sqrt_r);
        self.solve(&dx).component_div(&self.sqrt_r) * self.n_eta
    }

    /// `P' x`.
    pub fn pt(&self, x: &DVector<f64>) -> DVector<f64> {
        let dx = x.component_div(&self.sqrt_r);
        self.solve(&dx).component_mul(&self.sqrt_r) * self.n_eta
    }
}

/// Window-restricted solve. Returns `(alpha, c_w)`.
pub fn ridge_window(
    sigma_w: &DMatrix<f64>,
    r_w: &[f64],
    u_w: &DVector<f64>,
    tbar_w: &DVector<f64>,
    eta: f64,
    n_total: usize,
    with_alpha: bool,
) -> Result<(f64, DVector<f64>)> {
    let f = RidgeFactor::new(sigma_w, r_w, eta, n_total)?;
    let b = f.solve(&u_w.component_mul(&f.sqrt_r));
    if !with_alpha {
        return Ok((0.0, b.component_mul(&f.sqrt_r)));
    }
    let dt = tbar_w.component_mul(&f.sqrt_r);
    let a = f.solve(&dt);
    let denom = dt.dot(&a);
    if !(denom > 1e-300) {
        return Err(Error::NumericalRank("time regressor vanishes on the window".into()));
    }
    let alpha = dt.dot(&b) / denom;
    Ok((alpha, (b - a * alpha).component_mul(&f.sqrt_r)))
}

pub fn ridge_objective(
    sigma: &DMatrix<f64>,
    r: &[f64],
    u: &DVector<f64>,
    tbar: &DVector<f64>,
    eta: f64,
    alpha: f64,
    c: &DVector<f64>,
) -> f64 {
    let sc = sigma * c;
    let e = u - tbar * alpha - &sc;
    let n = u.len() as f64;
    let loss: f64 = e.iter().zip(r).map(|(ei, ri)| ri * ei * ei).sum::<f64>() / n;
    loss + eta * c.dot(&sc)
}

pub fn solve_weighted_ridge(
    sigma: &DMatrix<f64>,
    r: &[f64],
    u: &DVector<f64>,
    tbar: &DVector<f64>,
    eta: f64,
) -> Result<RidgeSolution> {
    solve_ridge(sigma, r, u, tbar, eta, true)
}

pub fn solve_ridge(
    sigma: &DMatrix<f64>,
    r: &[f64],
    u: &DVector<f64>,
    tbar: &DVector<f64>,
    eta: f64,
    with_alpha: bool,
) -> Result<RidgeSolution> {
    let n = u.len();
    if sigma.shape() != (n, n) || r.len() != n || tbar.len() != n {
        return Err(Error::ShapeMismatch("ridge inputs disagree in length".into()));
    }
    let win: Vec<usize> = (0..n).filter(|&i| r[i] > 0.0).collect();
    if win.is_empty() {
        return Err(Error::EmptyWindow { t0: f64::NAN });
    }
    let sigma_w = sigma.select_rows(&win).select_columns(&win);
    let r_w: Vec<f64> = win.iter().map(|&i| r[i]).collect();
    let u_w = u.select_rows(&win);
    let t_w = tbar.select_rows(&win);
    let (alpha, c_w) = ridge_window(&sigma_w, &r_w, &u_w, &t_w, eta, n, with_alpha)?;
    let mut c = DVector::zeros(n);
    for (a, &i) in win.iter().enumerate() {
        c[i] = c_w[a];
    }
    let resid = u - tbar * alpha - sigma * &c;
    let objective = ridge_objective(sigma, r, u, tbar, eta, alpha, &c);
    Ok(RidgeSolution {
        alpha,
        c,
        resid,
        objective,
    })
}
