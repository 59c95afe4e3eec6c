//! Noise-level and score-scale estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::localized_estimator::fit::LocalizedFit;
use crate::localized_estimator::weights::gaussian_surrogate;
use crate::localized_estimator::Design;

/// `||(I - A) u||^2 / tr(I - A)` for an explicit smoother matrix `A`.
pub fn sigma_sq_from_hat(u: &DVector<f64>, a: &DMatrix<f64>) -> Result<f64> {
    let n = u.len();
    let tr = n as f64 - a.trace();
    if !(tr > 1e-12) {
        return Err(Error::DegenerateSmoother("tr(I - A) is not positive".into()));
    }
    Ok((u - a * u).norm_squared() / tr)
}

/// `sigma_j^2` from `M^{-1}`, where
/// `A = I - n eta M^{-1} [I - tbar (tbar' M^{-1} tbar)^{-1} tbar' M^{-1}]`.
pub fn sigma_sq_from_minv(u: &DVector<f64>, eta: f64, minv: &DMatrix<f64>, tbar: &DVector<f64>) -> Result<f64> {
    let n = u.len();
    let mt = minv * tbar;
    let tmt = tbar.dot(&mt);
    if !(tmt.abs() > 1e-300) {
        return Err(Error::NumericalRank("tbar' M^-1 tbar vanishes".into()));
    }
    let ne = n as f64 * eta;
    let beta = tbar.dot(&(minv * u)) / tmt;
    let resid = (minv * (u - tbar * beta)) * ne;
    let tr = ne * (minv.trace() - (minv * &mt).dot(tbar) / tmt);
    if !(tr > 1e-12) {
        return Err(Error::DegenerateSmoother("tr(I - A) is not positive".into()));
    }
    Ok(resid.norm_squared() / tr)
}

/// Plug-in noise sd with strictly positive weights `r` on the diagonal of `R`.
/// `M^{-1} = R^2 (Sigma R + n eta I)^{-1}` avoids forming `R^{-1}`.
pub fn sigma_j_hat(u: &DVector<f64>, eta: f64, sigma: &DMatrix<f64>, r: &[f64], tbar: &DVector<f64>) -> Result<f64> {
    let n = u.len();
    if sigma.shape() != (n, n) || r.len() != n || tbar.len() != n {
        return Err(Error::ShapeMismatch("sigma_j inputs disagree in length".into()));
    }
    if r.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidConfig("surrogate weights must be strictly positive".into()));
    }
    let ne = n as f64 * eta;
    let mut b = DMatrix::from_fn(n, n, |a, c| sigma[(a, c)] * r[c]);
    for a in 0..n {
        b[(a, a)] += ne;
    }
    let binv = b
        .try_inverse()
        .ok_or_else(|| Error::NumericalRank("Sigma R + n eta I is singular".into()))?;
    let minv = DMatrix::from_fn(n, n, |a, c| r[a] * r[a] * binv[(a, c)]);
    Ok(sigma_sq_from_minv(u, eta, &minv, tbar)?.sqrt())
}

/// Median of the plug-in estimate over `refs`, with Gaussian surrogate weights
/// of peak 1 and the kernel weights of the nearest grid fit.
pub fn sigma_j_for_fit(design: &Design, fit: &LocalizedFit, refs: &[f64]) -> Result<f64> {
    let u = design.centered_response(fit.j);
    let n = design.n_total();
    let all: Vec<usize> = (0..n).collect();
    let mut vals = Vec::new();
    for &t0 in refs {
        let g = fit.nearest(t0);
        let r = gaussian_surrogate(t0, fit.tuning.h, &design.times, design.experiments);
        let sigma = design.sigmas.combine(&fit.layout, &fit.solutions[g].theta, &all);
        vals.push(sigma_j_hat(&u, fit.tuning.eta, &sigma, &r, &design.tbar)?);
    }
    if vals.is_empty() {
        return Err(Error::InvalidConfig("no reference points for sigma_j".into()));
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    let mid = vals.len() / 2;
    Ok(if vals.len() % 2 == 1 {
        vals[mid]
    } else {
        0.5 * (vals[mid - 1] + vals[mid])
    })
}

/// `sqrt(n^-1 w' R^2 w)`.
pub fn sigma_n_hat(w: &[f64], r: &[f64]) -> Result<f64> {
    if w.len() != r.len() {
        return Err(Error::ShapeMismatch("w and R differ in length".into()));
    }
    let n = w.len() as f64;
    Ok((w.iter().zip(r).map(|(a, b)| (a * b).powi(2)).sum::<f64>() / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_smoother_gives_plugin_variance() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.5]);
        let s = sigma_sq_from_hat(&u, &DMatrix::zeros(4, 4)).unwrap();
        assert!((s - u.norm_squared() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_n_example() {
        let v = sigma_n_hat(&[1.0, 2.0], &[1.0, 0.5]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }
}
