//! Non-negative Lasso for the kernel weights:
//! minimize `(1/n) (z - G theta)' R (z - G theta) + kappa sum(theta)`, `theta >= 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const LASSO_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 100_000;
const CD_BEFORE_ACTIVE_SET: usize = 50;

/// Quadratic form of the Lasso objective: `theta' Q theta / 2 - b' theta`
/// with `Q = (2/n) G'RG`, `b = (2/n) G'Rz`.
pub struct LassoProblem {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub zrz: f64,
}

impl LassoProblem {
    pub fn new(z: &DVector<f64>, g: &DMatrix<f64>, r: &[f64]) -> Result<Self> {
        Self::with_n(z, g, r, z.len())
    }

    /// Rows of `z`, `G`, `R` may be a subset (the window) of `n` observations.
    pub fn with_n(z: &DVector<f64>, g: &DMatrix<f64>, r: &[f64], n: usize) -> Result<Self> {
        let w = z.len();
        if g.nrows() != w || r.len() != w {
            return Err(Error::ShapeMismatch("Lasso inputs disagree in length".into()));
        }
        let scale = 2.0 / n as f64;
        let rg = DMatrix::from_fn(w, g.ncols(), |i, m| r[i] * g[(i, m)]);
        let q = g.transpose() * &rg * scale;
        let b = rg.transpose() * z * scale;
        let zrz = z.iter().zip(r).map(|(zi, ri)| ri * zi * zi).sum::<f64>() / n as f64;
        Ok(Self { q, b, zrz })
    }

    pub fn objective(&self, theta: &[f64], kappa: f64) -> f64 {
        let t = DVector::from_column_slice(theta);
        self.zrz + 0.5 * t.dot(&(&self.q * &t)) - self.b.dot(&t) + kappa * theta.iter().sum::<f64>()
    }

    /// Gradient of the smooth part plus `kappa`.
    pub fn gradient(&self, theta: &[f64], kappa: f64) -> DVector<f64> {
        let t = DVector::from_column_slice(theta);
        (&self.q * t - &self.b).add_scalar(kappa)
    }

    /// Cyclic coordinate descent with one-sided soft-thresholding, stopped when
    /// the largest coordinate update is below [`LASSO_TOL`]. On ill-conditioned
    /// problems CD is finished by an exact active-set solve started from the
    /// current iterate, accepted only if it does not raise the objective.
    pub fn solve(&self, kappa: f64, warm: Option<&[f64]>) -> Vec<f64> {
        let mm = self.b.len();
        let mut theta = warm.map_or_else(|| vec![0.0; mm], |w| w.iter().map(|v| v.max(0.0)).collect());
        for sweep in 0..MAX_SWEEPS {
            if self.sweep(&mut theta, kappa) < LASSO_TOL {
                break;
            }
            if sweep + 1 == CD_BEFORE_ACTIVE_SET {
                if let Some(exact) = self.active_set(&theta, kappa) {
                    if self.objective(&exact, kappa) <= self.objective(&theta, kappa) {
                        return exact;
                    }
                }
            }
        }
        theta
    }

    /// One CD sweep; returns the largest coordinate update.
    fn sweep(&self, theta: &mut [f64], kappa: f64) -> f64 {
        let mm = theta.len();
        let mut max_step = 0.0f64;
        for m in 0..mm {
            let qmm = self.q[(m, m)];
            let new = if qmm > 0.0 {
                let mut s = self.b[m];
                for l in 0..mm {
                    if l != m {
                        s -= self.q[(m, l)] * theta[l];
                    }
                }
                ((s - kappa) / qmm).max(0.0)
            } else {
                0.0
            };
            max_step = max_step.max((new - theta[m]).abs());
            theta[m] = new;
        }
        max_step
    }

    /// Primal active-set method for `min 0.5 t'Qt - (b - kappa)'t, t >= 0` from
    /// a feasible start. Each step moves towards the minimizer on the current
    /// face, so the objective never increases. `None` if it stalls.
    fn active_set(&self, start: &[f64], kappa: f64) -> Option<Vec<f64>> {
        let mm = start.len();
        let lin: Vec<f64> = self.b.iter().map(|b| b - kappa).collect();
        let jitter = 1e-13 * (0..mm).map(|m| self.q[(m, m)]).fold(0.0, f64::max).max(1e-300);
        let scale = lin.iter().fold(kappa.abs(), |a, v| a.max(v.abs())).max(1e-300);
        let mut theta = start.to_vec();
        let mut free: Vec<bool> = theta.iter().map(|&v| v > 0.0).collect();
        for _ in 0..(4 * mm + 20) {
            // Move to the face minimizer, dropping coordinates that hit zero.
            let mut settled = false;
            for _ in 0..=mm {
                let f: Vec<usize> = (0..mm).filter(|&m| free[m]).collect();
                let sol = if f.is_empty() {
                    DVector::zeros(0)
                } else {
                    let mut qf = self.q.select_rows(&f).select_columns(&f);
                    for a in 0..f.len() {
                        qf[(a, a)] += jitter;
                    }
                    let rhs = DVector::from_iterator(f.len(), f.iter().map(|&m| lin[m]));
                    qf.cholesky()?.solve(&rhs)
                };
                if sol.iter().all(|&v| v > 0.0) {
                    theta.iter_mut().for_each(|v| *v = 0.0);
                    for (a, &m) in f.iter().enumerate() {
                        theta[m] = sol[a];
                    }
                    settled = true;
                    break;
                }
                let mut step = 1.0f64;
                for (a, &m) in f.iter().enumerate() {
                    if sol[a] <= 0.0 {
                        step = step.min(theta[m] / (theta[m] - sol[a]));
                    }
                }
                for (a, &m) in f.iter().enumerate() {
                    theta[m] += step * (sol[a] - theta[m]);
                    if theta[m] <= 0.0 || (sol[a] <= 0.0 && theta[m] <= 1e-14 * scale) {
                        theta[m] = 0.0;
                        free[m] = false;
                    }
                }
            }
            if !settled {
                return None;
            }
            let grad = self.gradient(&theta, kappa);
            let worst = (0..mm)
                .filter(|&m| !free[m])
                .min_by(|&a, &b| grad[a].total_cmp(&grad[b]));
            match worst {
                Some(m) if grad[m] < -1e-12 * scale => free[m] = true,
                _ => return Some(theta),
            }
        }
        None
    }
}

pub fn lasso_theta(
    z: &DVector<f64>,
    g: &DMatrix<f64>,
    r: &[f64],
    kappa: f64,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidConfig(format!("kappa must be non-negative, got {kappa}")));
    }
    Ok(LassoProblem::new(z, g, r)?.solve(kappa, warm))
}

pub fn lasso_objective(z: &DVector<f64>, g: &DMatrix<f64>, r: &[f64], kappa: f64, theta: &[f64]) -> f64 {
    let e = z - g * DVector::from_column_slice(theta);
    let n = z.len() as f64;
    e.iter().zip(r).map(|(ei, ri)| ri * ei * ei).sum::<f64>() / n + kappa * theta.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_design_clips() {
        let g = DMatrix::identity(3, 3);
        let z = DVector::from_vec(vec![1.5, -0.4, 0.2]);
        let th = lasso_theta(&z, &g, &[1.0; 3], 0.0, None).unwrap();
        assert!((th[0] - 1.5).abs() < 1e-12);
        assert_eq!(th[1], 0.0);
        assert!((th[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn huge_kappa_zeroes() {
        let g = DMatrix::from_fn(5, 2, |i, j| (i + j) as f64);
        let z = DVector::from_fn(5, |i, _| i as f64);
        let th = lasso_theta(&z, &g, &[1.0; 5], 1e9, None).unwrap();
        assert_eq!(th, vec![0.0, 0.0]);
    }
}
