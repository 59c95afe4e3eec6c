//! Kernel ridge smoothing of each observed coordinate with GCV-selected
//! penalty and cross-validated length-scale.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::ode_systems::TrajectoryData;

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SmootherKernel {
    /// Matern-3/2 with length-scale chosen by K-fold CV over `multipliers * range(t)`.
    MaternCv { multipliers: Vec<f64>, folds: usize },
    Fixed { kernel: KernelSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmootherConfig {
    pub kernel: SmootherKernel,
    pub lambda_grid: Vec<f64>,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            kernel: SmootherKernel::MaternCv {
                multipliers: vec![0.1, 0.3, 1.0, 3.0, 10.0],
                folds: 10,
            },
            lambda_grid: log_grid(1e-8, 1e2, 25),
        }
    }
}

/// `n ||(I - A) y||^2 / tr(I - A)^2`.
pub fn gcv_score(y: &DVector<f64>, a: &DMatrix<f64>) -> Result<f64> {
    let n = y.len();
    if a.shape() != (n, n) {
        return Err(Error::ShapeMismatch("hat matrix must be n x n".into()));
    }
    let resid = y - a * y;
    let tr = n as f64 - a.trace();
    if tr.abs() < 1e-12 * n as f64 {
        return Err(Error::DegenerateSmoother("tr(I - A) is zero".into()));
    }
    Ok(n as f64 * resid.norm_squared() / (tr * tr))
}

/// Fitted smoother of one coordinate: `x(t) = sum_i coef_i K(t, t_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smoother1d {
    pub times: Vec<f64>,
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub coef: Vec<f64>,
    pub gcv: f64,
}

impl Smoother1d {
    pub fn eval(&self, t: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.coef)
            .map(|(ti, c)| c * self.kernel.eval(t, *ti))
            .sum()
    }
}

struct Spectral {
    vals: DVector<f64>,
    vecs: DMatrix<f64>,
}

impl Spectral {
    fn new(k: DMatrix<f64>) -> Self {
        let e = SymmetricEigen::new(k);
        let vals = e.eigenvalues.map(|v| v.max(0.0));
        Self {
            vals,
            vecs: e.eigenvectors,
        }
    }
}

/// Fits `c = (K + n lambda I)^{-1} y` with lambda chosen by GCV from the grid.
/// Ties go to the larger lambda.
pub fn fit_smoother(times: &[f64], y: &[f64], kernel: &KernelSpec, lambda_grid: &[f64]) -> Result<Smoother1d> {
    let n = times.len();
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!("{} times, {} values", n, y.len())));
    }
    if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidConfig("lambda grid must be non-empty and positive".into()));
    }
    kernel.validate()?;
    let spec = Spectral::new(kernel.gram(times, times));
    if spec.vals.max() <= 0.0 {
        return Err(Error::DegenerateSmoother("kernel matrix is zero".into()));
    }
    let yv = DVector::from_column_slice(y);
    let proj = spec.vecs.transpose() * &yv;
    let nf = n as f64;
    let mut grid: Vec<f64> = lambda_grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    let mut best: Option<(f64, f64)> = None;
    for &lam in &grid {
        let mut rss = 0.0;
        let mut tr = 0.0;
        for i in 0..n {
            let keep = nf * lam / (spec.vals[i] + nf * lam);
            rss += (keep * proj[i]).powi(2);
            tr += keep;
        }
        if tr < 1e-12 * nf {
            continue;
        }
        let score = nf * rss / (tr * tr);
        match best {
            Some((b, _)) if score > b * (1.0 + 1e-12) => {}
            _ => best = Some((score, lam)),
        }
    }
    let (gcv, lambda) = best.ok_or_else(|| Error::DegenerateSmoother("tr(I - A) is zero on the whole grid".into()))?;
    let scaled = DVector::from_fn(n, |i, _| proj[i] / (spec.vals[i] + nf * lambda));
    let coef = &spec.vecs * scaled;
    Ok(Smoother1d {
        times: times.to_vec(),
        kernel: *kernel,
        lambda,
        coef: coef.iter().copied().collect(),
        gcv,
    })
}

fn cv_error(times: &[f64], y: &[f64], kernel: &KernelSpec, lambda: f64, folds: usize) -> f64 {
    let n = times.len();
    let mut err = 0.0;
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != f).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % folds == f).collect();
        if train.is_empty() || test.is_empty() {
            continue;
        }
        let tt: Vec<f64> = train.iter().map(|&i| times[i]).collect();
        let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let mut k = kernel.gram(&tt, &tt);
        let nl = train.len() as f64 * lambda;
        for i in 0..train.len() {
            k[(i, i)] += nl;
        }
        let Some(ch) = k.cholesky() else {
            return f64::INFINITY;
        };
        let c = ch.solve(&yt);
        for &i in &test {
            let pred: f64 = tt.iter().zip(c.iter()).map(|(s, ci)| ci * kernel.eval(times[i], *s)).sum();
            err += (y[i] - pred).powi(2);
        }
    }
    err
}

/// Smooths a single coordinate according to `cfg`.
pub fn smooth_coordinate(times: &[f64], y: &[f64], cfg: &SmootherConfig) -> Result<Smoother1d> {
    match &cfg.kernel {
        SmootherKernel::Fixed { kernel } => fit_smoother(times, y, kernel, &cfg.lambda_grid),
        SmootherKernel::MaternCv { multipliers, folds } => {
            if multipliers.is_empty() || *folds < 2 {
                return Err(Error::InvalidConfig("length-scale CV needs multipliers and >= 2 folds".into()));
            }
            let range = times.last().unwrap_or(&1.0) - times.first().unwrap_or(&0.0);
            let mut best: Option<(f64, Smoother1d)> = None;
            for m in multipliers {
                let kernel = KernelSpec::Matern32 { nu: m * range };
                let fit = fit_smoother(times, y, &kernel, &cfg.lambda_grid)?;
                let e = cv_error(times, y, &kernel, fit.lambda, *folds);
                if best.as_ref().is_none_or(|(b, _)| e < *b) {
                    best = Some((e, fit));
                }
            }
            Ok(best.expect("non-empty multipliers").1)
        }
    }
}

/// Smoothed trajectory of every coordinate of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedTrajectory {
    pub coords: Vec<Smoother1d>,
}

impl SmoothedTrajectory {
    pub fn p(&self) -> usize {
        self.coords.len()
    }

    /// `len(ts) x p` matrix of smoothed states.
    pub fn eval_grid(&self, ts: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(ts.len(), self.p(), |i, l| self.coords[l].eval(ts[i]))
    }

    /// Writes `t,x1..xp` on the standardized evaluation grid `ts`.
    pub fn write_csv<W: std::io::Write>(&self, ts: &[f64], w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.p()).map(|c| format!("x{c}")));
        wr.write_record(&header)?;
        let x = self.eval_grid(ts);
        for (i, t) in ts.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(x.row(i).iter().map(|v| v.to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn smooth_trajectory(data: &TrajectoryData, cfg: &SmootherConfig) -> Result<SmoothedTrajectory> {
    let coords = (0..data.p())
        .map(|l| {
            let y: Vec<f64> = data.obs.column(l).iter().copied().collect();
            smooth_coordinate(&data.times, &y, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SmoothedTrajectory { coords })
}
