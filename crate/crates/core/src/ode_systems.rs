//! Reference ODE systems, fixed-step integration and noisy observation.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Autonomous or input-driven vector field.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()>;
}

const SINGULAR_TOL: f64 = 1e-12;

/// Negative-feedback loop with buffering, driven by a constant input.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Nfblb {
    pub input: f64,
}

impl Nfblb {
    pub fn new(input: f64) -> Self {
        Self { input }
    }
}

/// Evaluates the three-node negative-feedback right-hand side.
pub fn nfblb_rhs(x: &[f64], input: f64) -> Result<[f64; 3]> {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let dens = [
        (1.0 - x1) + 0.1,
        x1 + 0.1,
        (1.0 - x2) + 0.1,
        x2 + 0.1,
        (1.0 - x3) + 0.1,
        x3 + 0.1,
    ];
    if dens.iter().any(|d| d.abs() < SINGULAR_TOL) {
        return Err(Error::Singularity(x.to_vec()));
    }
    Ok([
        10.0 * input * (1.0 - x1) / dens[0] - 10.0 * x1 / dens[1],
        10.0 * (1.0 - x2) * x3 / dens[2] - 0.2 * x2 / dens[3],
        10.0 * x1 * (1.0 - x3) / dens[4] - 10.0 * x2 * x3 / dens[5],
    ])
}

impl OdeSystem for Nfblb {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx.copy_from_slice(&nfblb_rhs(x, self.input)?);
        Ok(())
    }
}

/// Coupled predator-prey pairs; pair j uses the j-th coefficient set.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LotkaVolterra {
    pub pairs: usize,
}

impl LotkaVolterra {
    pub fn new(pairs: usize) -> Self {
        Self { pairs }
    }
}

pub fn lotka_volterra_rhs(x: &[f64], dx: &mut [f64]) -> Result<()> {
    if !x.len().is_multiple_of(2) || dx.len() != x.len() {
        return Err(Error::ShapeMismatch(format!(
            "Lotka-Volterra state must have even length, got {}",
            x.len()
        )));
    }
    for j in 0..x.len() / 2 {
        let jj = (j + 1) as f64;
        let (a, b) = (x[2 * j], x[2 * j + 1]);
        dx[2 * j] = 0.1 * (2.0 * jj + 11.0) * a - 0.2 * (jj + 1.0) * a * b;
        dx[2 * j + 1] = 0.1 * (2.0 * jj - 1.0) * a * b - 0.2 * (jj + 1.0) * b;
    }
    Ok(())
}

impl OdeSystem for LotkaVolterra {
    fn dim(&self) -> usize {
        2 * self.pairs
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        lotka_volterra_rhs(x, dx)
    }
}

/// Wraps an infallible closure as a system.
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        (self.f)(t, x, dx);
        Ok(())
    }
}

/// Classical RK4 with `substeps` equal steps per grid interval.
/// Returns an `n x p` matrix of states at the grid points.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    grid: &[f64],
    substeps: usize,
) -> Result<DMatrix<f64>> {
    let p = sys.dim();
    if x0.len() != p {
        return Err(Error::ShapeMismatch(format!(
            "initial state has length {}, system dimension is {p}",
            x0.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty time grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "time grid must be strictly increasing".into(),
        ));
    }
    let substeps = substeps.max(1);
    let mut out = DMatrix::zeros(grid.len(), p);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; p], vec![0.0; p], vec![0.0; p], vec![0.0; p]);
    let mut tmp = vec![0.0; p];
    for (c, v) in x.iter().enumerate() {
        out[(0, c)] = *v;
    }
    for i in 1..grid.len() {
        let h = (grid[i] - grid[i - 1]) / substeps as f64;
        let mut t = grid[i - 1];
        for _ in 0..substeps {
            sys.rhs(t, &x, &mut k1)?;
            for c in 0..p {
                tmp[c] = x[c] + 0.5 * h * k1[c];
            }
            sys.rhs(t + 0.5 * h, &tmp, &mut k2)?;
            for c in 0..p {
                tmp[c] = x[c] + 0.5 * h * k2[c];
            }
            sys.rhs(t + 0.5 * h, &tmp, &mut k3)?;
            for c in 0..p {
                tmp[c] = x[c] + h * k3[c];
            }
            sys.rhs(t + h, &tmp, &mut k4)?;
            for c in 0..p {
                x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            t += h;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationBlowup { time: t });
            }
        }
        for c in 0..p {
            out[(i, c)] = x[c];
        }
    }
    Ok(out)
}

/// Observations of one experiment on a standardized time axis.
///
/// `times` lie in [0, 1]; original time is `time_offset + time_scale * t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryData {
    pub times: Vec<f64>,
    pub obs: DMatrix<f64>,
    pub truth: Option<DMatrix<f64>>,
    pub noise_sd: Option<f64>,
    pub time_offset: f64,
    pub time_scale: f64,
}

impl TrajectoryData {
    /// Builds a data set from raw times, mapping `[t_1, t_n]` onto `[0, 1]`.
    pub fn from_raw(
        raw_times: &[f64],
        obs: DMatrix<f64>,
        truth: Option<DMatrix<f64>>,
        noise_sd: Option<f64>,
    ) -> Result<Self> {
        let n = raw_times.len();
        if n < 2 {
            return Err(Error::InvalidConfig("need at least two time points".into()));
        }
        if obs.nrows() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} times but {} observation rows",
                n,
                obs.nrows()
            )));
        }
        if let Some(x) = &truth {
            if x.shape() != obs.shape() {
                return Err(Error::ShapeMismatch("truth and observations differ in shape".into()));
            }
        }
        if raw_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("times must be strictly increasing".into()));
        }
        let offset = raw_times[0];
        let scale = raw_times[n - 1] - offset;
        let times = raw_times.iter().map(|t| (t - offset) / scale).collect();
        Ok(Self {
            times,
            obs,
            truth,
            noise_sd,
            time_offset: offset,
            time_scale: scale,
        })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.obs.ncols()
    }

    pub fn raw_times(&self) -> Vec<f64> {
        self.times
            .iter()
            .map(|t| self.time_offset + self.time_scale * t)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let p = self.p();
        let mut header = vec!["t".to_string()];
        header.extend((1..=p).map(|c| format!("y{c}")));
        if self.truth.is_some() {
            header.extend((1..=p).map(|c| format!("x{c}")));
        }
        wr.write_record(&header)?;
        for (i, t) in self.raw_times().iter().enumerate() {
            let mut row = vec![format!("{t:.17e}")];
            row.extend((0..p).map(|c| format!("{:.17e}", self.obs[(i, c)])));
            if let Some(x) = &self.truth {
                row.extend((0..p).map(|c| format!("{:.17e}", x[(i, c)])));
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `t,y1..yp[,x1..xp]`; columns are located by name.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let find = |name: &str| header.iter().position(|h| h == name);
        let indexed = |prefix: char| -> usize {
            header
                .iter()
                .filter_map(|h| h.strip_prefix(prefix).and_then(|d| d.parse::<usize>().ok()))
                .max()
                .unwrap_or(0)
        };
        let need = |name: String| find(&name).ok_or_else(|| Error::Parse(format!("missing column {name}")));
        let t_col = need("t".into())?;
        let p = indexed('y');
        if p == 0 {
            return Err(Error::Parse("missing column y1".into()));
        }
        let ys = (1..=p).map(|c| need(format!("y{c}"))).collect::<Result<Vec<_>>>()?;
        let xs = if indexed('x') > 0 {
            (1..=p).map(|c| need(format!("x{c}"))).collect::<Result<Vec<_>>>()?
        } else {
            vec![]
        };
        let mut times = Vec::new();
        let mut yv = Vec::new();
        let mut xv = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let get = |c: usize| -> Result<f64> {
                let cell = rec
                    .get(c)
                    .ok_or_else(|| Error::Parse(format!("row {}, column {}: missing value", row + 1, header[c])))?;
                cell.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("row {}, column {}: {e} ({cell:?})", row + 1, header[c]))
                })
            };
            times.push(get(t_col)?);
            for &c in &ys {
                yv.push(get(c)?);
            }
            for &c in &xs {
                xv.push(get(c)?);
            }
        }
        let n = times.len();
        let obs = DMatrix::from_row_slice(n, ys.len(), &yv);
        let truth = (!xs.is_empty()).then(|| DMatrix::from_row_slice(n, xs.len(), &xv));
        Self::from_raw(&times, obs, truth, None)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Adds i.i.d. Gaussian noise to a noiseless trajectory.
pub fn observe(raw_times: &[f64], truth: &DMatrix<f64>, sigma: f64, seed: u64) -> Result<TrajectoryData> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise sd must be non-negative, got {sigma}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut obs = truth.clone();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for v in obs.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    TrajectoryData::from_raw(raw_times, obs, Some(truth.clone()), Some(sigma))
}

/// Evenly spaced grid `start, start + step, ...` with `n` points.
pub fn uniform_times(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    (0..n)
        .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
        .collect()
}
