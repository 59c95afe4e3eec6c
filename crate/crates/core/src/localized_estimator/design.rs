//! Shared precomputation for one data set: smoothed trajectories on the
//! quadrature grid and the per-component integral kernel matrices
//! `Sigma^c[i, i'] = int int (T_i - Tbar)(t) K_c(x(t), x(s)) (T_i' - Tbar)(s) ds dt`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{default_nodes, Quadrature};
use crate::error::{Error, Result};
use crate::kernels::{Component, CompositeKernel, ComponentLayout, KernelSpec};
use crate::ode_systems::TrajectoryData;
use crate::smoothing::{smooth_trajectory, SmoothedTrajectory, SmootherConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordKernel {
    /// Matern-3/2 with length-scale `range(x_l)`.
    Matern,
    /// `(a - mean)(b - mean)` with the mean of the smoothed coordinate.
    Linear,
}

/// Kernel matrices of all main effects and unordered pairs on the stacked grid.
#[derive(Debug, Clone)]
pub struct ComponentSigmas {
    p: usize,
    mains: Vec<DMatrix<f64>>,
    pairs: Vec<Option<DMatrix<f64>>>,
}

impl ComponentSigmas {
    pub fn get(&self, c: Component) -> &DMatrix<f64> {
        match c {
            Component::Main(l) => &self.mains[l],
            Component::Pair(l, r) => {
                let (a, b) = (l.min(r), l.max(r));
                self.pairs[a * self.p + b]
                    .as_ref()
                    .expect("pair components were not assembled")
            }
        }
    }

    pub fn has_pairs(&self) -> bool {
        self.pairs.iter().any(Option::is_some)
    }

    /// `sum_c theta_c Sigma^c` restricted to `idx x idx`.
    pub fn combine(&self, layout: &ComponentLayout, theta: &[f64], idx: &[usize]) -> DMatrix<f64> {
        self.combine_rect(layout, theta, idx, idx)
    }

    /// `sum_c theta_c Sigma^c` restricted to `rows x cols`.
    pub fn combine_rect(&self, layout: &ComponentLayout, theta: &[f64], rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        for (c, &th) in layout.components().iter().zip(theta) {
            if th == 0.0 {
                continue;
            }
            let s = self.get(*c);
            for (b, &jb) in cols.iter().enumerate() {
                for (a, &ia) in rows.iter().enumerate() {
                    out[(a, b)] += th * s[(ia, jb)];
                }
            }
        }
        out
    }

    /// Columns `Sigma^c_{idx, idx} c_idx`, one per component of `layout`.
    pub fn g_matrix(&self, layout: &ComponentLayout, c_w: &DVector<f64>, idx: &[usize]) -> DMatrix<f64> {
        let w = idx.len();
        let mut g = DMatrix::zeros(w, layout.len());
        for (m, comp) in layout.components().iter().enumerate() {
            let s = self.get(*comp);
            for b in 0..w {
                let cb = c_w[b];
                if cb == 0.0 {
                    continue;
                }
                for a in 0..w {
                    g[(a, m)] += s[(idx[a], idx[b])] * cb;
                }
            }
        }
        g
    }
}

/// Everything shared by the fits of all `(j, k)` pairs of one data set.
#[derive(Debug, Clone)]
pub struct Design {
    pub times: Vec<f64>,
    pub experiments: usize,
    pub p: usize,
    pub quad: Quadrature,
    pub smoothed: Vec<SmoothedTrajectory>,
    /// Smoothed states on the quadrature nodes, `m x p` per experiment.
    pub grid_states: Vec<DMatrix<f64>>,
    pub coords: Vec<KernelSpec>,
    pub sigmas: ComponentSigmas,
    pub obs: Vec<DMatrix<f64>>,
    pub time_scale: f64,
    /// Stacked `t_i - mean(t)`.
    pub tbar: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    pub smoother: SmootherConfig,
    pub coord_kernel: CoordKernel,
    pub interactions: bool,
    /// Quadrature nodes; `None` means `max(200, 5n)`.
    pub quad_nodes: Option<usize>,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            smoother: SmootherConfig::default(),
            coord_kernel: CoordKernel::Matern,
            interactions: true,
            quad_nodes: None,
        }
    }
}

impl Design {
    pub fn new(data: &[TrajectoryData], cfg: &DesignConfig) -> Result<Self> {
        let smoothed = data
            .iter()
            .map(|d| smooth_trajectory(d, &cfg.smoother))
            .collect::<Result<Vec<_>>>()?;
        Self::from_smoothed(data, smoothed, cfg)
    }

    pub fn from_smoothed(data: &[TrajectoryData], smoothed: Vec<SmoothedTrajectory>, cfg: &DesignConfig) -> Result<Self> {
        let first = data
            .first()
            .ok_or_else(|| Error::InvalidConfig("no experiments supplied".into()))?;
        let (n, p) = (first.n(), first.p());
        for d in data {
            if d.n() != n || d.p() != p || d.times != first.times {
                return Err(Error::InvalidConfig(
                    "experiments must share times and dimension".into(),
                ));
            }
        }
        if smoothed.len() != data.len() {
            return Err(Error::ShapeMismatch("one smoothed trajectory per experiment".into()));
        }
        let m = cfg.quad_nodes.unwrap_or_else(|| default_nodes(n));
        let quad = Quadrature::new(&first.times, m)?;
        let grid_states: Vec<DMatrix<f64>> = smoothed.iter().map(|s| s.eval_grid(&quad.nodes)).collect();
        let coords = coordinate_kernels(&grid_states, data, &smoothed, cfg.coord_kernel);
        let sigmas = assemble_components(&quad, &grid_states, &coords, cfg.interactions);
        let s = data.len();
        let t1 = quad.tbar();
        let tbar = DVector::from_iterator(n * s, (0..s).flat_map(|_| t1.iter().copied()));
        Ok(Self {
            times: first.times.clone(),
            experiments: s,
            p,
            quad,
            smoothed,
            grid_states,
            coords,
            sigmas,
            obs: data.iter().map(|d| d.obs.clone()).collect(),
            time_scale: first.time_scale,
            tbar,
        })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn n_total(&self) -> usize {
        self.n() * self.experiments
    }

    /// Stacked `y_j - mean(y_j)` (per experiment).
    pub fn centered_response(&self, j: usize) -> DVector<f64> {
        let n = self.n();
        let mut u = DVector::zeros(self.n_total());
        for (s, y) in self.obs.iter().enumerate() {
            let col = y.column(j);
            let mean = col.mean();
            for i in 0..n {
                u[s * n + i] = col[i] - mean;
            }
        }
        u
    }

    /// Per-experiment mean of `y_j`.
    pub fn response_means(&self, j: usize) -> Vec<f64> {
        self.obs.iter().map(|y| y.column(j).mean()).collect()
    }

    pub fn composite(&self, theta: crate::kernels::ThetaWeights) -> Result<CompositeKernel> {
        CompositeKernel::new(self.coords.clone(), theta)
    }

    /// `(D c)_s` on the stacked grid: the weights of `H(x) = sum_s b_s K(x, x(s))`.
    pub fn grid_coefficients(&self, c: &DVector<f64>) -> Vec<DVector<f64>> {
        let d = self.quad.centered_weights();
        let n = self.n();
        (0..self.experiments)
            .map(|s| &d * c.rows(s * n, n))
            .collect()
    }
}

fn coordinate_kernels(
    grid_states: &[DMatrix<f64>],
    data: &[TrajectoryData],
    smoothed: &[SmoothedTrajectory],
    kind: CoordKernel,
) -> Vec<KernelSpec> {
    let p = grid_states[0].ncols();
    (0..p)
        .map(|l| match kind {
            CoordKernel::Matern => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for g in grid_states {
                    for v in g.column(l).iter() {
                        lo = lo.min(*v);
                        hi = hi.max(*v);
                    }
                }
                KernelSpec::Matern32 { nu: (hi - lo).max(1e-3) }
            }
            CoordKernel::Linear => {
                let mut sum = 0.0;
                let mut cnt = 0.0;
                for (d, sm) in data.iter().zip(smoothed) {
                    for t in &d.times {
                        sum += sm.coords[l].eval(*t);
                        cnt += 1.0;
                    }
                }
                KernelSpec::CenteredLinear { center: sum / cnt }
            }
        })
        .collect()
}

/// Kernel matrix of coordinate `l` between the grids of experiments `a` and `b`.
fn coord_gram(grid_states: &[DMatrix<f64>], coords: &[KernelSpec], l: usize, a: usize, b: usize) -> DMatrix<f64> {
    let xa = grid_states[a].column(l);
    let xb = grid_states[b].column(l);
    DMatrix::from_fn(xa.len(), xb.len(), |i, j| coords[l].eval(xa[i], xb[j]))
}

fn stacked_sandwich(quad: &Quadrature, blocks: &dyn Fn(usize, usize) -> DMatrix<f64>, s: usize) -> DMatrix<f64> {
    let n = quad.n();
    let mut out = DMatrix::zeros(n * s, n * s);
    for a in 0..s {
        for b in a..s {
            let blk = quad.sandwich_cross(&blocks(a, b));
            out.view_mut((a * n, b * n), (n, n)).copy_from(&blk);
            if a != b {
                out.view_mut((b * n, a * n), (n, n)).copy_from(&blk.transpose());
            }
        }
    }
    out
}

pub fn assemble_components(
    quad: &Quadrature,
    grid_states: &[DMatrix<f64>],
    coords: &[KernelSpec],
    pairs: bool,
) -> ComponentSigmas {
    let p = coords.len();
    let s = grid_states.len();
    let grams: Vec<Vec<DMatrix<f64>>> = (0..p)
        .into_par_iter()
        .map(|l| {
            let mut v = Vec::new();
            for a in 0..s {
                for b in a..s {
                    v.push(coord_gram(grid_states, coords, l, a, b));
                }
            }
            v
        })
        .collect();
    let block_index = |a: usize, b: usize| -> usize {
        // position of (a, b), a <= b, in the upper-triangular enumeration
        (0..a).map(|r| s - r).sum::<usize>() + (b - a)
    };
    let mains: Vec<DMatrix<f64>> = (0..p)
        .into_par_iter()
        .map(|l| stacked_sandwich(quad, &|a, b| grams[l][block_index(a, b)].clone(), s))
        .collect();
    let mut pair_list = Vec::new();
    if pairs {
        for l in 0..p {
            for r in l + 1..p {
                pair_list.push((l, r));
            }
        }
    }
    let built: Vec<((usize, usize), DMatrix<f64>)> = pair_list
        .into_par_iter()
        .map(|(l, r)| {
            let m = stacked_sandwich(
                quad,
                &|a, b| grams[l][block_index(a, b)].component_mul(&grams[r][block_index(a, b)]),
                s,
            );
            ((l, r), m)
        })
        .collect();
    let mut pair_mats = vec![None; p * p];
    for ((l, r), m) in built {
        pair_mats[l * p + r] = Some(m);
    }
    ComponentSigmas {
        p,
        mains,
        pairs: pair_mats,
    }
}

/// `Sigma_theta` for a composite kernel evaluated directly on one grid.
pub fn assemble_sigma(quad: &Quadrature, grid_states: &DMatrix<f64>, kernel: &CompositeKernel) -> DMatrix<f64> {
    quad.sandwich(&kernel.gram(grid_states, grid_states))
}

/// `D' K D` for an arbitrary kernel matrix on the nodes.
pub fn assemble_sigma_from_gram(quad: &Quadrature, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if k.shape() != (quad.m(), quad.m()) {
        return Err(Error::ShapeMismatch("kernel matrix must be m x m".into()));
    }
    Ok(quad.sandwich(k))
}
