//! Simulation designs for the benchmark experiments.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Result;
use crate::ode_systems::{integrate, observe, uniform_times, LotkaVolterra, Nfblb, TrajectoryData};
use crate::seeds::derive_seed;

pub const SUBSTEPS: usize = 10;

/// One simulated NFBLB replication.
#[derive(Debug, Clone)]
pub struct NfblbRun {
    pub data: TrajectoryData,
    pub input: f64,
}

/// `t_i = (i - 1) / 20`, `x(0) = 0`, input drawn from `U[0.5, 1.5]`.
pub fn simulate_nfblb(n: usize, sigma: f64, seed: u64) -> Result<NfblbRun> {
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, &[0]));
    let input = rng.gen_range(0.5..1.5);
    let times: Vec<f64> = (0..n).map(|i| i as f64 / 20.0).collect();
    let truth = integrate(&Nfblb::new(input), &[0.0; 3], &times, SUBSTEPS)?;
    let data = observe(&times, &truth, sigma, derive_seed(seed, &[1]))?;
    Ok(NfblbRun { data, input })
}

/// Part of `F_j` that involves `x_k` (0-based), original time units.
pub fn nfblb_effect(j: usize, k: usize, x: &[f64]) -> f64 {
    match (j, k) {
        (1, 2) => 10.0 * (1.0 - x[1]) * x[2] / (1.1 - x[1]),
        (2, 0) => 10.0 * x[0] * (1.0 - x[2]) / (1.1 - x[2]),
        (2, 1) => -10.0 * x[1] * x[2] / (x[2] + 0.1),
        _ => 0.0,
    }
}

/// True effect on the standardized grid, centered over the grid.
pub fn nfblb_true_effect(run: &NfblbRun, j: usize, k: usize, grid: &[f64]) -> Result<Vec<f64>> {
    let raw: Vec<f64> = grid
        .iter()
        .map(|g| run.data.time_offset + run.data.time_scale * g)
        .collect();
    let states = states_on(&Nfblb::new(run.input), &[0.0; 3], &raw)?;
    let vals: Vec<f64> = states
        .row_iter()
        .map(|r| nfblb_effect(j, k, &r.iter().copied().collect::<Vec<_>>()))
        .collect();
    Ok(crate::localized_estimator::fit::center(&vals))
}

fn states_on<S: crate::ode_systems::OdeSystem>(sys: &S, x0: &[f64], raw: &[f64]) -> Result<DMatrix<f64>> {
    if raw[0] > 0.0 {
        let mut with0 = vec![0.0];
        with0.extend_from_slice(raw);
        let full = integrate(sys, x0, &with0, SUBSTEPS)?;
        Ok(full.rows(1, raw.len()).into_owned())
    } else {
        integrate(sys, x0, raw, SUBSTEPS)
    }
}

/// Lotka-Volterra with `p / 2` pairs from `x(0) = 1` on `n` points over `[0, t_end]`.
pub fn simulate_lv(p: usize, n: usize, t_end: f64, sigma: f64, seed: u64) -> Result<TrajectoryData> {
    let times = uniform_times(0.0, t_end, n);
    let truth = integrate(&LotkaVolterra::new(p / 2), &vec![1.0; p], &times, SUBSTEPS)?;
    observe(&times, &truth, sigma, derive_seed(seed, &[1]))
}

/// Directed edges `(j, k)` (0-based, `x_k` enters `F_j`) of the LV system.
pub fn lv_true_edges(p: usize) -> Vec<(usize, usize)> {
    (0..p / 2)
        .flat_map(|m| [(2 * m, 2 * m + 1), (2 * m + 1, 2 * m)])
        .collect()
}
