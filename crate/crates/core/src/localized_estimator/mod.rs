//! Localized kernel ODE estimator.

pub mod design;
pub mod fit;
pub mod lasso;
pub mod predict;
pub mod quadrature;
pub mod ridge;
pub mod weights;

pub use design::{assemble_sigma, assemble_sigma_from_gram, CoordKernel, Design, DesignConfig};
pub use fit::{fit_pair, FitConfig, LocalSolution, LocalizedFit, PairProblem};
pub use lasso::{lasso_objective, lasso_theta, LassoProblem};
pub use predict::{estimate_theta0, predict_f, HFunctional};
pub use quadrature::Quadrature;
pub use ridge::{ridge_objective, solve_weighted_ridge, RidgeSolution};
pub use weights::{default_bandwidth, epanechnikov, local_weights, LocalWeights};

use crate::error::Result;
use crate::ode_systems::TrajectoryData;

/// Smooths `data`, assembles the design and fits pair `(j, k)` over `grid`.
pub fn fit_localized(
    data: &TrajectoryData,
    j: usize,
    k: usize,
    grid: &[f64],
    design_cfg: &DesignConfig,
    fit_cfg: &FitConfig,
) -> Result<(Design, LocalizedFit)> {
    fit_localized_multi(std::slice::from_ref(data), j, k, grid, design_cfg, fit_cfg)
}

/// Same as [`fit_localized`] with the loss averaged over experiments that
/// share their observation times.
pub fn fit_localized_multi(
    data: &[TrajectoryData],
    j: usize,
    k: usize,
    grid: &[f64],
    design_cfg: &DesignConfig,
    fit_cfg: &FitConfig,
) -> Result<(Design, LocalizedFit)> {
    let design = Design::new(data, design_cfg)?;
    let fit = fit_pair(&design, j, k, grid, fit_cfg)?;
    Ok((design, fit))
}
