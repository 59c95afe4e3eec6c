//! Single-data-set entry points writing plot-ready CSV files.

use std::io::Write;
use std::path::Path;

use super::config::ExperimentConfig;
use super::metrics::sig6;
use crate::error::Result;
use crate::inference::{analyze_pair, recover_network, NetworkEstimate, PairAnalysis};
use crate::localized_estimator::fit::{fit_pair, LocalizedFit};
use crate::localized_estimator::Design;
use crate::ode_systems::TrajectoryData;
use crate::seeds::derive_seed;

/// Writes `t0, center, lower, upper` in original units.
pub fn write_band_csv<W: Write>(a: &PairAnalysis, offset: f64, w: W) -> Result<()> {
    let band = a.band_original_units();
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t0", "center", "lower", "upper"])?;
    let (lo, hi) = (band.lower(), band.upper());
    for g in 0..band.grid.len() {
        let t = offset + a.fit.time_scale * band.grid[g];
        wr.write_record([t.to_string(), band.center[g].to_string(), lo[g].to_string(), hi[g].to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_network_csv<W: Write>(net: &NetworkEstimate, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["j", "k", "statistic", "p_value", "selected"])?;
    for j in 0..net.p {
        for k in 0..net.p {
            if j == k {
                continue;
            }
            let stat = net.statistics[j][k].map_or("NA".into(), |v| v.to_string());
            let pv = net.p_values[j][k].map_or("NA".into(), |v| v.to_string());
            let sel = net.selected.contains(&(j, k)) as u8;
            wr.write_record([(j + 1).to_string(), (k + 1).to_string(), stat, pv, sel.to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}

fn summary(a: &PairAnalysis, area: f64) -> String {
    format!(
        "pair = {}-{}\nh = {}\neta = {}\nkappa = {}\nsigma_j = {}\ncritical_value = {}\nstatistic = {}\np_value = {}\nband_area = {}\nconverged = {}\n",
        a.fit.j + 1,
        a.fit.k + 1,
        a.fit.tuning.h,
        a.fit.tuning.eta,
        a.fit.tuning.kappa,
        a.sigma_j,
        a.band.critical_value,
        a.test.statistic,
        a.test.p_value,
        sig6(Some(area)),
        a.fit.converged,
    )
}

/// Fits one pair (1-based) and writes `band.csv`, `fit.json` and `summary.txt` into `dir`.
pub fn run_single(cfg: &ExperimentConfig, pair: (usize, usize), data: &TrajectoryData, dir: &Path) -> Result<PairAnalysis> {
    let (j, k) = (pair.0 - 1, pair.1 - 1);
    let design = Design::new(std::slice::from_ref(data), &cfg.design)?;
    let a = analyze_pair(&design, j, k, &cfg.grid(), &cfg.fit, &cfg.inference, derive_seed(cfg.seed, &[2, j as u64, k as u64]))?;
    std::fs::create_dir_all(dir)?;
    write_band_csv(&a, data.time_offset, std::fs::File::create(dir.join("band.csv"))?)?;
    std::fs::write(dir.join("fit.json"), a.fit.to_json()?)?;
    let area = a.band_original_units().area(super::experiments::AREA_POINTS);
    std::fs::write(dir.join("summary.txt"), summary(&a, area))?;
    Ok(a)
}

/// Writes `t0, alpha, alpha_centered` with slopes in original units.
pub fn write_alpha_csv<W: Write>(fit: &LocalizedFit, offset: f64, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t0", "alpha", "alpha_centered"])?;
    for g in 0..fit.grid.len() {
        let t = offset + fit.time_scale * fit.grid[g];
        let a = fit.alpha_raw[g] / fit.time_scale;
        let c = fit.alpha_centered[g] / fit.time_scale;
        wr.write_record([t.to_string(), a.to_string(), c.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Point fit of one pair (1-based) without inference; writes `fit.json` and `alpha.csv`.
pub fn run_fit(cfg: &ExperimentConfig, pair: (usize, usize), data: &TrajectoryData, dir: &Path) -> Result<LocalizedFit> {
    let (j, k) = (pair.0 - 1, pair.1 - 1);
    let design = Design::new(std::slice::from_ref(data), &cfg.design)?;
    let fit = fit_pair(&design, j, k, &cfg.grid(), &cfg.fit)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("fit.json"), fit.to_json()?)?;
    write_alpha_csv(&fit, data.time_offset, std::fs::File::create(dir.join("alpha.csv"))?)?;
    Ok(fit)
}

/// Tests every ordered pair with BH selection; writes `network.csv`.
pub fn run_network(cfg: &ExperimentConfig, data: &TrajectoryData, dir: &Path) -> Result<NetworkEstimate> {
    let design = Design::new(std::slice::from_ref(data), &cfg.design)?;
    let net = recover_network(&design, &cfg.grid(), &cfg.fit, &cfg.inference, derive_seed(cfg.seed, &[3]));
    std::fs::create_dir_all(dir)?;
    write_network_csv(&net, std::fs::File::create(dir.join("network.csv"))?)?;
    Ok(net)
}
