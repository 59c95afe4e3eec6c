//! Replicated simulation experiments.

use std::time::Instant;

use rayon::prelude::*;

use super::baselines::{baseline_band, baseline_layout, fit_global};
use super::config::{Baseline, ExperimentConfig, SystemKind};
use super::metrics::{fdp, power, MetricsReport, ReplicationRecord};
use super::sim::{lv_true_edges, nfblb_true_effect, simulate_lv, simulate_nfblb, NfblbRun, SUBSTEPS};
use crate::error::{Error, Result};
use crate::inference::{analyze_network, analyze_pair, network_estimate, PairAnalysis};
use crate::localized_estimator::{CoordKernel, Design, HFunctional};
use crate::ode_systems::{integrate, uniform_times, LotkaVolterra, OdeSystem, TrajectoryData};
use crate::seeds::derive_seed;

pub const LOCALIZED: &str = "localized";
pub const AREA_POINTS: usize = 1000;

fn rep_seed(cfg: &ExperimentConfig, sigma_index: usize, rep: usize) -> u64 {
    derive_seed(cfg.seed, &[sigma_index as u64, rep as u64])
}

/// Runs `f` for every `(sigma, replication)` in parallel and gathers records in order.
fn replicate<F>(cfg: &ExperimentConfig, f: F) -> (Vec<ReplicationRecord>, Vec<(f64, f64)>)
where
    F: Fn(f64, usize, u64) -> Vec<ReplicationRecord> + Sync,
{
    let jobs: Vec<(usize, f64, usize)> = cfg
        .sigmas
        .iter()
        .enumerate()
        .flat_map(|(si, &s)| (0..cfg.replications).map(move |r| (si, s, r)))
        .collect();
    let out: Vec<(Vec<ReplicationRecord>, (f64, f64))> = jobs
        .par_iter()
        .map(|&(si, sigma, rep)| {
            let start = Instant::now();
            let recs = f(sigma, rep, rep_seed(cfg, si, rep));
            (recs, (sigma, start.elapsed().as_secs_f64()))
        })
        .collect();
    let mut records = Vec::new();
    let mut clock = Vec::new();
    for (r, c) in out {
        records.extend(r);
        clock.push(c);
    }
    (records, clock)
}

/// Band experiment on one simulated NFBLB data set.
pub fn table1_replication(cfg: &ExperimentConfig, sigma: f64, rep: usize, seed: u64) -> Vec<ReplicationRecord> {
    let pairs = cfg.pairs.clone();
    let fail_all = |e: &Error| -> Vec<ReplicationRecord> {
        let mut v: Vec<ReplicationRecord> = pairs
            .iter()
            .map(|&p| ReplicationRecord::new(sigma, rep, LOCALIZED, Some(p)).failed(e))
            .collect();
        for b in &cfg.baselines {
            v.extend(pairs.iter().map(|&p| ReplicationRecord::new(sigma, rep, b.name(), Some(p)).failed(e)));
        }
        v
    };
    let run = match simulate_nfblb(cfg.n, sigma, seed) {
        Ok(r) => r,
        Err(e) => return fail_all(&e),
    };
    let design = match Design::new(std::slice::from_ref(&run.data), &cfg.design) {
        Ok(d) => d,
        Err(e) => return fail_all(&e),
    };
    let grid = cfg.grid();
    let mut out = Vec::new();
    for &(j1, k1) in &pairs {
        let rec = ReplicationRecord::new(sigma, rep, LOCALIZED, Some((j1, k1)));
        let (j, k) = (j1 - 1, k1 - 1);
        let res = analyze_pair(&design, j, k, &grid, &cfg.fit, &cfg.inference, derive_seed(seed, &[2, j as u64, k as u64]))
            .and_then(|a| score_band(&run, j, k, &grid, &a.band_original_units()).map(|s| (a, s)));
        out.push(match res {
            Ok((a, (covered, area))) => ReplicationRecord {
                covered: Some(covered),
                area: Some(area),
                p_value: Some(a.test.p_value),
                ..rec
            },
            Err(e) => rec.failed(e),
        });
    }
    for &b in &cfg.baselines {
        out.extend(baseline_records(cfg, &run, &design, b, sigma, rep, &grid));
    }
    out
}

fn score_band(run: &NfblbRun, j: usize, k: usize, grid: &[f64], band: &crate::inference::ConfidenceBand) -> Result<(bool, f64)> {
    let truth = nfblb_true_effect(run, j, k, grid)?;
    Ok((band.covers(&truth), band.area(AREA_POINTS)))
}

fn baseline_records(
    cfg: &ExperimentConfig,
    run: &NfblbRun,
    design: &Design,
    b: Baseline,
    sigma: f64,
    rep: usize,
    grid: &[f64],
) -> Vec<ReplicationRecord> {
    let linear_design;
    let d = if b == Baseline::LinearOde {
        let mut dc = cfg.design.clone();
        dc.coord_kernel = CoordKernel::Linear;
        match Design::from_smoothed(std::slice::from_ref(&run.data), design.smoothed.clone(), &dc) {
            Ok(x) => {
                linear_design = x;
                &linear_design
            }
            Err(e) => {
                return cfg
                    .pairs
                    .iter()
                    .map(|&p| ReplicationRecord::new(sigma, rep, b.name(), Some(p)).failed(&e))
                    .collect()
            }
        }
    } else {
        design
    };
    cfg.pairs
        .iter()
        .map(|&(j1, k1)| {
            let rec = ReplicationRecord::new(sigma, rep, b.name(), Some((j1, k1)));
            let (j, k) = (j1 - 1, k1 - 1);
            let res = fit_global(d, j, baseline_layout(b, d.p), &cfg.fit)
                .and_then(|g| baseline_band(d, &g, b, k, grid, cfg.inference.alpha))
                .and_then(|bb| score_band(run, j, k, grid, &bb.band.rescaled(run.data.time_scale)));
            match res {
                Ok((covered, area)) => ReplicationRecord {
                    covered: Some(covered),
                    area: Some(area),
                    ..rec
                },
                Err(e) => rec.failed(e),
            }
        })
        .collect()
}

/// Coverage and band area for the NFBLB pairs across noise levels.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    if cfg.system != SystemKind::Nfblb {
        return Err(Error::InvalidConfig("bench-table1 requires system = nfblb".into()));
    }
    let (records, clock) = replicate(cfg, |s, r, seed| table1_replication(cfg, s, r, seed));
    Ok(MetricsReport::aggregate("table1", records, clock))
}

/// Baselines only (plus the localized method for matched comparison).
pub fn compare_baselines(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let report = run_table1(cfg)?;
    Ok(MetricsReport::aggregate("baselines", report.replications, report.wall_clock))
}

/// Fitted right-hand side `dx/dt = alpha_j + H_j(x)` on the standardized axis.
pub struct Forecaster {
    pub parts: Vec<(f64, HFunctional)>,
}

impl OdeSystem for Forecaster {
    fn dim(&self) -> usize {
        self.parts.len()
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        for (d, (a, h)) in dx.iter_mut().zip(&self.parts) {
            *d = a + h.eval(x);
        }
        Ok(())
    }
}

/// For every `j`, the pair with the largest p-value supplies the forecast model.
pub fn build_forecaster(design: &Design, analyses: &[PairAnalysis]) -> Result<Forecaster> {
    let parts = (0..design.p)
        .map(|j| {
            let best = analyses
                .iter()
                .filter(|a| a.fit.j == j)
                .max_by(|a, b| a.test.p_value.total_cmp(&b.test.p_value))
                .ok_or_else(|| Error::NoInformation(format!("no fitted pair for x{}", j + 1)))?;
            let g = best.fit.grid.len() - 1;
            Ok((best.fit.alpha_raw[g], HFunctional::from_fit(design, &best.fit, g)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forecaster { parts })
}

pub const FORECAST_POINTS: usize = 10_000;
const FORECAST_STEPS: usize = 1000;

/// `{sum_j int (xhat_j - x_j)^2 dt}^{1/2}` over `[t_end, forecast_end]`.
pub fn forecast_error(design: &Design, analyses: &[PairAnalysis], p: usize, t_end: f64, forecast_end: f64) -> Result<f64> {
    let f = build_forecaster(design, analyses)?;
    let x_start: Vec<f64> = design.smoothed[0].eval_grid(&[1.0]).row(0).iter().copied().collect();
    let tau_end = forecast_end / t_end;
    let coarse = uniform_times(1.0, tau_end, FORECAST_STEPS + 1);
    let pred = integrate(&f, &x_start, &coarse, 4)?;
    let eval = uniform_times(t_end, forecast_end, FORECAST_POINTS);
    let mut grid = uniform_times(0.0, t_end, 2001);
    grid.pop();
    grid.extend_from_slice(&eval);
    let truth_all = integrate(&LotkaVolterra::new(p / 2), &vec![1.0; p], &grid, SUBSTEPS)?;
    let off = grid.len() - FORECAST_POINTS;
    let dt = (forecast_end - t_end) / FORECAST_POINTS as f64;
    let mut total = 0.0;
    for (i, t) in eval.iter().enumerate() {
        let tau = t / t_end;
        for j in 0..p {
            let col: Vec<f64> = pred.column(j).iter().copied().collect();
            let xh = crate::localized_estimator::fit::interp(&coarse, &col, tau);
            total += (xh - truth_all[(off + i, j)]).powi(2) * dt;
        }
    }
    Ok(total.sqrt())
}

/// Network recovery on one simulated LV data set.
pub fn lv_replication(cfg: &ExperimentConfig, sigma: f64, rep: usize, seed: u64) -> Vec<ReplicationRecord> {
    let rec = ReplicationRecord::new(sigma, rep, LOCALIZED, None);
    let res = (|| -> Result<ReplicationRecord> {
        let data = simulate_lv(cfg.p, cfg.n, cfg.t_end, sigma, seed)?;
        let design = Design::new(std::slice::from_ref(&data), &cfg.design)?;
        let results = analyze_network(&design, &cfg.grid(), &cfg.fit, &cfg.inference, derive_seed(seed, &[2]));
        let selected = network_estimate(cfg.p, cfg.inference.fdr_q, &results).selected;
        let analyses: Vec<PairAnalysis> = results.into_iter().filter_map(|(_, r)| r.ok()).collect();
        let truth = lv_true_edges(cfg.p);
        let pe = forecast_error(&design, &analyses, cfg.p, cfg.t_end, cfg.forecast_end).unwrap_or(f64::NAN);
        Ok(ReplicationRecord {
            fdp: Some(fdp(&selected, &truth)),
            power: Some(power(&selected, &truth)),
            prediction_error: Some(pe),
            ..rec.clone()
        })
    })();
    vec![res.unwrap_or_else(|e| rec.failed(e))]
}

/// FDR, power and forecast error of LV network recovery across noise levels.
pub fn run_lv_network(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    if cfg.system != SystemKind::LotkaVolterra {
        return Err(Error::InvalidConfig("bench-lv requires system = lotka-volterra".into()));
    }
    let (records, clock) = replicate(cfg, |s, r, seed| lv_replication(cfg, s, r, seed));
    Ok(MetricsReport::aggregate("lv_network", records, clock))
}

/// Simulates one data set of the configured system.
pub fn simulate(cfg: &ExperimentConfig, sigma: f64, seed: u64) -> Result<TrajectoryData> {
    match cfg.system {
        SystemKind::Nfblb => Ok(simulate_nfblb(cfg.n, sigma, seed)?.data),
        SystemKind::LotkaVolterra => simulate_lv(cfg.p, cfg.n, cfg.t_end, sigma, seed),
        SystemKind::Csv => TrajectoryData::load(cfg.csv_path.as_ref().ok_or_else(|| Error::InvalidConfig("csv_path missing".into()))?),
    }
}

/// p-values of a single pair with zero true effect over independent replications.
pub fn run_null_calibration(cfg: &ExperimentConfig, pair: (usize, usize)) -> Result<MetricsReport> {
    cfg.validate()?;
    let (j, k) = (pair.0 - 1, pair.1 - 1);
    let grid = cfg.grid();
    let (records, clock) = replicate(cfg, |sigma, rep, seed| {
        let rec = ReplicationRecord::new(sigma, rep, LOCALIZED, Some(pair));
        let res = simulate(cfg, sigma, seed)
            .and_then(|d| Design::new(std::slice::from_ref(&d), &cfg.design))
            .and_then(|design| analyze_pair(&design, j, k, &grid, &cfg.fit, &cfg.inference, derive_seed(seed, &[2])));
        vec![match res {
            Ok(a) => ReplicationRecord {
                p_value: Some(a.test.p_value),
                ..rec
            },
            Err(e) => rec.failed(e),
        }]
    });
    Ok(MetricsReport::aggregate("null_calibration", records, clock))
}

/// Fraction of p-values at or below `alpha`.
pub fn empirical_size(report: &MetricsReport, alpha: f64) -> Option<f64> {
    let p: Vec<f64> = report.replications.iter().filter_map(|r| r.p_value).collect();
    (!p.is_empty()).then(|| p.iter().filter(|v| **v <= alpha).count() as f64 / p.len() as f64)
}
