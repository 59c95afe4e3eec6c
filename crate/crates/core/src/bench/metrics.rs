//! Evaluation metrics and CSV reports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// `|S_hat \ S| / max(|S_hat|, 1)`.
pub fn fdp(selected: &[(usize, usize)], truth: &[(usize, usize)]) -> f64 {
    let false_pos = selected.iter().filter(|e| !truth.contains(e)).count();
    false_pos as f64 / selected.len().max(1) as f64
}

/// `|S_hat n S| / |S|` (1 when `S` is empty).
pub fn power(selected: &[(usize, usize)], truth: &[(usize, usize)]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = truth.iter().filter(|e| selected.contains(e)).count();
    hits as f64 / truth.len() as f64
}

/// Six significant digits, `NA` for missing values.
pub fn sig6(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.5e}"),
        Some(v) => format!("{v}"),
        None => "NA".to_string(),
    }
}

/// Outcome of one method on one pair in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub sigma: f64,
    pub replication: usize,
    pub method: String,
    /// 1-based pair, if the record concerns a single effect.
    pub pair: Option<(usize, usize)>,
    pub covered: Option<bool>,
    pub area: Option<f64>,
    pub p_value: Option<f64>,
    pub fdp: Option<f64>,
    pub power: Option<f64>,
    pub prediction_error: Option<f64>,
    pub error: Option<String>,
}

impl ReplicationRecord {
    pub fn new(sigma: f64, replication: usize, method: &str, pair: Option<(usize, usize)>) -> Self {
        Self {
            sigma,
            replication,
            method: method.to_string(),
            pair,
            covered: None,
            area: None,
            p_value: None,
            fdp: None,
            power: None,
            prediction_error: None,
            error: None,
        }
    }

    pub fn failed(mut self, e: impl ToString) -> Self {
        self.error = Some(e.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub experiment: String,
    pub method: String,
    pub sigma: f64,
    pub pair: Option<(usize, usize)>,
    pub replications: usize,
    pub failed: usize,
    pub coverage: Option<f64>,
    pub mean_area: Option<f64>,
    pub fdr: Option<f64>,
    pub power: Option<f64>,
    pub prediction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    pub replications: Vec<ReplicationRecord>,
    /// `(sigma, seconds)` per replication, in replication order.
    pub wall_clock: Vec<(f64, f64)>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

impl MetricsReport {
    /// Aggregates records by `(sigma, method, pair)` in first-seen order.
    pub fn aggregate(experiment: &str, records: Vec<ReplicationRecord>, wall_clock: Vec<(f64, f64)>) -> Self {
        let mut keys: Vec<(f64, String, Option<(usize, usize)>)> = Vec::new();
        for r in &records {
            let key = (r.sigma, r.method.clone(), r.pair);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let rows = keys
            .into_iter()
            .map(|(sigma, method, pair)| {
                let group: Vec<&ReplicationRecord> = records
                    .iter()
                    .filter(|r| r.sigma == sigma && r.method == method && r.pair == pair)
                    .collect();
                let ok: Vec<&&ReplicationRecord> = group.iter().filter(|r| r.error.is_none()).collect();
                MetricRow {
                    experiment: experiment.to_string(),
                    method,
                    sigma,
                    pair,
                    replications: ok.len(),
                    failed: group.len() - ok.len(),
                    coverage: mean(ok.iter().filter_map(|r| r.covered.map(|c| if c { 1.0 } else { 0.0 }))),
                    mean_area: mean(ok.iter().filter_map(|r| r.area)),
                    fdr: mean(ok.iter().filter_map(|r| r.fdp)),
                    power: mean(ok.iter().filter_map(|r| r.power)),
                    prediction_error: mean(ok.iter().filter_map(|r| r.prediction_error.filter(|v| v.is_finite()))),
                }
            })
            .collect();
        Self {
            rows,
            replications: records,
            wall_clock,
        }
    }

    pub fn row(&self, method: &str, sigma: f64, pair: Option<(usize, usize)>) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.sigma == sigma && r.pair == pair)
    }

    pub fn write_metrics<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "experiment",
            "method",
            "sigma",
            "pair",
            "replications",
            "failed",
            "coverage",
            "mean_area",
            "fdr",
            "power",
            "prediction_error",
        ])?;
        for r in &self.rows {
            wr.write_record([
                r.experiment.clone(),
                r.method.clone(),
                sig6(Some(r.sigma)),
                pair_label(r.pair),
                r.replications.to_string(),
                r.failed.to_string(),
                sig6(r.coverage),
                sig6(r.mean_area),
                sig6(r.fdr),
                sig6(r.power),
                sig6(r.prediction_error),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_replications<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "sigma",
            "replication",
            "method",
            "pair",
            "covered",
            "area",
            "p_value",
            "fdp",
            "power",
            "prediction_error",
            "error",
        ])?;
        for r in &self.replications {
            wr.write_record([
                sig6(Some(r.sigma)),
                r.replication.to_string(),
                r.method.clone(),
                pair_label(r.pair),
                r.covered.map_or("NA".into(), |c| (c as u8).to_string()),
                opt_full(r.area),
                opt_full(r.p_value),
                opt_full(r.fdp),
                opt_full(r.power),
                opt_full(r.prediction_error),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_timing<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["sigma", "seconds"])?;
        for (s, t) in &self.wall_clock {
            wr.write_record([s.to_string(), format!("{t:.3}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes `metrics.csv`, `replications.csv` and `timing.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_metrics(std::fs::File::create(dir.join("metrics.csv"))?)?;
        self.write_replications(std::fs::File::create(dir.join("replications.csv"))?)?;
        self.write_timing(std::fs::File::create(dir.join("timing.csv"))?)?;
        Ok(())
    }
}

fn opt_full(x: Option<f64>) -> String {
    x.map_or("NA".into(), |v| v.to_string())
}

pub fn pair_label(p: Option<(usize, usize)>) -> String {
    p.map_or(String::new(), |(j, k)| format!("{j}-{k}"))
}
