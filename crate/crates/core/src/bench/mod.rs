//! Benchmark harness: simulations, replicated experiments, baselines and reports.

pub mod baselines;
pub mod config;
pub mod experiments;
pub mod metrics;
pub mod sim;
pub mod single;

pub use config::{Baseline, ExperimentConfig, SystemKind};
pub use experiments::{compare_baselines, run_lv_network, run_null_calibration, run_table1};
pub use metrics::{MetricRow, MetricsReport, ReplicationRecord};
pub use single::{run_fit, run_network, run_single};
