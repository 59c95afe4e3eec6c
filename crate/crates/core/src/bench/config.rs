//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::InferenceConfig;
use crate::localized_estimator::{DesignConfig, FitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Nfblb,
    LotkaVolterra,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    KernelOdeBonferroni,
    LinearOde,
    AdditiveOde,
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::KernelOdeBonferroni => "kernel-ode-bonferroni",
            Baseline::LinearOde => "linear-ode",
            Baseline::AdditiveOde => "additive-ode",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    pub csv_path: Option<PathBuf>,
    pub n: usize,
    pub p: usize,
    pub sigmas: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub grid_size: usize,
    /// 1-based `(j, k)` pairs for band experiments.
    pub pairs: Vec<(usize, usize)>,
    pub baselines: Vec<Baseline>,
    /// End of the observation window (LV).
    pub t_end: f64,
    /// End of the forecast window (LV).
    pub forecast_end: f64,
    pub output_dir: PathBuf,
    pub design: DesignConfig,
    pub fit: FitConfig,
    pub inference: InferenceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::table1()
    }
}

impl ExperimentConfig {
    pub fn table1() -> Self {
        Self {
            system: SystemKind::Nfblb,
            csv_path: None,
            n: 40,
            p: 3,
            sigmas: vec![0.1, 0.3, 0.5],
            replications: 100,
            seed: 20240601,
            grid_size: 500,
            pairs: vec![(2, 3), (1, 2)],
            baselines: vec![Baseline::KernelOdeBonferroni],
            t_end: 100.0,
            forecast_end: 200.0,
            output_dir: PathBuf::from("out"),
            design: DesignConfig::default(),
            fit: FitConfig::default(),
            inference: InferenceConfig::default(),
        }
    }

    pub fn lotka_volterra() -> Self {
        Self {
            system: SystemKind::LotkaVolterra,
            n: 200,
            p: 6,
            sigmas: vec![1.0],
            replications: 50,
            grid_size: 50,
            pairs: vec![(1, 2)],
            baselines: vec![],
            ..Self::table1()
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.grid_size == 0 {
            return Err(Error::InvalidConfig("grid_size must be at least 1".into()));
        }
        if self.n < 3 {
            return Err(Error::InvalidConfig("n must be at least 3".into()));
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("noise levels must be non-negative".into()));
        }
        if self.system == SystemKind::LotkaVolterra && (self.p < 2 || !self.p.is_multiple_of(2)) {
            return Err(Error::InvalidConfig("Lotka-Volterra needs an even p >= 2".into()));
        }
        if self.system == SystemKind::Csv {
            match &self.csv_path {
                Some(p) if p.exists() => {}
                Some(p) => return Err(Error::Io(format!("file not found: {}", p.display()))),
                None => return Err(Error::InvalidConfig("csv system needs csv_path".into())),
            }
        }
        for &(j, k) in &self.pairs {
            if j == 0 || k == 0 || j == k {
                return Err(Error::InvalidConfig(format!("invalid pair ({j}, {k})")));
            }
        }
        if !(self.inference.alpha > 0.0 && self.inference.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must be in (0, 1)".into()));
        }
        if self.inference.bootstrap == 0 {
            return Err(Error::InvalidConfig("bootstrap must be at least 1".into()));
        }
        Ok(())
    }

    /// Evenly spaced target times on `[0, 1]`.
    pub fn grid(&self) -> Vec<f64> {
        crate::ode_systems::uniform_times(0.0, 1.0, self.grid_size)
    }
}
