//! `lkode` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lkode::bench::experiments::simulate;
use lkode::bench::{
    compare_baselines, run_fit, run_lv_network, run_network, run_single, run_table1, Baseline, ExperimentConfig,
    MetricsReport, SystemKind,
};
use lkode::inference::ScoreRule;
use lkode::ode_systems::TrajectoryData;
use lkode::{Error, Result};

#[derive(Parser)]
#[command(name = "lkode", version, about = "Localized kernel ODE inference for regulatory networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory and write it as CSV.
    Simulate(Common),
    /// Fit the local effect curve of one pair, without inference.
    Fit(Common),
    /// Fit one pair and write its simultaneous confidence band.
    Band(Common),
    /// Test every ordered pair and select edges with BH.
    Network(Common),
    /// Replicated coverage and band-area experiment on the enzyme loop.
    BenchTable1(Common),
    /// Replicated network recovery on Lotka-Volterra data.
    BenchLv(Common),
    /// Localized bands against the configured baselines.
    Baselines(Common),
}

/// Flags mirror the configuration file; flags override file values.
#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// nfblb, lotka-volterra or csv.
    #[arg(long)]
    system: Option<String>,
    /// Input trajectory CSV (sets system = csv).
    #[arg(long, alias = "data")]
    csv_path: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_size: Option<usize>,
    /// Comma-separated 1-based pairs such as `2-3,1-2`.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pairs: Option<Vec<(usize, usize)>>,
    /// Comma-separated baseline names.
    #[arg(long, value_delimiter = ',')]
    baselines: Option<Vec<String>>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    forecast_end: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    c_h: Option<f64>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    fdr_q: Option<f64>,
    /// projected or nearest-row.
    #[arg(long)]
    rule: Option<String>,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("expected j-k, got {s:?}"))?;
    let j = a.trim().parse().map_err(|_| format!("bad index in {s:?}"))?;
    let k = b.trim().parse().map_err(|_| format!("bad index in {s:?}"))?;
    Ok((j, k))
}

fn parse_system(s: &str) -> Result<SystemKind> {
    match s {
        "nfblb" => Ok(SystemKind::Nfblb),
        "lotka-volterra" | "lv" => Ok(SystemKind::LotkaVolterra),
        "csv" => Ok(SystemKind::Csv),
        _ => Err(Error::InvalidConfig(format!("unknown system {s:?}"))),
    }
}

fn parse_baseline(s: &str) -> Result<Baseline> {
    [Baseline::KernelOdeBonferroni, Baseline::LinearOde, Baseline::AdditiveOde]
        .into_iter()
        .find(|b| b.name() == s)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown baseline {s:?}")))
}

impl Common {
    /// File (or the preset for `fallback`) overridden by flags.
    fn resolve(&self, fallback: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => fallback,
        };
        if let Some(s) = &self.system {
            c.system = parse_system(s)?;
        }
        if let Some(path) = &self.csv_path {
            c.csv_path = Some(path.clone());
            c.system = SystemKind::Csv;
        }
        macro_rules! set {
            ($($src:ident => $($dst:ident).+;)*) => {$(
                if let Some(v) = &self.$src {
                    c.$($dst).+ = v.clone();
                }
            )*};
        }
        set! {
            n => n;
            p => p;
            sigmas => sigmas;
            replications => replications;
            seed => seed;
            grid_size => grid_size;
            pairs => pairs;
            t_end => t_end;
            forecast_end => forecast_end;
            output_dir => output_dir;
            c_h => fit.c_h;
            alpha => inference.alpha;
            bootstrap => inference.bootstrap;
            fdr_q => inference.fdr_q;
        }
        if self.bandwidth.is_some() {
            c.fit.bandwidth = self.bandwidth;
        }
        if self.eta.is_some() {
            c.fit.eta = self.eta;
        }
        if self.kappa.is_some() {
            c.fit.kappa = self.kappa;
        }
        if let Some(b) = &self.baselines {
            c.baselines = b.iter().map(|s| parse_baseline(s)).collect::<Result<_>>()?;
        }
        if let Some(r) = &self.rule {
            c.inference.rule = match r.as_str() {
                "projected" => ScoreRule::default(),
                "nearest-row" => ScoreRule::NearestRow,
                _ => return Err(Error::InvalidConfig(format!("unknown rule {r:?}"))),
            };
        }
        c.validate()?;
        Ok(c)
    }
}

fn write_resolved(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(cfg.output_dir.join("config.resolved"), cfg.to_toml()?)?;
    Ok(())
}

fn first_pair(cfg: &ExperimentConfig) -> Result<(usize, usize)> {
    let pair = *cfg.pairs.first().ok_or_else(|| Error::InvalidConfig("no pair given".into()))?;
    if cfg.system != SystemKind::Csv && pair.0.max(pair.1) > cfg.p {
        return Err(Error::InvalidConfig(format!("pair {}-{} exceeds p = {}", pair.0, pair.1, cfg.p)));
    }
    Ok(pair)
}

/// The configured CSV file, or one simulated data set at the first noise level.
fn data_for(cfg: &ExperimentConfig) -> Result<TrajectoryData> {
    let sigma = *cfg.sigmas.first().ok_or_else(|| Error::InvalidConfig("no noise level given".into()))?;
    simulate(cfg, sigma, cfg.seed)
}

fn finish_report(report: &MetricsReport, dir: &Path) -> Result<()> {
    report.save(dir)?;
    for row in &report.rows {
        println!(
            "{} {} sigma={} pair={} coverage={} area={} fdr={} power={} failed={}",
            row.experiment,
            row.method,
            row.sigma,
            lkode::bench::metrics::pair_label(row.pair),
            opt(row.coverage),
            opt(row.mean_area),
            opt(row.fdr),
            opt(row.power),
            row.failed,
        );
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = a.resolve(ExperimentConfig::table1())?;
            write_resolved(&cfg)?;
            let data = data_for(&cfg)?;
            let path = cfg.output_dir.join("data.csv");
            data.save(&path)?;
            println!("wrote {}", path.display());
        }
        Command::Fit(a) => {
            let cfg = a.resolve(ExperimentConfig::table1())?;
            write_resolved(&cfg)?;
            let fit = run_fit(&cfg, first_pair(&cfg)?, &data_for(&cfg)?, &cfg.output_dir)?;
            println!("eta={} kappa={} h={} converged={}", fit.tuning.eta, fit.tuning.kappa, fit.tuning.h, fit.converged);
        }
        Command::Band(a) => {
            let cfg = a.resolve(ExperimentConfig::table1())?;
            write_resolved(&cfg)?;
            let r = run_single(&cfg, first_pair(&cfg)?, &data_for(&cfg)?, &cfg.output_dir)?;
            println!("statistic={} p_value={} critical_value={}", r.test.statistic, r.test.p_value, r.band.critical_value);
        }
        Command::Network(a) => {
            let cfg = a.resolve(ExperimentConfig::lotka_volterra())?;
            write_resolved(&cfg)?;
            let net = run_network(&cfg, &data_for(&cfg)?, &cfg.output_dir)?;
            let edges: Vec<String> = net.selected.iter().map(|(j, k)| format!("{}<-{}", j + 1, k + 1)).collect();
            println!("selected {} edges: {}", edges.len(), edges.join(" "));
            for ((j, k), e) in &net.failures {
                eprintln!("warning: pair {}-{} failed: {e}", j + 1, k + 1);
            }
        }
        Command::BenchTable1(a) => {
            let cfg = a.resolve(ExperimentConfig::table1())?;
            write_resolved(&cfg)?;
            finish_report(&run_table1(&cfg)?, &cfg.output_dir)?;
        }
        Command::BenchLv(a) => {
            let cfg = a.resolve(ExperimentConfig::lotka_volterra())?;
            write_resolved(&cfg)?;
            finish_report(&run_lv_network(&cfg)?, &cfg.output_dir)?;
        }
        Command::Baselines(a) => {
            let cfg = a.resolve(ExperimentConfig::table1())?;
            write_resolved(&cfg)?;
            finish_report(&compare_baselines(&cfg)?, &cfg.output_dir)?;
        }
    }
    Ok(())
}

fn error_line(e: &Error) -> String {
    format!("error: kind={} message={:?}", e.kind(), e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn invoke(args: &[&str]) -> Result<()> {
        let cli = Cli::try_parse_from(std::iter::once("lkode").chain(args.iter().copied()))
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        run(cli)
    }

    fn kind(r: Result<()>) -> String {
        error_line(&r.expect_err("command should fail"))
    }

    fn path(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    #[test]
    fn help_lists_subcommands() {
        let help = Cli::command().render_help().to_string();
        for cmd in ["simulate", "fit", "band", "network", "bench-table1", "bench-lv", "baselines"] {
            assert!(help.contains(cmd), "missing {cmd}");
        }
    }

    #[test]
    fn pair_syntax() {
        assert_eq!(parse_pair("2-3"), Ok((2, 3)));
        assert!(parse_pair("23").is_err());
        assert!(parse_pair("a-3").is_err());
    }

    #[test]
    fn simulate_then_band_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let sim = dir.path().join("sim");
        invoke(&["simulate", "--n", "30", "--sigmas", "0.1", "--seed", "4", "--output-dir", path(&sim)]).unwrap();
        let csv = sim.join("data.csv");
        let out = dir.path().join("band");
        invoke(&[
            "band", "--csv-path", path(&csv), "--pairs", "2-3", "--grid-size", "20", "--bootstrap", "200",
            "--output-dir", path(&out),
        ])
        .unwrap();
        for f in ["band.csv", "config.resolved", "fit.json"] {
            assert!(out.join(f).exists(), "missing {f}");
        }
        let band = std::fs::read_to_string(out.join("band.csv")).unwrap();
        assert_eq!(band.lines().count(), 21);
    }

    #[test]
    fn fit_writes_alpha_curve() {
        let dir = tempfile::tempdir().unwrap();
        invoke(&["fit", "--n", "30", "--sigmas", "0.1", "--grid-size", "15", "--output-dir", path(dir.path())]).unwrap();
        let alpha = std::fs::read_to_string(dir.path().join("alpha.csv")).unwrap();
        assert!(alpha.starts_with("t0,alpha,alpha_centered"));
        assert_eq!(alpha.lines().count(), 16);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "n = 25\nreplications = 7\nsigmas = [0.3]\n[inference]\nbootstrap = 50\n").unwrap();
        invoke(&["simulate", "--config", path(&cfg), "--n", "35", "--output-dir", path(dir.path())]).unwrap();
        let resolved = std::fs::read_to_string(dir.path().join("config.resolved")).unwrap();
        assert!(resolved.contains("n = 35"));
        assert!(resolved.contains("replications = 7"));
        assert!(resolved.contains("bootstrap = 50"));
        let data = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
        assert_eq!(data.lines().count(), 36);
    }

    #[test]
    fn invalid_pairs_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let out = path(dir.path());
        assert!(kind(invoke(&["band", "--pairs", "2-2", "--output-dir", out])).contains("kind=invalid_config"));
        assert!(kind(invoke(&["band", "--pairs", "1-9", "--output-dir", out])).contains("kind=invalid_config"));
    }

    #[test]
    fn missing_inputs_are_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        let out = path(dir.path());
        assert!(kind(invoke(&["band", "--csv-path", "/nonexistent/x.csv", "--output-dir", out])).contains("kind=io"));
        assert!(kind(invoke(&["simulate", "--config", "/nonexistent/x.toml"])).contains("kind=io"));
    }

    #[test]
    fn malformed_config_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.toml");
        std::fs::write(&cfg, "n = \"many\"\n").unwrap();
        assert!(kind(invoke(&["simulate", "--config", path(&cfg)])).contains("kind=parse"));
    }

    #[test]
    fn small_benchmark_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        invoke(&[
            "bench-table1", "--replications", "2", "--sigmas", "0.1", "--grid-size", "20", "--bootstrap", "100",
            "--output-dir", path(dir.path()),
        ])
        .unwrap();
        let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert!(metrics.starts_with("experiment,method,sigma,pair"));
        assert!(metrics.contains("2-3") && metrics.contains("1-2"));
        for f in ["replications.csv", "timing.csv", "config.resolved"] {
            assert!(dir.path().join(f).exists(), "missing {f}");
        }
    }

    #[test]
    fn network_on_small_lotka_volterra() {
        let dir = tempfile::tempdir().unwrap();
        invoke(&[
            "network", "--p", "2", "--n", "60", "--t-end", "20", "--grid-size", "10", "--bootstrap", "100",
            "--output-dir", path(dir.path()),
        ])
        .unwrap();
        let net = std::fs::read_to_string(dir.path().join("network.csv")).unwrap();
        assert_eq!(net.lines().count(), 3, "{net}");
    }
}
