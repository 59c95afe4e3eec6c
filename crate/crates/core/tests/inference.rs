//! De-biasing, noise estimate, bootstrap, bands and tests on simulated data.

use lkode::bench::sim::simulate_nfblb;
use lkode::inference::{
    analyze_fit, confidence_band, debias, multiplier_bootstrap, sigma_j_for_fit, test_pair, BootstrapResult,
    InferenceConfig, ScoreRule,
};
use lkode::localized_estimator::fit::{fit_pair, reference_points, FitConfig};
use lkode::localized_estimator::{Design, DesignConfig};
use rayon::prelude::*;

fn grid(g: usize) -> Vec<f64> {
    (0..g).map(|i| i as f64 / (g - 1) as f64).collect()
}

fn design(n: usize, sigma: f64, seed: u64) -> Design {
    let data = simulate_nfblb(n, sigma, seed).unwrap().data;
    Design::new(&[data], &DesignConfig::default()).unwrap()
}

#[test]
fn debiased_values_are_alpha_plus_correction() {
    let d = design(40, 0.1, 3);
    let fit = fit_pair(&d, 1, 2, &grid(12), &FitConfig::default()).unwrap();
    for rule in [ScoreRule::default(), ScoreRule::NearestRow] {
        let c = debias(&d, &fit, rule).unwrap();
        let mean = c.values.iter().sum::<f64>() / c.values.len() as f64;
        for g in 0..c.grid.len() {
            assert_eq!(c.alpha[g], fit.solutions[g].alpha);
            assert!((c.values[g] - c.alpha[g] - c.correction[g]).abs() <= 1e-12 * c.values[g].abs().max(1.0));
            assert!((c.centered[g] - (c.values[g] - mean)).abs() <= 1e-12 * c.values[g].abs().max(1.0));
            assert_eq!(c.scores[g].len(), d.n_total());
        }
        assert!(c.sigma_n().iter().all(|s| s.is_finite() && *s >= 0.0));
    }
}

#[test]
fn noise_estimate_is_calibrated() {
    let sigma = 0.3;
    let cfg = FitConfig::default();
    let est: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|rep| {
            let d = design(40, sigma, 500 + rep);
            let fit = fit_pair(&d, 1, 2, &grid(10), &cfg).unwrap();
            sigma_j_for_fit(&d, &fit, &reference_points(&fit.grid, 5)).unwrap()
        })
        .collect();
    let mean = est.iter().sum::<f64>() / est.len() as f64;
    assert!((0.8 * sigma..=1.2 * sigma).contains(&mean), "mean sigma_j {mean}");
}

#[test]
fn bootstrap_is_deterministic_per_seed() {
    let scores: Vec<Vec<f64>> = (0..5).map(|g| (0..30).map(|i| ((i * (g + 1)) as f64 * 0.37).sin()).collect()).collect();
    let sn = vec![1.0; 5];
    let a = multiplier_bootstrap(&scores, &sn, 0.5, 0.2, 300, 11).unwrap();
    let b = multiplier_bootstrap(&scores, &sn, 0.5, 0.2, 300, 11).unwrap();
    let c = multiplier_bootstrap(&scores, &sn, 0.5, 0.2, 300, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.sups, c.sups);
    // Replicates are independent of how many are drawn.
    let short = multiplier_bootstrap(&scores, &sn, 0.5, 0.2, 100, 11).unwrap();
    assert_eq!(&a.sups[..100], &short.sups[..]);
    for w in [0.2, 0.1, 0.05, 0.01].windows(2) {
        assert!(a.quantile(w[1]) >= a.quantile(w[0]));
    }
}

#[test]
fn p_value_floor_and_zero_statistic() {
    let boot = BootstrapResult::from_sups((1..=99).map(|i| i as f64 / 10.0).collect());
    assert_eq!(boot.p_value(0.0), 1.0);
    assert_eq!(boot.p_value(1e9), 1.0 / 100.0);
    let mut last = 1.0;
    for s in 0..120 {
        let p = boot.p_value(s as f64 / 10.0);
        assert!(p <= last);
        last = p;
    }
}

#[test]
fn band_contains_center_and_scales_with_critical_value() {
    let d = design(40, 0.1, 4);
    let fit = fit_pair(&d, 1, 2, &grid(15), &FitConfig::default()).unwrap();
    let cfg = InferenceConfig::default();
    let a = analyze_fit(&d, fit, &cfg, 7).unwrap();
    let band = &a.band;
    for ((lo, hi), c) in band.lower().iter().zip(band.upper()).zip(&band.center) {
        assert!(*lo <= *c && *c <= hi);
    }
    assert!(band.covers(&band.center));
    let h = a.fit.tuning.h;
    let doubled = BootstrapResult::from_sups(
        multiplier_bootstrap(&a.curve.scores, &a.curve.sigma_n(), 2.0 * a.sigma_j, h, cfg.bootstrap, 7)
            .unwrap()
            .sups,
    );
    let wide = confidence_band(&a.curve, &doubled, cfg.alpha, h).unwrap();
    assert!((wide.critical_value - 2.0 * band.critical_value).abs() <= 1e-9 * band.critical_value);
    for (w, b) in wide.half_width.iter().zip(&band.half_width) {
        assert!((w - 2.0 * b).abs() <= 1e-9 * b.max(1e-300));
    }
    assert!((wide.area(400) - 2.0 * band.area(400)).abs() <= 1e-9 * band.area(400));
    let orig = a.band_original_units();
    assert!((orig.area(400) * a.fit.time_scale - band.area(400)).abs() <= 1e-9 * band.area(400));
}

#[test]
fn test_statistic_matches_band_geometry() {
    let d = design(40, 0.1, 5);
    let fit = fit_pair(&d, 1, 2, &grid(15), &FitConfig::default()).unwrap();
    let a = analyze_fit(&d, fit, &InferenceConfig::default(), 3).unwrap();
    // Zero lies inside the band exactly when the statistic is at most the critical value.
    let zero_inside = a.band.covers(&vec![0.0; a.band.grid.len()]);
    assert_eq!(zero_inside, a.test.statistic <= a.band.critical_value * (1.0 + 1e-12));
    let boot = multiplier_bootstrap(&a.curve.scores, &a.curve.sigma_n(), a.sigma_j, a.fit.tuning.h, 500, 3).unwrap();
    assert_eq!(test_pair(&a.curve, &boot, a.fit.tuning.h).unwrap(), a.test);
}
