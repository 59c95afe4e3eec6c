//! Oracle checks shared by the oracle tests and the acceptance run.
#![allow(dead_code)]

use lkode::inference::{bh_select, multiplier_bootstrap};
use lkode::localized_estimator::{
    assemble_sigma_from_gram, lasso_objective, lasso_theta, ridge_objective, solve_weighted_ridge, Quadrature,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, rank, |_, _| rng.gen_range(-1.0..1.0));
    &b * b.transpose()
}

/// Conjugate gradient on the joint quadratic in `(alpha, c)`.
pub fn ridge_by_cg(sigma: &DMatrix<f64>, r: &[f64], u: &DVector<f64>, t: &DVector<f64>, eta: f64) -> (f64, DVector<f64>) {
    let n = u.len();
    let nf = n as f64;
    let mut x_mat = DMatrix::zeros(n, n + 1);
    x_mat.set_column(0, t);
    x_mat.columns_mut(1, n).copy_from(sigma);
    let rd = DMatrix::from_diagonal(&DVector::from_column_slice(r));
    let mut hess = x_mat.transpose() * &rd * &x_mat * (2.0 / nf);
    let block = hess.view((1, 1), (n, n)) + sigma * (2.0 * eta);
    hess.view_mut((1, 1), (n, n)).copy_from(&block);
    let g = x_mat.transpose() * &rd * u * (2.0 / nf);
    let mut x = DVector::zeros(n + 1);
    for _restart in 0..20 {
        let mut res = &g - &hess * &x;
        let mut dir = res.clone();
        let mut rr = res.dot(&res);
        for _ in 0..(n + 1) {
            if rr < 1e-30 {
                break;
            }
            let hd = &hess * &dir;
            let step = rr / dir.dot(&hd);
            x += &dir * step;
            res -= &hd * step;
            let rr_new = res.dot(&res);
            dir = &res + &dir * (rr_new / rr);
            rr = rr_new;
        }
    }
    (x[0], x.rows(1, n).into_owned())
}

pub fn ridge_matches_iterative_minimizer_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let n = 3 + inst % 8;
        let sigma = random_psd(&mut rng, n, n);
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let u = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let t = DVector::from_fn(n, |i, _| i as f64 - (n - 1) as f64 / 2.0);
        let eta = 10f64.powf(rng.gen_range(-2.0..0.0));
        let sol = solve_weighted_ridge(&sigma, &r, &u, &t, eta).unwrap();
        let (a, c) = ridge_by_cg(&sigma, &r, &u, &t, eta);
        let reference = ridge_objective(&sigma, &r, &u, &t, eta, a, &c);
        worst = worst.max(sol.objective - reference);
    }
    assert!(worst <= 1e-8, "objective gap {worst}");
}

/// Exhaustive search over supports of the KKT system.
pub fn lasso_brute_force(z: &DVector<f64>, g: &DMatrix<f64>, r: &[f64], kappa: f64) -> Vec<f64> {
    let (w, mm) = g.shape();
    let nf = w as f64;
    let rd = DMatrix::from_diagonal(&DVector::from_column_slice(r));
    let q = g.transpose() * &rd * g * (2.0 / nf);
    let b = g.transpose() * &rd * z * (2.0 / nf);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << mm) {
        let act: Vec<usize> = (0..mm).filter(|m| mask >> m & 1 == 1).collect();
        let mut theta = vec![0.0; mm];
        if !act.is_empty() {
            let qa = q.select_rows(&act).select_columns(&act);
            let rhs = DVector::from_iterator(act.len(), act.iter().map(|&m| b[m] - kappa));
            let Some(sol) = qa.lu().solve(&rhs) else { continue };
            if sol.iter().any(|v| *v <= 0.0) {
                continue;
            }
            for (a, &m) in act.iter().enumerate() {
                theta[m] = sol[a];
            }
        }
        let obj = lasso_objective(z, g, r, kappa, &theta);
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, theta));
        }
    }
    best.unwrap().1
}

pub fn kkt_violation(z: &DVector<f64>, g: &DMatrix<f64>, r: &[f64], kappa: f64, theta: &[f64]) -> f64 {
    let nf = z.len() as f64;
    let e = z - g * DVector::from_column_slice(theta);
    let re = DVector::from_fn(e.len(), |i, _| r[i] * e[i]);
    let grad = g.transpose() * re * (-2.0 / nf);
    let mut worst: f64 = 0.0;
    for m in 0..theta.len() {
        let v = if theta[m] > 0.0 {
            (grad[m] + kappa).abs()
        } else {
            (-(grad[m] + kappa)).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

pub fn lasso_matches_brute_force_and_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for inst in 0..60 {
        let mm = 2 + inst % 5;
        let w = 12;
        let g = DMatrix::from_fn(w, mm, |_, _| rng.gen_range(-1.0..1.0));
        let z = DVector::from_fn(w, |_, _| rng.gen_range(-2.0..2.0));
        let r: Vec<f64> = (0..w).map(|_| rng.gen_range(0.2..1.5)).collect();
        let kappa = rng.gen_range(0.0..0.5);
        let theta = lasso_theta(&z, &g, &r, kappa, None).unwrap();
        assert!(theta.iter().all(|v| *v >= 0.0));
        let kkt = kkt_violation(&z, &g, &r, kappa, &theta);
        assert!(kkt <= 1e-6, "KKT violation {kkt}");
        let brute = lasso_brute_force(&z, &g, &r, kappa);
        for (a, b) in theta.iter().zip(&brute) {
            assert!((a - b).abs() <= 1e-8, "instance {inst}: {theta:?} vs {brute:?}");
        }
    }
}

pub fn lasso_four_column_toy() {
    let g = DMatrix::from_row_slice(
        6,
        4,
        &[
            1.0, 0.2, 0.0, 0.5, //
            0.0, 1.0, 0.3, -0.4, //
            0.5, 0.0, 1.0, 0.1, //
            0.2, -0.3, 0.4, 1.0, //
            1.0, 1.0, 0.0, 0.0, //
            0.0, 0.5, 0.5, 0.5,
        ],
    );
    let z = DVector::from_vec(vec![1.0, -0.5, 0.8, 0.3, 1.2, -0.2]);
    let r = [1.0, 0.5, 1.0, 2.0, 1.0, 0.7];
    let theta = lasso_theta(&z, &g, &r, 0.05, None).unwrap();
    let brute = lasso_brute_force(&z, &g, &r, 0.05);
    for (a, b) in theta.iter().zip(&brute) {
        assert!((a - b).abs() <= 1e-8);
    }
}

pub fn constant_kernel_sigma_closed_form_at_400_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut times: Vec<f64> = (0..25).map(|_| rng.gen_range(0.0..1.0)).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    let quad = Quadrature::new(&times, 400).unwrap();
    let sigma = assemble_sigma_from_gram(&quad, &DMatrix::from_element(400, 400, 1.0)).unwrap();
    let tbar = times.iter().sum::<f64>() / times.len() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..times.len() {
        for j in 0..times.len() {
            worst = worst.max((sigma[(i, j)] - (times[i] - tbar) * (times[j] - tbar)).abs());
        }
    }
    assert!(worst <= 1e-8, "max deviation {worst}");
}

pub fn degenerate_bootstrap_reduces_to_one_normal() {
    let n = 30;
    let mut psi = vec![0.0; n];
    psi[7] = 1.0;
    let sigma_n = (1.0 / n as f64).sqrt();
    let boot = multiplier_bootstrap(&[psi], &[sigma_n], 1.0, 1.0, 100_000, 42).unwrap();
    let c = boot.quantile(0.05);
    assert!((1.91..=2.01).contains(&c), "critical value {c}");
}

/// Largest `k` such that at least `k` p-values are at most `k q / m`.
pub fn bh_brute_force(p: &[f64], q: f64) -> Vec<usize> {
    let m = p.len();
    let k_star = (1..=m)
        .rev()
        .find(|&k| p.iter().filter(|&&v| v <= k as f64 * q / m as f64).count() >= k);
    match k_star {
        None => vec![],
        Some(k) => (0..m).filter(|&i| p[i] <= k as f64 * q / m as f64).collect(),
    }
}

pub fn bh_matches_brute_force_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..1000 {
        let m = rng.gen_range(1..=12);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    (rng.gen_range(0..20) as f64) / 200.0
                } else {
                    rng.gen_range(0.0..1.0)
                }
            })
            .collect();
        let q = rng.gen_range(0.05..0.5);
        assert_eq!(bh_select(&p, q), bh_brute_force(&p, q), "p = {p:?}, q = {q}");
    }
}
