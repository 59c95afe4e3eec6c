//! Property tests for structural invariants.

use lkode::inference::{bh_select, sigma_n_hat};
use lkode::kernels::{matern32, CompositeKernel, ComponentLayout, KernelSpec, ThetaWeights};
use lkode::localized_estimator::{local_weights, LassoProblem, Quadrature};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

fn sorted_times() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 2..25).prop_map(|mut v| {
        v.sort_by(|a, b| a.total_cmp(b));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composite_gram_is_psd(
        pts in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 2..15),
        nus in prop::collection::vec(0.1..5.0f64, 3),
        theta in prop::collection::vec(0.0..2.0f64, 7),
        k in 0usize..3,
    ) {
        let layout = ComponentLayout::excluding(3, k);
        let theta = ThetaWeights::new(layout.clone(), theta[..layout.len()].to_vec()).unwrap();
        let coords = nus.iter().map(|&nu| KernelSpec::Matern32 { nu }).collect();
        let kern = CompositeKernel::new(coords, theta).unwrap();
        let x = DMatrix::from_fn(pts.len(), 3, |i, l| pts[i][l]);
        let g = kern.gram(&x, &x);
        prop_assert!((&g - g.transpose()).amax() <= 1e-12 * g.amax().max(1.0));
        let eig = SymmetricEigen::new(g.clone());
        prop_assert!(eig.eigenvalues.min() >= -1e-10 * g.amax().max(1.0));
    }

    #[test]
    fn matern_is_bounded_and_decreasing(d1 in 0.0..10.0f64, d2 in 0.0..10.0f64, nu in 0.05..5.0f64) {
        let (a, b) = (matern32(d1.min(d2), nu).unwrap(), matern32(d1.max(d2), nu).unwrap());
        prop_assert!(a >= b && b > 0.0 && a <= 1.0);
    }

    #[test]
    fn interior_weights_have_unit_mass(t0 in 0.25..0.75f64, h in 0.05..0.25f64) {
        let n = 4000;
        let times: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let w = local_weights(t0, h, &times, 1).unwrap();
        let mass = w.values.iter().sum::<f64>() / n as f64;
        prop_assert!((mass - 1.0).abs() < 2e-3, "mass {}", mass);
        prop_assert!(w.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn quadrature_integrates_linear_functions_exactly(
        times in sorted_times(), a in -3.0..3.0f64, b in -3.0..3.0f64, m in 2usize..60,
    ) {
        let q = Quadrature::new(&times, m).unwrap();
        let w = q.step_weights();
        let g = DVector::from_iterator(m, q.nodes.iter().map(|s| a + b * s));
        let got = w.transpose() * g;
        for (i, t) in times.iter().enumerate() {
            let exact = a * t + 0.5 * b * t * t;
            prop_assert!((got[i] - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        }
        let centered = q.centered_weights();
        for r in centered.row_iter() {
            prop_assert!(r.sum().abs() <= 1e-12);
        }
    }

    #[test]
    fn bh_rejections_grow_with_q(p in prop::collection::vec(0.0..=1.0f64, 1..40), q1 in 0.0..1.0f64, q2 in 0.0..1.0f64) {
        let (lo, hi) = (q1.min(q2), q1.max(q2));
        let small = bh_select(&p, lo);
        let large = bh_select(&p, hi);
        prop_assert!(small.iter().all(|i| large.contains(i)));
        // Rejected p-values are never larger than any retained one.
        if let Some(max_sel) = large.iter().map(|&i| p[i]).reduce(f64::max) {
            for (i, v) in p.iter().enumerate() {
                if !large.contains(&i) {
                    prop_assert!(*v >= max_sel);
                }
            }
        }
    }

    #[test]
    fn lasso_solution_satisfies_kkt(
        gvals in prop::collection::vec(-1.0..1.0f64, 12 * 4),
        zvals in prop::collection::vec(-2.0..2.0f64, 12),
        rvals in prop::collection::vec(0.1..2.0f64, 12),
        kappa in 0.0..0.5f64,
    ) {
        let g = DMatrix::from_column_slice(12, 4, &gvals);
        let z = DVector::from_vec(zvals);
        let prob = LassoProblem::new(&z, &g, &rvals).unwrap();
        let theta = prob.solve(kappa, None);
        let grad = prob.gradient(&theta, kappa);
        let scale = 1.0 + grad.amax();
        for (t, gr) in theta.iter().zip(grad.iter()) {
            prop_assert!(*t >= 0.0);
            if *t > 0.0 {
                prop_assert!(gr.abs() <= 1e-6 * scale, "active gradient {}", gr);
            } else {
                prop_assert!(*gr >= -1e-6 * scale, "inactive gradient {}", gr);
            }
        }
    }

    #[test]
    fn sigma_n_is_homogeneous(w in prop::collection::vec(-5.0..5.0f64, 1..30), c in -4.0..4.0f64) {
        let r: Vec<f64> = w.iter().map(|v| v.abs() + 0.5).collect();
        let scaled: Vec<f64> = w.iter().map(|v| c * v).collect();
        let a = sigma_n_hat(&scaled, &r).unwrap();
        let b = c.abs() * sigma_n_hat(&w, &r).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }
}
