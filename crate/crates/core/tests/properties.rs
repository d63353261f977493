use proptest::prelude::*;

use fracld::intersection::g_eps;
use fracld::ldconst::{km_transform, theta_bounds, ConstantKind, RateBounds};
use fracld::localtime::gaussian_kernel;
use fracld::moments::{phi_m, phi_m_det, weight_bound};
use fracld::process_sim::{compute_c_h, fbm_cov, remainder_cov, rl_cov};
use fracld::real::gamma;
use fracld::rkhs::{fractional_integral_fn, rkhs_norm, RkhsFunction, ZaFill};
use fracld::stats::Summary;
use fracld::ModelParams;

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_eps_pair_is_difference_density(
        (y1, y2) in (1usize..4).prop_flat_map(|d| (point(d), point(d))),
        eps in 0.01f64..1.0
    ) {
        let diff: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
        let g = g_eps(&[&y1, &y2], eps);
        prop_assert!((g - gaussian_kernel(&diff, 2.0 * eps)).abs() <= 1e-12 * g.max(1.0));
    }

    #[test]
    fn g_eps_symmetric_and_translation_invariant(
        a in point(2), b in point(2), c in point(2), shift in point(2), eps in 0.02f64..0.5
    ) {
        let g = g_eps(&[&a, &b, &c], eps);
        prop_assert!((g - g_eps(&[&c, &a, &b], eps)).abs() <= 1e-12 * g.max(1e-300));
        let mv = |p: &[f64]| p.iter().zip(&shift).map(|(x, s)| x + s).collect::<Vec<_>>();
        let (a2, b2, c2) = (mv(&a), mv(&b), mv(&c));
        prop_assert!((g - g_eps(&[&a2, &b2, &c2], eps)).abs() <= 1e-10 * g.max(1e-300));
    }

    #[test]
    fn rate_bounds_scaling_preserves_order(lo in 0.01f64..5.0, width in 0.0f64..5.0, f in 0.01f64..10.0, e in 0.05f64..2.0) {
        let b = RateBounds::new(lo, lo + width, ConstantKind::Theta);
        prop_assert!(b.is_ordered());
        let s = b.scaled(f, ConstantKind::ThetaTilde);
        prop_assert!(s.is_ordered());
        prop_assert!(s.contains(f * (lo + 0.5 * width), 1e-12));
        let inv = b.inverse_power(e, ConstantKind::Lil);
        prop_assert!(inv.is_ordered());
        prop_assert!(inv.contains((lo + 0.5 * width).powf(-e), 1e-12));
    }

    #[test]
    fn theta_bracket_ordered_iff_c_below_2h(h in 0.02f64..0.98, d in 1usize..4) {
        prop_assume!(h * d as f64 <= 0.98);
        let b = theta_bounds(&ModelParams::new(h, d)).unwrap();
        let c = compute_c_h(h).unwrap();
        prop_assert_eq!(b.is_ordered(), c * c <= 2.0 * h * (1.0 + 1e-14));
    }

    #[test]
    fn km_transform_scaling(kappa in -3.0f64..3.0, gamma_ in 0.2f64..3.0, lambda in 0.1f64..10.0) {
        // Y -> λY multiplies E Y^m by λ^m: κ shifts by log λ and the rate scales by λ^{-1/γ}
        let r = km_transform(kappa, gamma_).unwrap();
        let r2 = km_transform(kappa + lambda.ln(), gamma_).unwrap();
        prop_assert!((r2 - r * lambda.powf(-1.0 / gamma_)).abs() <= 1e-12 * r);
    }

    #[test]
    fn covariance_kernels(h in 0.05f64..0.95, s in 0.05f64..2.0, t in 0.05f64..2.0, lambda in 0.2f64..5.0) {
        prop_assert!((fbm_cov(s, t, h) - fbm_cov(t, s, h)).abs() <= 1e-14);
        let scale = lambda.powf(2.0 * h);
        prop_assert!((rl_cov(lambda * s, lambda * t, h) - scale * rl_cov(s, t, h)).abs() <= 1e-9 * scale.max(1.0));
        let c2 = compute_c_h(h).unwrap().powi(2);
        let gap = fbm_cov(s, t, h) / c2 - rl_cov(s, t, h) - remainder_cov(s, t, h);
        prop_assert!(gap.abs() <= 1e-7, "gap {}", gap);
    }

    #[test]
    fn phi_routes_agree_and_respect_weight_bound(h in 0.1f64..0.9, mut ts in prop::collection::vec(0.01f64..1.0, 1..5)) {
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let p = ModelParams::new(h, 1);
        let a = phi_m(&ts, &p).unwrap();
        let b = phi_m_det(&ts, &p).unwrap();
        prop_assert!((a / b - 1.0).abs() < 1e-8);
        // φ_m against the Markov product Π (Γ-spacing variance)^{-1/2}
        let mut markov = 1.0;
        let mut prev = 0.0;
        for &t in &ts {
            markov *= (t - prev).powf(-h);
            prev = t;
        }
        let ratio = a / markov;
        let w = weight_bound(ts.len(), &p).unwrap();
        let (lo, hi) = if w >= 1.0 { (1.0, w) } else { (w, 1.0) };
        prop_assert!(ratio >= lo * (1.0 - 1e-9) && ratio <= hi * (1.0 + 1e-9), "ratio {} not in [{}, {}]", ratio, lo, hi);
    }

    #[test]
    fn power_rule(alpha in 0.1f64..1.5, beta in 0u32..4, t in 0.1f64..2.0) {
        let b = beta as f64;
        let v = fractional_integral_fn(|s: f64| s.powi(beta as i32), alpha, t).unwrap();
        let exact = gamma(b + 1.0) / gamma(b + 1.0 + alpha) * t.powf(b + alpha);
        prop_assert!((v - exact).abs() <= 1e-8 * exact.max(1.0));
    }

    #[test]
    fn rkhs_norm_homogeneous_and_subadditive(c in -3.0f64..3.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let h = 0.3;
        let f = RkhsFunction::from_derivatives(h, 1.0, 200, &|t: f64| a * t, &[&|_| a]).unwrap();
        let g = RkhsFunction::from_derivatives(h, 1.0, 200, &|t: f64| b * t.sin(), &[&|t: f64| b * t.cos()]).unwrap();
        let nf = rkhs_norm(&f).unwrap();
        let ng = rkhs_norm(&g).unwrap();
        prop_assert!((rkhs_norm(&f.scaled(c)).unwrap() - c.abs() * nf).abs() <= 1e-8);
        prop_assert!(rkhs_norm(&f.add(&g).unwrap()).unwrap() <= nf + ng + 1e-8);
    }

    #[test]
    fn fill_boundary_matching(a in 0.05f64..2.0, z in -3.0f64..3.0, zd in -3.0f64..3.0, smooth in any::<bool>()) {
        let (h, zdot) = if smooth { (0.7, Some(zd)) } else { (0.3, None) };
        let f = ZaFill::new(a, h, z, zdot).unwrap();
        prop_assert!((f.value(a) - z).abs() <= 8.0 * f64::EPSILON * (1.0 + z.abs()));
        prop_assert_eq!(f.value(0.0), 0.0);
        if let Some(zd) = zdot {
            prop_assert!((f.derivative(a) - zd).abs() <= 16.0 * f64::EPSILON * (1.0 + zd.abs() + z.abs() / a));
        }
    }

    #[test]
    fn summary_merge_matches_concatenation(xs in prop::collection::vec(-10.0f64..10.0, 2..50), ys in prop::collection::vec(-10.0f64..10.0, 2..50)) {
        let merged = Summary::from_slice(&xs).merge(Summary::from_slice(&ys));
        let all: Vec<f64> = xs.iter().chain(&ys).copied().collect();
        let direct = Summary::from_slice(&all);
        prop_assert!((merged.mean - direct.mean).abs() <= 1e-12);
        prop_assert!((merged.variance() - direct.variance()).abs() <= 1e-9 * direct.variance().max(1.0));
    }
}
