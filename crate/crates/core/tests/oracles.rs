//! Library values against oracles computed independently (closed forms or
//! high-precision quadrature, evaluated once and frozen here).

#![allow(clippy::excessive_precision)]

use std::f64::consts::{PI, SQRT_2};

use fracld::moments::{exp_moments, moment_unit_time, unit_moments};
use fracld::process_sim::compute_c_h;
use fracld::quad::{tanh_sinh, Tolerance};
use fracld::real::gamma;
use fracld::rkhs::{estimate_k_a, fractional_integral_fn, g_n_trend, monomial_norm, rkhs_norm_fn};
use fracld::ModelParams;

#[test]
fn c_h_frozen_values() {
    assert!((compute_c_h(0.25f64).unwrap() - 0.645_998_003_740_751_97).abs() < 1e-14);
    assert!((compute_c_h(0.75f64).unwrap() - 1.069_644_635_031_990_3).abs() < 1e-14);
}

#[test]
fn half_order_integral_of_exp() {
    // I^{1/2} e^t = e^t erf(√t)
    let v = fractional_integral_fn(f64::exp, 0.5, 1.0).unwrap();
    assert!((v - 2.290_698_252_303_238_2).abs() < 1e-10);
}

#[test]
fn quadratic_norm_frozen() {
    let frozen = 0.769_982_901_664_534_66;
    assert!((monomial_norm(2, 0.25f64, 1.0) - frozen).abs() < 1e-13);
    let q = rkhs_norm_fn(|s: f64| 2.0 * s, 0.25f64, 1.0).unwrap();
    assert!((q - frozen).abs() < 1e-8);
}

/// `E[L_τ²]` for `d = 1` through the scaling reduction to one integral.
fn second_moment(h: f64) -> f64 {
    let phi = |u: f64| {
        let c = 0.5 * (u.powf(2.0 * h) + 1.0 - (1.0 - u).powf(2.0 * h));
        u.powf(-h) / (1.0 - c * c / u.powf(2.0 * h)).sqrt()
    };
    gamma(2.0 - 2.0 * h) / PI * tanh_sinh(phi, 0.0, 1.0, Tolerance::rel(1e-12)).value
}

#[test]
fn second_exp_moment_against_quadrature() {
    let frozen = [
        (0.3, 0.548_444_660_726_311_04),
        (0.4, 0.710_007_663_774_457_86),
    ];
    for (h, v) in frozen {
        assert!((second_moment(h) - v).abs() < 1e-9, "oracle at H = {h}");
        let e = &exp_moments(&ModelParams::new(h, 1), 2, 200_000, 17).unwrap()[1];
        assert!(
            (e.value - v).abs() <= 3.0 * e.stderr + 1e-9,
            "H {h}: {} ± {}",
            e.value,
            e.stderr
        );
    }
}

#[test]
fn brownian_moments() {
    // L_1 = |N(0,1)|: E L_1^m = 2^{m/2} Γ((m+1)/2)/√π; at Exp(1) time E L^m = m! 2^{-m/2}
    let p = ModelParams::new(0.5, 1);
    let unit = unit_moments(&p, 4, 50_000, 5).unwrap();
    let exp = exp_moments(&p, 4, 50_000, 5).unwrap();
    for (u, e) in unit.iter().zip(&exp) {
        let m = u.m as f64;
        let abs_moment = 2f64.powf(m / 2.0) * gamma((m + 1.0) / 2.0) / PI.sqrt();
        assert!(
            (u.value - abs_moment).abs() <= 3.0 * u.stderr + 1e-10,
            "unit m {}",
            u.m
        );
        let exp_moment = gamma(m + 1.0) * SQRT_2.powf(-m);
        assert!(
            (e.value - exp_moment).abs() <= 3.0 * e.stderr + 1e-10,
            "exp m {}",
            e.m
        );
    }
    let again = moment_unit_time(3, &p, 50_000, 5).unwrap();
    assert_eq!(
        again.value,
        moment_unit_time(3, &p, 50_000, 5).unwrap().value
    );
}

#[test]
fn k_a_ladder_is_monotone() {
    // K_a rises with a; the same streams drive every a
    let ks: Vec<f64> = [0.1, 0.2, 0.4]
        .iter()
        .map(|&a| estimate_k_a(0.25, a, 300, 9).unwrap().value)
        .collect();
    assert!(ks[0] < ks[1] && ks[1] < ks[2], "{ks:?}");
    assert!(ks.iter().all(|&k| k > 0.0 && k <= 1.0));
}

#[test]
fn g_n_norms_do_not_grow() {
    let t = g_n_trend(0.25, 2.0, &[1, 2, 3, 4, 5], 100, 11).unwrap();
    assert!(
        t.slope <= 1.96 * t.slope_stderr,
        "slope {} ± {}",
        t.slope,
        t.slope_stderr
    );
    let lo = t.means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = t.means.iter().cloned().fold(0.0, f64::max);
    assert!(hi / lo < 1.5);
}
