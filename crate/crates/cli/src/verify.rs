//! The `verify` suites. Each suite is a fixed list of checks whose only
//! inputs are the seed, the Monte Carlo budget and the replica count.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use fracld::intersection::{
    comparison_check_intersection, g_eps, intersection_scaling_check, sample_alpha,
};
use fracld::ldconst::{k_tilde_bounds, km_transform, l_bounds, theta_bounds};
use fracld::localtime::{gaussian_kernel, KernelParams};
use fracld::moments::{
    estimate_l_theta, exp_moment, exp_moment_bracket, exp_moments, intersection_exp_moment_bound,
    moment_unit_time, sample_alpha_exp_horizon, subadditivity_check_intersection,
    superadditivity_check, weight_bound,
};
use fracld::process_sim::{c_h_defining_integral, compute_c_h, fbm_cov, remainder_cov, rl_cov};
use fracld::quad::{gauss_kronrod, Tolerance};
use fracld::real::{gamma, ln_factorial};
use fracld::report::{to_json_string, NamedEstimate, SCHEMA_VERSION};
use fracld::rkhs::{
    comparison_check, estimate_k_a, fractional_integral_fn, g_n_trend, monomial_norm, rkhs_norm,
    rkhs_norm_fn, rkhs_order, ComparisonConfig, RkhsFunction, ZaFill,
};
use fracld::rng::derive_seed;
use fracld::stats::Summary;
use fracld::{CheckReport, CovModel, ModelParams, Verdict};

use crate::commands::emit;
use crate::config::Common;
use crate::{exit, CliError};

pub const SUITES: [&str; 4] = ["core", "moments", "rkhs", "intersection"];

/// Inputs shared by every check of a suite.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub budget: u64,
    pub replicas: usize,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Counts {
    pub holds: usize,
    pub inconclusive: usize,
    pub violated: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: String,
    pub config: SuiteConfig,
    pub checks: Vec<CheckReport>,
    pub counts: Counts,
    pub verdict: Verdict,
}

impl SuiteReport {
    pub fn new(suite: &str, config: SuiteConfig, checks: Vec<CheckReport>) -> Self {
        let mut counts = Counts::default();
        let mut verdict = Verdict::Holds;
        for c in &checks {
            match c.verdict {
                Verdict::Holds => counts.holds += 1,
                Verdict::Inconclusive => counts.inconclusive += 1,
                Verdict::Violated => counts.violated += 1,
            }
            verdict = verdict.combine(c.verdict);
        }
        SuiteReport {
            schema_version: SCHEMA_VERSION,
            suite: suite.to_string(),
            config,
            checks,
            counts,
            verdict,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Holds => exit::OK,
            Verdict::Inconclusive => exit::INCONCLUSIVE,
            Verdict::Violated => exit::FAILURE,
        }
    }
}

const DEFAULT_REPLICAS: usize = 1000;
/// The comparison checks resolve their margins at 3σ only from about 2000 pairs.
const RKHS_REPLICAS: usize = 2000;

pub fn run_suite(name: &str, common: &Common, out: &mut dyn Write) -> Result<i32, CliError> {
    if name == "list" {
        for s in SUITES {
            writeln!(out, "{s}")?;
        }
        return Ok(exit::OK);
    }
    if common.format.is_some_and(|f| f != crate::Format::Json) {
        return Err(CliError::Usage("verify only writes JSON".into()));
    }
    let config = SuiteConfig {
        seed: common.seed,
        budget: common.budget.unwrap_or(1_000_000),
        replicas: common.replicas.unwrap_or(if name == "rkhs" {
            RKHS_REPLICAS
        } else {
            DEFAULT_REPLICAS
        }),
    };
    if config.replicas < 20 {
        return Err(CliError::Usage("verify needs at least 20 replicas".into()));
    }
    let checks = suite_checks(name, &config)?;
    let report = SuiteReport::new(name, config, checks);
    emit(
        common.out.as_deref(),
        to_json_string(&report).as_bytes(),
        out,
    )?;
    Ok(report.exit_code())
}

pub fn suite_checks(name: &str, config: &SuiteConfig) -> Result<Vec<CheckReport>, CliError> {
    Ok(match name {
        "core" => core(config)?,
        "moments" => moments(config)?,
        "rkhs" => rkhs(config)?,
        "intersection" => intersection(config)?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown suite {other:?}; available: {}",
                SUITES.join(", ")
            )))
        }
    })
}

/// `|a - b| <= tol` for deterministic quantities.
fn identity(op: &str, params: Value, a: (&str, f64), b: (&str, f64), tol: f64) -> CheckReport {
    let diff = (a.1 - b.1).abs();
    CheckReport {
        operation: op.into(),
        params,
        estimates: vec![
            NamedEstimate::new(a.0, a.1, 0.0),
            NamedEstimate::new(b.0, b.1, 0.0),
        ],
        inequality: format!("|{} - {}| <= {tol:e}", a.0, b.0),
        slack: tol - diff,
        stderr: 0.0,
        verdict: Verdict::from_bool(diff <= tol),
    }
}

/// A deterministic claim `slack >= 0`.
fn claim(
    op: &str,
    params: Value,
    estimates: Vec<NamedEstimate>,
    inequality: &str,
    slack: f64,
) -> CheckReport {
    CheckReport {
        operation: op.into(),
        params,
        estimates,
        inequality: inequality.into(),
        slack,
        stderr: 0.0,
        verdict: Verdict::from_bool(slack >= 0.0),
    }
}

fn est(label: &str, v: f64) -> NamedEstimate {
    NamedEstimate::new(label, v, 0.0)
}

/// `∫_{R^d} p_ε(y1 - x) p_ε(y2 - x) dx` by nested adaptive quadrature
/// over a box around the midpoint.
pub fn pair_density_quadrature(y1: &[f64], y2: &[f64], eps: f64) -> f64 {
    fn level(k: usize, prefix: &[f64], y1: &[f64], y2: &[f64], eps: f64) -> f64 {
        if k == y1.len() {
            let a: Vec<f64> = y1.iter().zip(prefix).map(|(y, x)| y - x).collect();
            let b: Vec<f64> = y2.iter().zip(prefix).map(|(y, x)| y - x).collect();
            return gaussian_kernel(&a, eps) * gaussian_kernel(&b, eps);
        }
        let mid = 0.5 * (y1[k] + y2[k]);
        let w = 12.0 * eps.sqrt() + 0.5 * (y1[k] - y2[k]).abs();
        let f = |x: f64| {
            let mut p = prefix.to_vec();
            p.push(x);
            level(k + 1, &p, y1, y2, eps)
        };
        gauss_kronrod(f, mid - w, mid + w, Tolerance::new(1e-15, 1e-13)).value
    }
    level(0, &[], y1, y2, eps)
}

/// `E p_ε^p`-type oracle for two independent processes with variance
/// functions `v`: `∫∫ (2π(v(s)+v(t)+2ε))^{-d/2} ds dt` over `[0,1]²`.
pub fn alpha_mean_oracle(v: impl Fn(f64) -> f64 + Copy, d: usize, eps: f64) -> f64 {
    let tol = Tolerance::new(1e-13, 1e-11);
    let half_d = 0.5 * d as f64;
    let inner = |s: f64| {
        gauss_kronrod(
            |t: f64| (std::f64::consts::TAU * (v(s) + v(t) + 2.0 * eps)).powf(-half_d),
            0.0,
            1.0,
            tol,
        )
        .value
    };
    gauss_kronrod(inner, 0.0, 1.0, tol).value
}

fn core(_config: &SuiteConfig) -> Result<Vec<CheckReport>, CliError> {
    let mut out = Vec::new();
    for &h in &[0.1f64, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9] {
        let c = compute_c_h(h)?;
        let from_integral = c_h_defining_integral(h)?.powf(-0.5);
        out.push(identity(
            "c_H_identity",
            json!({ "H": h }),
            ("c_H closed form", c),
            ("c_H defining integral", from_integral),
            1e-8,
        ));
        out.push(claim(
            "c_H_below_2H",
            json!({ "H": h }),
            vec![est("c_H^2", c * c), est("2H", 2.0 * h)],
            "c_H^2 < 2H",
            if c * c < 2.0 * h {
                2.0 * h - c * c
            } else {
                -1.0
            },
        ));
    }
    out.push(identity(
        "c_H_identity",
        json!({ "H": 0.5 }),
        ("c_H", compute_c_h(0.5)?),
        ("1", 1.0),
        0.0,
    ));

    let b = theta_bounds(&ModelParams::new(0.5, 1))?;
    let brownian = json!({ "H": 0.5, "d": 1 });
    out.push(identity(
        "theta_bounds",
        brownian.clone(),
        ("theta lower", b.lower),
        ("1/2", 0.5),
        1e-12,
    ));
    out.push(identity(
        "theta_bounds",
        brownian.clone(),
        ("theta upper", b.upper),
        ("1/2", 0.5),
        1e-12,
    ));
    let l = l_bounds(&ModelParams::new(0.5, 1))?;
    out.push(identity(
        "l_bounds",
        brownian,
        ("L upper", l.upper),
        ("L lower", l.lower),
        1e-14,
    ));

    // the theta bracket is ordered exactly when c_H^2 <= 2H
    let mut mismatches = 0usize;
    let mut worst = f64::INFINITY;
    for i in 1..20 {
        let h = i as f64 * 0.05;
        let b = theta_bounds(&ModelParams::new(h, 1))?;
        let c = compute_c_h(h)?;
        if b.is_ordered() != (c * c <= 2.0 * h * (1.0 + 1e-14)) {
            mismatches += 1;
        }
        worst = worst.min(b.upper - b.lower);
    }
    out.push(claim(
        "theta_bounds_ordering",
        json!({ "d": 1, "H": "0.05..0.95" }),
        vec![
            est("mismatches", mismatches as f64),
            est("min(upper - lower)", worst),
        ],
        "theta bracket ordered iff c_H^2 <= 2H",
        -(mismatches as f64),
    ));

    let pts: [(&[f64], &[f64]); 3] = [
        (&[0.3], &[-0.1]),
        (&[0.3, -0.2], &[0.1, 0.25]),
        (&[0.3, -0.2, 0.05], &[0.1, 0.25, -0.15]),
    ];
    let eps = 0.05;
    for (y1, y2) in pts {
        let d = y1.len();
        let g = g_eps(&[y1, y2], eps);
        let diff: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a - b).collect();
        let dens = gaussian_kernel(&diff, 2.0 * eps);
        let q = pair_density_quadrature(y1, y2, eps);
        let params = json!({ "d": d, "p": 2, "epsilon": eps });
        out.push(identity(
            "g_eps_pair",
            params.clone(),
            ("g_eps", g),
            ("p_2eps(y1 - y2)", dens),
            1e-10,
        ));
        out.push(identity(
            "g_eps_pair",
            params,
            ("g_eps", g),
            ("quadrature", q),
            1e-10,
        ));
    }

    for &(h, d) in &[(0.3, 1usize), (0.25, 2)] {
        let params = ModelParams::new(h, d);
        let norm = std::f64::consts::TAU.powf(-0.5 * d as f64);
        let kappa = h * d as f64;
        let u = moment_unit_time(1, &params, 1, 0)?;
        let e = exp_moment(1, &params, 1, 0)?;
        let pj = json!({ "H": h, "d": d, "m": 1 });
        out.push(identity(
            "moment_unit_time",
            pj.clone(),
            ("E[L_1]", u.value),
            ("(2pi)^{-d/2}/(1-Hd)", norm / (1.0 - kappa)),
            1e-8,
        ));
        out.push(identity(
            "exp_moment",
            pj,
            ("E[L_tau]", e.value),
            ("(2pi)^{-d/2} Gamma(1-Hd)", norm * gamma(1.0 - kappa)),
            1e-8,
        ));
    }

    let grid: Vec<f64> = (0..32).map(|i| 0.1 + 0.9 * i as f64 / 31.0).collect();
    for &h in &[0.25f64, 0.75] {
        let c2 = compute_c_h(h)?.powi(2);
        let mut err = 0.0f64;
        for &s in &grid {
            for &t in &grid {
                err = err
                    .max((fbm_cov(s, t, h) / c2 - rl_cov(s, t, h) - remainder_cov(s, t, h)).abs());
            }
        }
        out.push(claim(
            "covariance_decomposition",
            json!({ "H": h, "grid": 32 }),
            vec![est("max error", err)],
            "max |c_H^-2 Cov_fBm - Cov_RL - Cov_Z| < 1e-6",
            1e-6 - err,
        ));
    }

    // Y = c Exp(1): E Y^m = c^m m!, so the growth rate is log c with γ = 1
    // and P(Y > y) = e^{-y/c}
    for &c in &[0.5, 1.0, 2.0] {
        let m = 20usize;
        let ln_moment = m as f64 * f64::ln(c) + ln_factorial::<f64>(m);
        let kappa = (ln_moment - ln_factorial::<f64>(m)) / m as f64;
        let rate = km_transform(kappa, 1.0)?;
        out.push(identity(
            "km_transform",
            json!({ "c": c, "gamma": 1.0 }),
            ("transform", rate),
            ("1/c", 1.0 / c),
            1e-12,
        ));
    }

    let mut worst = f64::INFINITY;
    let mut cases = 0usize;
    for p in 2..=3usize {
        for d in 1..=3usize {
            for i in 1..10 {
                let params = ModelParams::with_p(i as f64 / 10.0, d, p);
                if params.validate_intersection().is_err() {
                    continue;
                }
                let b = k_tilde_bounds(&params)?;
                worst = worst.min((b.upper - b.lower) / b.upper + 1e-12);
                cases += 1;
            }
        }
    }
    out.push(claim(
        "k_tilde_bounds_ordering",
        json!({ "p": [2, 3], "d": [1, 2, 3], "H": "0.1..0.9", "cases": cases }),
        vec![est("min (upper - lower)/upper + 1e-12", worst)],
        "K_tilde lower <= upper",
        worst,
    ));
    Ok(out)
}

fn moments(config: &SuiteConfig) -> Result<Vec<CheckReport>, CliError> {
    let mut out = Vec::new();
    let (seed, budget) = (config.seed, config.budget);
    let params = ModelParams::new(0.4, 1);
    let est = exp_moments(&params, 5, budget, derive_seed(seed, 1))?;
    for e in &est[1..] {
        let (lo, hi) = exp_moment_bracket(e.m, &params)?;
        let slack = (e.value - lo).min(hi - e.value);
        out.push(CheckReport {
            operation: "exp_moment_bracket".into(),
            params: json!({ "H": 0.4, "d": 1, "m": e.m, "budget": budget }),
            estimates: vec![
                NamedEstimate::new("E[L_tau^m]", e.value, e.stderr),
                NamedEstimate::new("lower", lo, 0.0),
                NamedEstimate::new("upper", hi, 0.0),
            ],
            inequality: "lower <= E[L_tau^m] <= upper".into(),
            slack,
            stderr: e.stderr,
            verdict: Verdict::from_slack(slack, e.stderr, 0.0),
        });
        if let Some(w) = e.max_weight {
            let bound = weight_bound(e.m, &params)?;
            out.push(claim(
                "weight_bound",
                json!({ "H": 0.4, "d": 1, "m": e.m }),
                vec![
                    NamedEstimate::new("max weight", w, 0.0),
                    NamedEstimate::new("bound", bound, 0.0),
                ],
                "max weight <= (2H/c_H^2)^{md/2}",
                bound - w,
            ));
        }
    }
    for (m, n) in [(1, 1), (1, 2), (2, 2)] {
        out.push(superadditivity_check(
            m,
            n,
            &params,
            budget,
            derive_seed(seed, 2),
        )?);
    }
    let lt = estimate_l_theta(&params, 6, budget, derive_seed(seed, 1))?;
    let slack = lt.l_bracket.upper - lt.l_hat;
    out.push(CheckReport {
        operation: "estimate_l_theta".into(),
        params: json!({ "H": 0.4, "d": 1, "m_max": 6, "budget": budget }),
        estimates: vec![
            NamedEstimate::new("L_hat", lt.l_hat, lt.l_stderr),
            NamedEstimate::new("L upper", lt.l_bracket.upper, 0.0),
            NamedEstimate::new("theta_hat", lt.theta_hat, 0.0),
        ],
        inequality: "L_hat <= L upper".into(),
        slack,
        stderr: lt.l_stderr,
        verdict: Verdict::from_slack(slack, lt.l_stderr, 0.0),
    });

    // Brownian local time at time 1 is |N(0,1)|
    let bm = ModelParams::new(0.5, 1);
    let u = moment_unit_time(2, &bm, budget, derive_seed(seed, 3))?;
    out.push(CheckReport {
        operation: "moment_unit_time".into(),
        params: json!({ "H": 0.5, "d": 1, "m": 2, "budget": budget }),
        estimates: vec![
            NamedEstimate::new("E[L_1^2]", u.value, u.stderr),
            NamedEstimate::new("E|N|^2", 1.0, 0.0),
        ],
        inequality: "E[L_1^2] = 1".into(),
        slack: -(u.value - 1.0).abs(),
        stderr: u.stderr,
        verdict: Verdict::from_agreement(u.value - 1.0, u.stderr, 1e-12),
    });
    let lb = estimate_l_theta(&bm, 4, budget, seed)?;
    out.push(identity(
        "estimate_l_theta",
        json!({ "H": 0.5, "d": 1 }),
        ("L_hat", lb.l_hat),
        ("2^{-1/2}", std::f64::consts::FRAC_1_SQRT_2),
        1e-12,
    ));
    Ok(out)
}

fn rkhs(config: &SuiteConfig) -> Result<Vec<CheckReport>, CliError> {
    let mut out = Vec::new();
    let (seed, replicas) = (config.seed, config.replicas);

    let t = 0.8f64;
    let mut err = 0.0f64;
    for beta in 0..=3 {
        for &alpha in &[0.25, 0.5, 0.75, 1.0] {
            let b = beta as f64;
            let v = fractional_integral_fn(|s: f64| s.powi(beta), alpha, t)?;
            let exact = gamma(b + 1.0) / gamma(b + 1.0 + alpha) * t.powf(b + alpha);
            err = err.max((v - exact).abs());
        }
    }
    out.push(claim(
        "fractional_integral_power_rule",
        json!({ "t": t, "beta": [0, 1, 2, 3], "alpha": [0.25, 0.5, 0.75, 1.0] }),
        vec![est("max error", err)],
        "max |I^alpha t^beta - closed form| <= 1e-8",
        1e-8 - err,
    ));

    for &t in &[0.5f64, 1.0] {
        let inner = |s: f64| fractional_integral_fn(f64::cos, 0.4, s).unwrap_or(f64::NAN);
        let nested = fractional_integral_fn(inner, 0.3, t)?;
        let direct = fractional_integral_fn(f64::cos, 0.7, t)?;
        out.push(identity(
            "fractional_integral_semigroup",
            json!({ "f": "cos", "t": t, "alpha": 0.3, "beta": 0.4 }),
            ("I^0.3 I^0.4 f", nested),
            ("I^0.7 f", direct),
            1e-6,
        ));
    }

    for &h in &[0.25, 0.75] {
        let m = rkhs_order(h);
        for k in m..m + 4 {
            let c = (k - m + 1..=k).fold(1.0, |p, j| p * j as f64);
            let q = rkhs_norm_fn(|s: f64| c * s.powi((k - m) as i32), h, 1.0)?;
            let exact = monomial_norm(k, h, 1.0);
            out.push(identity(
                "rkhs_norm_monomial",
                json!({ "H": h, "k": k }),
                ("quadrature", q),
                ("closed form", exact),
                1e-6 * exact.max(1.0),
            ));
        }
    }

    let h = 0.25;
    let n = 400;
    let f = RkhsFunction::from_derivatives(h, 1.0, n, &|t: f64| t, &[&|_| 1.0])?;
    let g = RkhsFunction::from_derivatives(h, 1.0, n, &f64::sin, &[&f64::cos])?;
    let (nf, ng) = (rkhs_norm(&f)?, rkhs_norm(&g)?);
    let n_scaled = rkhs_norm(&f.scaled(-2.5))?;
    let n_sum = rkhs_norm(&f.add(&g)?)?;
    let rel = (n_scaled - 2.5 * nf).abs();
    out.push(claim(
        "rkhs_norm_homogeneity",
        json!({ "H": h, "n": n, "c": -2.5 }),
        vec![est("||c f||", n_scaled), est("|c| ||f||", 2.5 * nf)],
        "| ||c f|| - |c| ||f|| | <= 1e-8",
        1e-8 - rel,
    ));
    out.push(claim(
        "rkhs_norm_triangle",
        json!({ "H": h, "n": n }),
        vec![est("||f + g||", n_sum), est("||f|| + ||g||", nf + ng)],
        "||f + g|| <= ||f|| + ||g|| + 1e-8",
        nf + ng + 1e-8 - n_sum,
    ));

    for &(h, z, zd) in &[(0.25f64, -0.7f64, None), (0.75, 0.4, Some(-1.1f64))] {
        let a = 0.3f64;
        let fill = ZaFill::new(a, h, z, zd)?;
        let mut gap = (fill.value(a) - z).abs().max(fill.value(0.0).abs());
        if let Some(zd) = zd {
            gap = gap
                .max((fill.derivative(a) - zd).abs())
                .max(fill.derivative(0.0).abs());
        }
        let tol = 8.0 * f64::EPSILON * (1.0 + z.abs() + zd.unwrap_or(0.0).abs());
        out.push(claim(
            "z_a_boundary",
            json!({ "H": h, "a": a, "z": z, "zdot": zd }),
            vec![est("max boundary mismatch", gap)],
            "fill matches value (and derivative) at a and vanishes at 0",
            tol - gap,
        ));
    }

    let k = estimate_k_a(0.25, 0.2, replicas, derive_seed(seed, 4))?;
    out.push(CheckReport {
        operation: "estimate_k_a".into(),
        params: json!({ "H": 0.25, "a": 0.2, "replicas": replicas }),
        estimates: vec![NamedEstimate::new("K_a", k.value, k.stderr)],
        inequality: "0 < K_a <= 1".into(),
        slack: k.value.min(1.0 - k.value),
        stderr: k.stderr,
        verdict: Verdict::from_bool(k.value > 0.0 && k.value <= 1.0),
    });

    for m in 1..=2 {
        out.extend(comparison_check(
            m,
            &ModelParams::new(0.3, 1),
            ComparisonConfig::default(),
            replicas,
            derive_seed(seed, 5),
        )?);
    }
    out.extend(comparison_check(
        1,
        &ModelParams::new(0.5, 1),
        ComparisonConfig::default(),
        replicas,
        derive_seed(seed, 6),
    )?);

    // growth would show as a positive slope; none is claimed
    let trend = g_n_trend(
        0.25,
        2.0,
        &[1, 2, 3, 4, 5],
        (replicas / 5).max(10),
        derive_seed(seed, 7),
    )?;
    let z95 = fracld::stats::Z95;
    out.push(CheckReport {
        operation: "g_n_trend".into(),
        params: json!({ "H": 0.25, "N": 2.0, "n": trend.n, "replicas": (replicas / 5).max(10) }),
        estimates: trend
            .means
            .iter()
            .zip(&trend.stderrs)
            .zip(&trend.n)
            .map(|((m, s), n)| NamedEstimate::new(format!("E||G_{n}||^2"), *m, *s))
            .chain(std::iter::once(NamedEstimate::new(
                "slope",
                trend.slope,
                trend.slope_stderr,
            )))
            .collect(),
        inequality: "slope <= 1.96 stderr".into(),
        slack: -trend.slope,
        stderr: trend.slope_stderr,
        verdict: Verdict::from_bool(trend.slope <= z95 * trend.slope_stderr),
    });
    Ok(out)
}

fn intersection(config: &SuiteConfig) -> Result<Vec<CheckReport>, CliError> {
    let mut out = Vec::new();
    let (seed, replicas) = (config.seed, config.replicas);

    let y: [&[f64]; 3] = [&[0.1, -0.3], &[0.25, 0.05], &[-0.2, 0.15]];
    let eps = 0.07;
    let g = g_eps(&y, eps);
    let permuted = g_eps(&[y[2], y[0], y[1]], eps);
    let shifted: Vec<Vec<f64>> = y
        .iter()
        .map(|p| p.iter().map(|v| v + 0.37).collect())
        .collect();
    let s_refs: Vec<&[f64]> = shifted.iter().map(|v| v.as_slice()).collect();
    let moved = g_eps(&s_refs, eps);
    let pj = json!({ "d": 2, "p": 3, "epsilon": eps });
    out.push(identity(
        "g_eps_symmetry",
        pj.clone(),
        ("g_eps", g),
        ("g_eps permuted", permuted),
        1e-14 * g,
    ));
    out.push(identity(
        "g_eps_translation",
        pj,
        ("g_eps", g),
        ("g_eps shifted", moved),
        1e-12 * g,
    ));

    let params = ModelParams::with_p(0.25, 1, 2);
    let rl = CovModel::rl(0.25, 1)?;
    let kernel = KernelParams::new(0.01)?;
    let n = 256;
    let s = sample_alpha(&rl, 2, 1.0, kernel, n, derive_seed(seed, 8), replicas)?;
    let sum = Summary::from_slice(&s.values);
    let oracle = alpha_mean_oracle(|t| rl_cov(t, t, 0.25), 1, kernel.epsilon);
    out.push(CheckReport {
        operation: "estimate_alpha_mean".into(),
        params: json!({ "H": 0.25, "d": 1, "p": 2, "epsilon": kernel.epsilon, "n": n, "replicas": replicas }),
        estimates: vec![
            NamedEstimate::new("mean alpha_hat", sum.mean, sum.stderr()),
            NamedEstimate::new("quadrature E g_eps", oracle, 0.0),
        ],
        inequality: "|mean - oracle| <= 3 stderr".into(),
        slack: -(sum.mean - oracle).abs(),
        stderr: sum.stderr(),
        verdict: Verdict::from_agreement(sum.mean - oracle, sum.stderr(), 0.0),
    });

    let half = (replicas / 2).max(10);
    let k1 = KernelParams::default_for(1.0 / n as f64, 0.25);
    let base = sample_alpha(&rl, 2, 1.0, k1, n, derive_seed(seed, 9), half)?;
    let at2 = sample_alpha(
        &rl,
        2,
        2.0,
        k1.rescaled(2.0, 0.25),
        n,
        derive_seed(seed, 10),
        half,
    )?;
    let ks = intersection_scaling_check(2.0, &base, &at2)?;
    out.push(claim(
        "intersection_scaling",
        json!({ "H": 0.25, "d": 1, "p": 2, "t": 2.0, "n": n, "epsilon": k1.epsilon, "replicas": half }),
        vec![est("KS", ks)],
        "KS < 0.08",
        0.08 - ks,
    ));

    let coarse = KernelParams::new(0.1)?;
    let n_exp = 32;
    let many = replicas * 10;
    for (m, nn) in [(1, 1), (1, 2)] {
        out.push(subadditivity_check_intersection(
            m,
            nn,
            &params,
            coarse,
            n_exp,
            derive_seed(seed, 11),
            many,
        )?);
    }
    let xs = sample_alpha_exp_horizon(&params, coarse, n_exp, derive_seed(seed, 11), many)?;
    let sx = Summary::from_slice(&xs);
    let bound = intersection_exp_moment_bound(1, &params)?;
    out.push(CheckReport {
        operation: "intersection_exp_moment_bound".into(),
        params: json!({ "H": 0.25, "d": 1, "p": 2, "m": 1, "epsilon": coarse.epsilon, "n": n_exp, "replicas": many }),
        estimates: vec![NamedEstimate::new("E[alpha_tilde]", sx.mean, sx.stderr()), NamedEstimate::new("bound", bound, 0.0)],
        inequality: "E[alpha_tilde] <= bound".into(),
        slack: bound - sx.mean,
        stderr: sx.stderr(),
        verdict: Verdict::from_slack(bound - sx.mean, sx.stderr(), 0.0),
    });

    out.push(comparison_check_intersection(
        1,
        &params,
        k1,
        128,
        derive_seed(seed, 12),
        half,
    )?);
    Ok(out)
}
