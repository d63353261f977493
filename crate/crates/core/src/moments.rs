//! Moments of the local time at zero over unit and exponential horizons,
//! the super/subadditivity checks behind the Fekete limits, and the
//! finite-`m` estimate of `L` and `θ`.
//!
//! The simplex integrals are sampled with independent `Gamma(1-Hd)` gaps.
//! Under that law the importance weight is `det(R)^{-d/2}`, where `R` is
//! the correlation matrix of the increments over the gaps. `R` does not
//! change when all gaps are scaled, so the Dirichlet law needed on the
//! unit simplex gives the same weights as raw Gamma gaps and both
//! horizons share one sample. The leading `k × k` block of `R` belongs to
//! the first `k` gaps, so one Cholesky factor yields the weights of every
//! order up to [`MAX_ORDER`].

use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::intersection::{estimate_alpha, MAX_P};
use crate::ldconst::{l_bounds, theta_bounds, theta_from_l, ConstantKind, RateBounds};
use crate::linalg::cholesky_with_jitter;
use crate::localtime::KernelParams;
use crate::params::ModelParams;
use crate::process_sim::{
    auto_sampler, build_cov_matrix, compute_c_h, conditional_variance, CovKind, CovModel,
};
use crate::quad::{tanh_sinh, tanh_sinh_half_line, Tolerance};
use crate::real::{binomial, ln_factorial, Real};
use crate::report::{CheckReport, NamedEstimate, Verdict};
use crate::rng::{domain, stream};
use crate::stats::Summary;

/// Highest moment order handled by the simplex samplers.
pub const MAX_ORDER: usize = 8;
/// Samples per independent chunk; chunk `c` draws from stream `c`.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentMethod {
    #[serde(rename = "quadrature")]
    Quadrature,
    #[serde(rename = "importance-MC")]
    ImportanceMc,
    #[serde(rename = "path-MC")]
    PathMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub m: usize,
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub method: MomentMethod,
    /// Largest importance weight seen, when sampled.
    pub max_weight: Option<f64>,
}

/// `Π_k Var(B(s_k) | B(s_1), …, B(s_{k-1}))^{-d/2}` for `0 < s_1 < … < s_m`.
pub fn phi_m<T: Real>(times: &[T], params: &ModelParams<T>) -> Result<T> {
    params.validate_fbm()?;
    if times.is_empty() {
        return Err(Error::domain("phi_m needs at least one time"));
    }
    if !(times[0] > T::zero()) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(
            "times must be positive and strictly increasing",
        ));
    }
    let model = CovModel::fbm(params.h, params.d)?;
    let gap = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(times[0], |m, g| m.min(g));
    if gap < T::lit(1e-12) {
        return Err(Error::NonPsd {
            size: times.len(),
            jitter: 0.0,
        });
    }
    let half_d = params.dim() * T::lit(0.5);
    let mut ln_phi = T::zero();
    for k in 0..times.len() {
        let v = conditional_variance(&model, times[k], &times[..k])?;
        if !(v > T::zero()) {
            return Err(Error::NonPsd {
                size: k + 1,
                jitter: 0.0,
            });
        }
        ln_phi = ln_phi - half_d * v.ln();
    }
    Ok(ln_phi.exp())
}

/// `φ_m` through `det Cov(B(s_1), …, B(s_m))^{-d/2}`.
pub fn phi_m_det<T: Real>(times: &[T], params: &ModelParams<T>) -> Result<T> {
    let model = CovModel::fbm(params.h, params.d)?;
    let cov = build_cov_matrix(&model, times)?;
    Ok((-(params.dim() * T::lit(0.5)) * cov.log_det()?).exp())
}

/// `(2H/c_H²)^{md/2}`, the ceiling of every importance weight.
pub fn weight_bound(m: usize, params: &ModelParams) -> Result<f64> {
    let c = compute_c_h(params.h)?;
    Ok((2.0 * params.h / (c * c)).powf(0.5 * (m * params.d) as f64))
}

/// `(b + x)^{2H} - b^{2H}` for `b, x ≥ 0`.
#[inline]
fn pow_diff(b: f64, x: f64, two_h: f64) -> f64 {
    if b <= 0.0 {
        x.powf(two_h)
    } else {
        b.powf(two_h) * (two_h * (x / b).ln_1p()).exp_m1()
    }
}

/// Importance weights `det(R_k)^{-d/2}` for `k = 1..gaps.len()`.
fn prefix_weights(gaps: &[f64], h: f64, d: usize, out: &mut [f64]) -> Result<()> {
    let n = gaps.len();
    let two_h = 2.0 * h;
    let mut r = [0.0f64; MAX_ORDER * MAX_ORDER];
    let r = &mut r[..n * n];
    for k in 0..n {
        r[k * n + k] = 1.0;
        let mut between = 0.0;
        for l in (k + 1)..n {
            // E[Δ_k Δ_l] = ½[(A+g_k+g_l)^{2H} - (A+g_l)^{2H} - (A+g_k)^{2H} + A^{2H}]
            let (gk, gl) = (gaps[k], gaps[l]);
            let cov = 0.5 * (pow_diff(between + gl, gk, two_h) - pow_diff(between, gk, two_h));
            let v = cov / (gk.powf(h) * gl.powf(h));
            r[k * n + l] = v;
            r[l * n + k] = v;
            between += gl;
        }
    }
    let (lower, _) = cholesky_with_jitter(r, n)?;
    let half_d = 0.5 * d as f64;
    let mut ln_det = 0.0;
    for k in 0..n {
        ln_det += 2.0 * lower[k * n + k].ln();
        out[k] = (-half_d * ln_det).exp();
    }
    Ok(())
}

/// Ordered summaries of the weights of orders `1..=m_max`.
#[derive(Debug, Clone)]
struct WeightSample {
    per_order: Vec<Summary>,
    max_weight: Vec<f64>,
    /// Raw weights, kept only for paired checks.
    raw: Option<Vec<Vec<f64>>>,
}

/// Per-chunk Φ summaries, weight maxima and retained draws.
type ChunkOut = (Vec<Summary>, Vec<f64>, Vec<Vec<f64>>);

fn sample_weights(
    params: &ModelParams,
    m_max: usize,
    budget: u64,
    seed: u64,
    keep: bool,
) -> Result<WeightSample> {
    let kappa = params.kappa();
    let gamma = Gamma::new(1.0 - kappa, 1.0).map_err(|e| Error::domain(e.to_string()))?;
    let chunks = budget.div_ceil(CHUNK as u64);
    let (h, d) = (params.h, params.d);
    let parts: Vec<Result<ChunkOut>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = (budget - c * CHUNK as u64).min(CHUNK as u64) as usize;
            let mut rng = stream(seed, domain::MOMENT, c);
            let mut sums = vec![Summary::default(); m_max];
            let mut maxw = vec![0.0f64; m_max];
            let mut raw = if keep {
                vec![Vec::with_capacity(len); m_max]
            } else {
                Vec::new()
            };
            let mut gaps = [0.0f64; MAX_ORDER];
            let mut w = [0.0f64; MAX_ORDER];
            for _ in 0..len {
                for g in gaps.iter_mut().take(m_max) {
                    *g = gamma.sample(&mut rng).max(f64::MIN_POSITIVE);
                }
                prefix_weights(&gaps[..m_max], h, d, &mut w)?;
                for k in 0..m_max {
                    sums[k].push(w[k]);
                    maxw[k] = maxw[k].max(w[k]);
                    if keep {
                        raw[k].push(w[k]);
                    }
                }
            }
            Ok((sums, maxw, raw))
        })
        .collect();
    let mut per_order = vec![Summary::default(); m_max];
    let mut max_weight = vec![0.0f64; m_max];
    let mut raw = if keep {
        vec![Vec::new(); m_max]
    } else {
        Vec::new()
    };
    for part in parts {
        let (s, mw, r) = part?;
        for k in 0..m_max {
            per_order[k] = per_order[k].merge(s[k]);
            max_weight[k] = max_weight[k].max(mw[k]);
        }
        for (dst, src) in raw.iter_mut().zip(r) {
            dst.extend(src);
        }
    }
    Ok(WeightSample {
        per_order,
        max_weight,
        raw: keep.then_some(raw),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Horizon {
    Unit,
    Exponential,
}

/// `m!(2π)^{-md/2}` times the integral of the Gamma envelope.
fn ln_normalizer(m: usize, params: &ModelParams, horizon: Horizon) -> f64 {
    let mf = m as f64;
    let omk = 1.0 - params.kappa();
    let base = ln_factorial::<f64>(m) - 0.5 * mf * params.d as f64 * std::f64::consts::TAU.ln()
        + mf * Real::ln_gamma(omk);
    match horizon {
        Horizon::Unit => base - Real::ln_gamma(1.0 + mf * omk),
        Horizon::Exponential => base,
    }
}

fn first_moment_quadrature(params: &ModelParams, horizon: Horizon) -> MomentEstimate {
    let (h, half_d) = (params.h, 0.5 * params.d as f64);
    let phi1 = move |s: f64| (s * s).powf(h).powf(-half_d) / std::f64::consts::TAU.powf(half_d);
    let tol = Tolerance::tight();
    let value = match horizon {
        Horizon::Unit => tanh_sinh(phi1, 0.0, 1.0, tol).value,
        Horizon::Exponential => {
            tanh_sinh_half_line(move |s: f64| phi1(s) * (-s).exp(), 0.0, 1.0, tol).value
        }
    };
    MomentEstimate {
        m: 1,
        value,
        stderr: 0.0,
        samples: 0,
        method: MomentMethod::Quadrature,
        max_weight: None,
    }
}

fn to_estimate(
    m: usize,
    params: &ModelParams,
    horizon: Horizon,
    ws: &WeightSample,
) -> MomentEstimate {
    let s = ws.per_order[m - 1];
    let norm = ln_normalizer(m, params, horizon).exp();
    let value = norm * s.mean;
    MomentEstimate {
        m,
        value,
        stderr: (norm * s.stderr()).max(f64::EPSILON * value.abs()),
        samples: s.n,
        method: MomentMethod::ImportanceMc,
        max_weight: Some(ws.max_weight[m - 1]),
    }
}

fn check_order(params: &ModelParams, m: usize, budget: u64) -> Result<()> {
    params.validate_fbm()?;
    params.validate_local_time()?;
    if m == 0 || m > MAX_ORDER {
        return Err(Error::domain(format!(
            "moment order must be in 1..={MAX_ORDER}, got {m}"
        )));
    }
    if m > 1 && budget < 2 {
        return Err(Error::domain("budget must allow at least two samples"));
    }
    Ok(())
}

fn moment(
    m: usize,
    params: &ModelParams,
    budget: u64,
    seed: u64,
    horizon: Horizon,
) -> Result<MomentEstimate> {
    check_order(params, m, budget)?;
    if m == 1 {
        return Ok(first_moment_quadrature(params, horizon));
    }
    let ws = sample_weights(params, m, budget, seed, false)?;
    Ok(to_estimate(m, params, horizon, &ws))
}

/// `E[L_1^0(B^H)^m] = m!(2π)^{-md/2} ∫_{0<s_1<…<s_m<1} φ_m(s) ds`.
pub fn moment_unit_time(
    m: usize,
    params: &ModelParams,
    budget: u64,
    seed: u64,
) -> Result<MomentEstimate> {
    moment(m, params, budget, seed, Horizon::Unit)
}

/// `E[L_τ^0(B^H)^m]` with `τ ~ Exp(1)` independent of the process.
pub fn exp_moment(
    m: usize,
    params: &ModelParams,
    budget: u64,
    seed: u64,
) -> Result<MomentEstimate> {
    moment(m, params, budget, seed, Horizon::Exponential)
}

fn moments_upto(
    params: &ModelParams,
    m_max: usize,
    budget: u64,
    seed: u64,
    horizon: Horizon,
) -> Result<Vec<MomentEstimate>> {
    check_order(params, m_max, budget)?;
    let ws = sample_weights(params, m_max, budget, seed, false)?;
    Ok((1..=m_max)
        .map(|m| {
            if m == 1 {
                first_moment_quadrature(params, horizon)
            } else {
                to_estimate(m, params, horizon, &ws)
            }
        })
        .collect())
}

/// Exponential-time moments of orders `1..=m_max` from one shared sample.
pub fn exp_moments(
    params: &ModelParams,
    m_max: usize,
    budget: u64,
    seed: u64,
) -> Result<Vec<MomentEstimate>> {
    moments_upto(params, m_max, budget, seed, Horizon::Exponential)
}

/// Unit-time moments of orders `1..=m_max` from one shared sample; the
/// draws are those of [`exp_moments`] with the same seed.
pub fn unit_moments(
    params: &ModelParams,
    m_max: usize,
    budget: u64,
    seed: u64,
) -> Result<Vec<MomentEstimate>> {
    moments_upto(params, m_max, budget, seed, Horizon::Unit)
}

/// `[m!((2π)^{-d/2}Γ(1-Hd))^m, (πc_H²/H)^{-md/2} m! Γ(1-Hd)^m]`.
pub fn exp_moment_bracket(m: usize, params: &ModelParams) -> Result<(f64, f64)> {
    let l = l_bounds(params)?;
    let lf = ln_factorial::<f64>(m);
    let mf = m as f64;
    Ok((
        (lf + mf * l.lower.ln()).exp(),
        (lf + mf * l.upper.ln()).exp(),
    ))
}

/// Paired check of `E[L_τ^{m+n}] ≥ binom(m+n,m) E[L_τ^m] E[L_τ^n]`.
///
/// All three moments come from the same weight draws and the standard
/// error is that of the linearized slack.
pub fn superadditivity_check(
    m: usize,
    n: usize,
    params: &ModelParams,
    budget: u64,
    seed: u64,
) -> Result<CheckReport> {
    if m == 0 || n == 0 || m + n > 6 {
        return Err(Error::domain(format!(
            "need m, n ≥ 1 and m + n ≤ 6, got ({m}, {n})"
        )));
    }
    check_order(params, m + n, budget)?;
    let top = m + n;
    let ws = sample_weights(params, top, budget, seed, true)?;
    let raw = ws.raw.as_ref().expect("raw weights kept");
    let a = |k: usize| ln_normalizer(k, params, Horizon::Exponential).exp();
    let (am, an, amn) = (a(m), a(n), a(top));
    let mu = |k: usize| ws.per_order[k - 1].mean;
    let (mu_m, mu_n, mu_mn) = (mu(m), mu(n), mu(top));
    let b = binomial::<f64>(top, m);
    let slack = amn * mu_mn - b * am * an * mu_m * mu_n;
    let mut lin = Summary::default();
    for i in 0..raw[0].len() {
        lin.push(
            amn * raw[top - 1][i] - b * am * an * (mu_n * raw[m - 1][i] + mu_m * raw[n - 1][i]),
        );
    }
    let est = |k: usize| {
        let e = to_estimate(k, params, Horizon::Exponential, &ws);
        NamedEstimate::new(format!("E[L_tau^{k}]"), e.value, e.stderr)
    };
    let scale = amn * mu_mn;
    Ok(CheckReport {
        operation: "superadditivity_check".into(),
        params: json!({ "H": params.h, "d": params.d, "m": m, "n": n, "budget": budget, "seed": seed }),
        estimates: vec![est(top), est(m), est(n)],
        inequality: format!("E[L^{top}] >= binom({top},{m}) E[L^{m}] E[L^{n}]"),
        slack,
        stderr: lin.stderr(),
        verdict: Verdict::from_slack(slack, lin.stderr(), 1e-12 * scale),
    })
}

/// Per-order values `(1/m) log((m!)^{-γ} E[·^m])` with the bracket of
/// their limit.
#[derive(Debug, Clone, Serialize)]
pub struct LogMomentGrowth {
    pub orders: Vec<usize>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub gamma: f64,
    pub limit: RateBounds,
}

#[derive(Debug, Clone, Serialize)]
pub struct LThetaEstimate {
    pub growth: LogMomentGrowth,
    /// Certified lower estimate of `L` (largest finite-order value).
    pub l_hat: f64,
    pub l_stderr: f64,
    pub argmax: usize,
    /// Upper estimate of `θ` obtained from `l_hat`.
    pub theta_hat: f64,
    pub l_bracket: RateBounds,
    pub theta_bracket: RateBounds,
    /// True when the bracket collapses and no sampling was done.
    pub analytic: bool,
}

/// `L̂ = max_{m ≤ m_max} (E[L_τ^m]/m!)^{1/m}` and
/// `θ̂ = Hd(1-Hd)^{-1+1/(Hd)} L̂^{-1/(Hd)}`.
pub fn estimate_l_theta(
    params: &ModelParams,
    m_max: usize,
    budget: u64,
    seed: u64,
) -> Result<LThetaEstimate> {
    check_order(params, m_max, budget)?;
    let l_bracket = l_bounds(params)?;
    let theta_bracket = theta_bounds(params)?;
    let limit = RateBounds::new(l_bracket.lower.ln(), l_bracket.upper.ln(), ConstantKind::L);
    if params.is_brownian() {
        // both spacing laws coincide with the Markov envelope: E[L_τ^m] = m! L^m
        let l = l_bracket.lower;
        let orders: Vec<usize> = (1..=m_max).collect();
        return Ok(LThetaEstimate {
            growth: LogMomentGrowth {
                values: vec![l.ln(); m_max],
                stderrs: vec![0.0; m_max],
                orders,
                gamma: 1.0,
                limit,
            },
            l_hat: l,
            l_stderr: 0.0,
            argmax: 1,
            theta_hat: theta_from_l(params, l),
            l_bracket,
            theta_bracket,
            analytic: true,
        });
    }
    let est = exp_moments(params, m_max, budget, seed)?;
    let mut values = Vec::with_capacity(m_max);
    let mut stderrs = Vec::with_capacity(m_max);
    for e in &est {
        let mf = e.m as f64;
        values.push((e.value.ln() - ln_factorial::<f64>(e.m)) / mf);
        stderrs.push(e.stderr / (mf * e.value));
    }
    let (argmax, best) = values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let l_hat = best.exp();
    Ok(LThetaEstimate {
        growth: LogMomentGrowth {
            orders: (1..=m_max).collect(),
            values,
            stderrs: stderrs.clone(),
            gamma: 1.0,
            limit,
        },
        l_hat,
        l_stderr: l_hat * stderrs[argmax],
        argmax: argmax + 1,
        theta_hat: theta_from_l(params, l_hat),
        l_bracket,
        theta_bracket,
        analytic: false,
    })
}

/// `(m!)^p ((H/π)^{d(p-1)/2} p^{-d/2} Γ(1-Hd/p*)^p)^m`, an upper bound on
/// the exponential-horizon intersection moments of the RL processes.
pub fn intersection_exp_moment_bound<T: Real>(m: usize, params: &ModelParams<T>) -> Result<T> {
    params.validate_fbm()?;
    params.validate_intersection()?;
    let d = params.dim();
    let p = T::from_usize_lossy(params.p);
    let half = T::lit(0.5);
    let omk = T::one() - params.kappa() / params.p_star();
    let per = d * (p - T::one()) * half * (params.h / T::PI()).ln() - d * half * p.ln()
        + p * omk.ln_gamma();
    let mf = T::from_usize_lossy(m);
    Ok((p * T::lit(ln_factorial::<f64>(m)) + mf * per).exp())
}

/// Samples of `α̃ = α([0,τ_1]×[0,τ_2])` for RL paths with independent
/// `Exp(1)` horizons. Replica `r` uses path streams `2r, 2r+1` on `[0,1]`,
/// rescaled by self-similarity, and horizon stream `r`.
pub fn sample_alpha_exp_horizon(
    params: &ModelParams,
    kernel: KernelParams,
    n_steps: usize,
    seed: u64,
    replicas: usize,
) -> Result<Vec<f64>> {
    params.validate_intersection()?;
    if params.p != 2 || params.p > MAX_P {
        return Err(Error::domain("exponential-horizon sampling supports p = 2"));
    }
    let model = CovModel::new(CovKind::Rl, *params)?;
    let sampler = auto_sampler(&model, n_steps, 1.0, seed)?;
    let exp = rand_distr::Exp1;
    (0..replicas as u64)
        .map(|r| {
            let mut hr = stream(seed, domain::HORIZON, r);
            let t1: f64 = exp.sample(&mut hr);
            let t2: f64 = exp.sample(&mut hr);
            let a = sampler.path(2 * r).rescaled(t1);
            let b = sampler.path(2 * r + 1).rescaled(t2);
            estimate_alpha(&[&a, &b], &[(0.0, t1), (0.0, t2)], kernel)
        })
        .collect()
}

/// Paired check of `E[α̃^{m+n}] ≤ binom(m+n,m)^p E[α̃^m] E[α̃^n]`.
#[allow(clippy::too_many_arguments)]
pub fn subadditivity_check_intersection(
    m: usize,
    n: usize,
    params: &ModelParams,
    kernel: KernelParams,
    n_steps: usize,
    seed: u64,
    replicas: usize,
) -> Result<CheckReport> {
    if params.p != 2 {
        return Err(Error::domain("subadditivity check supports p = 2"));
    }
    if m == 0 || n == 0 || m + n > 4 {
        return Err(Error::domain(format!(
            "need m, n ≥ 1 and m + n ≤ 4, got ({m}, {n})"
        )));
    }
    let xs = sample_alpha_exp_horizon(params, kernel, n_steps, seed, replicas)?;
    let top = (m + n) as i32;
    let (mi, ni) = (m as i32, n as i32);
    let mom = |k: i32| Summary::from_slice(&xs.iter().map(|x| x.powi(k)).collect::<Vec<_>>());
    let (sm, sn, smn) = (mom(mi), mom(ni), mom(top));
    let b = binomial::<f64>(m + n, m).powi(params.p as i32);
    let slack = b * sm.mean * sn.mean - smn.mean;
    let mut lin = Summary::default();
    for x in &xs {
        lin.push(b * (sn.mean * x.powi(mi) + sm.mean * x.powi(ni)) - x.powi(top));
    }
    let est = |k: i32, s: Summary| NamedEstimate::new(format!("E[alpha^{k}]"), s.mean, s.stderr());
    Ok(CheckReport {
        operation: "subadditivity_check_intersection".into(),
        params: json!({ "H": params.h, "d": params.d, "p": params.p, "m": m, "n": n,
            "epsilon": kernel.epsilon, "n_steps": n_steps, "replicas": replicas, "seed": seed }),
        estimates: vec![est(top, smn), est(mi, sm), est(ni, sn)],
        inequality: format!("E[alpha^{top}] <= binom({top},{m})^p E[alpha^{m}] E[alpha^{n}]"),
        slack,
        stderr: lin.stderr(),
        verdict: Verdict::from_slack(slack, lin.stderr(), 1e-12 * smn.mean.abs()),
    })
}
