//! Mutual intersection local time of `p` independent paths through the
//! collapsed Gaussian kernel `g_ε`.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::localtime::KernelParams;
use crate::params::ModelParams;
use crate::process_sim::{auto_sampler, compute_c_h, CovKind, CovModel, GridPath};
use crate::real::Real;
use crate::report::{CheckReport, NamedEstimate, Verdict};
use crate::stats::{ks_two_sample, Summary};

/// Largest supported number of paths.
pub const MAX_P: usize = 3;

/// Per-path grid size limit for the `O(n^p)` product sum.
pub fn max_points(p: usize) -> usize {
    match p {
        2 => 4096,
        3 => 256,
        _ => 0,
    }
}

/// `∫ Π_j p_ε(y_j - x) dx = (2πε)^{-d(p-1)/2} p^{-d/2} exp(-Σ_j |y_j - ȳ|²/(2ε))`.
pub fn g_eps<T: Real>(ys: &[&[T]], epsilon: T) -> T {
    let p = ys.len();
    assert!(p >= 2, "g_eps needs at least two points");
    let d = ys[0].len();
    let pf = T::from_usize_lossy(p);
    let mut spread = T::zero();
    for k in 0..d {
        let mean = ys.iter().fold(T::zero(), |s, y| s + y[k]) / pf;
        spread = ys
            .iter()
            .fold(spread, |s, y| s + (y[k] - mean) * (y[k] - mean));
    }
    let df = T::from_usize_lossy(d);
    let half = T::lit(0.5);
    let ln_norm = -(df * (pf - T::one()) * half) * (T::TAU() * epsilon).ln() - df * half * pf.ln();
    (ln_norm - spread / (T::lit(2.0) * epsilon)).exp()
}

/// Exponent of `α([0,t]^p) = t^{p - Hd(p-1)} α([0,1]^p)` in law.
pub fn intersection_scaling_exponent<T: Real>(params: &ModelParams<T>) -> T {
    let p = T::from_usize_lossy(params.p);
    p - params.kappa() * (p - T::one())
}

/// Trapezoid weights of the grid points lying in `[lo, hi]`.
fn region_weights(path: &GridPath, lo: f64, hi: f64) -> Vec<(usize, f64)> {
    let tol = 1e-12 * path.step();
    let idx: Vec<usize> = (0..path.len())
        .filter(|&i| path.times[i] >= lo - tol && path.times[i] <= hi + tol)
        .collect();
    if idx.len() < 2 {
        return Vec::new();
    }
    let step = path.step();
    let last = idx.len() - 1;
    idx.iter()
        .enumerate()
        .map(|(k, &i)| {
            (
                i,
                if k == 0 || k == last {
                    0.5 * step
                } else {
                    step
                },
            )
        })
        .collect()
}

/// `p`-fold trapezoid sum of `g_ε` over the product grid restricted to
/// `region` (one interval per path).
pub fn estimate_alpha(
    paths: &[&GridPath],
    region: &[(f64, f64)],
    kernel: KernelParams,
) -> Result<f64> {
    let p = paths.len();
    if !(2..=MAX_P).contains(&p) {
        return Err(Error::SizeLimit(format!(
            "supported p is 2..={MAX_P}, got {p}"
        )));
    }
    if region.len() != p {
        return Err(Error::domain("region needs one interval per path"));
    }
    let d = paths[0].dim;
    if paths.iter().any(|q| q.dim != d) {
        return Err(Error::domain("paths must share the dimension"));
    }
    for q in paths {
        if q.len() > max_points(p) {
            return Err(Error::SizeLimit(format!(
                "p = {p} allows at most {} grid points per path, got {}",
                max_points(p),
                q.len()
            )));
        }
    }
    for (q, &(lo, hi)) in paths.iter().zip(region) {
        if lo > hi || lo < q.times[0] - 1e-12 || hi > q.horizon() * (1.0 + 1e-12) {
            return Err(Error::domain("region must lie within each path's horizon"));
        }
    }
    let w: Vec<Vec<(usize, f64)>> = paths
        .iter()
        .zip(region)
        .map(|(q, &(lo, hi))| region_weights(q, lo, hi))
        .collect();
    if w.iter().any(|v| v.is_empty()) {
        return Ok(0.0);
    }
    let eps = kernel.epsilon;
    let df = d as f64;
    let pf = p as f64;
    let norm = (std::f64::consts::TAU * eps).powf(-0.5 * df * (pf - 1.0)) * pf.powf(-0.5 * df);
    let inv = 1.0 / (2.0 * eps);

    let rows: Vec<f64> = match p {
        2 => w[0]
            .par_iter()
            .map(|&(i, wi)| {
                let y1 = paths[0].point(i);
                let mut s = 0.0;
                for &(j, wj) in &w[1] {
                    let y2 = paths[1].point(j);
                    // Σ|y_j - ȳ|² = |y1 - y2|²/2 for two points
                    let r2: f64 = y1.iter().zip(y2).map(|(a, b)| (a - b) * (a - b)).sum();
                    s += wj * (-0.5 * r2 * inv).exp();
                }
                wi * s
            })
            .collect(),
        _ => w[0]
            .par_iter()
            .map(|&(i, wi)| {
                let y1 = paths[0].point(i);
                let mut s = 0.0;
                for &(j, wj) in &w[1] {
                    let y2 = paths[1].point(j);
                    let r12: f64 = y1.iter().zip(y2).map(|(a, b)| (a - b) * (a - b)).sum();
                    let mut inner = 0.0;
                    for &(k, wk) in &w[2] {
                        let y3 = paths[2].point(k);
                        let mut r = r12;
                        for c in 0..d {
                            r += (y1[c] - y3[c]).powi(2) + (y2[c] - y3[c]).powi(2);
                        }
                        // Σ|y_j - ȳ|² = (1/3) Σ_{i<j} |y_i - y_j|²
                        inner += wk * (-(r / 3.0) * inv).exp();
                    }
                    s += wj * inner;
                }
                wi * s
            })
            .collect(),
    };
    Ok(norm * rows.iter().sum::<f64>())
}

#[derive(Debug, Clone, Serialize)]
pub struct IntersectionSample {
    pub values: Vec<f64>,
    pub model: CovModel,
    pub params: ModelParams,
    pub region: Vec<(f64, f64)>,
    pub kernel: KernelParams,
    pub step: f64,
}

/// `α̂([0,t]^p)` for independent replicas. Replica `r` uses path streams
/// `r·p .. r·p + p - 1`.
pub fn sample_alpha(
    model: &CovModel,
    p: usize,
    t: f64,
    kernel: KernelParams,
    n_steps: usize,
    seed: u64,
    replicas: usize,
) -> Result<IntersectionSample> {
    let params = ModelParams::with_p(model.params.h, model.params.d, p);
    params.validate_intersection()?;
    if p > MAX_P {
        return Err(Error::SizeLimit(format!(
            "supported p is 2..={MAX_P}, got {p}"
        )));
    }
    if n_steps + 1 > max_points(p) {
        return Err(Error::SizeLimit(format!(
            "p = {p} allows at most {} grid points per path",
            max_points(p)
        )));
    }
    let region = vec![(0.0, t); p];
    let values = if replicas == 0 {
        Vec::new()
    } else {
        let sampler = auto_sampler(model, n_steps, t, seed)?;
        let pu = p as u64;
        // outer loop sequential: each α̂ already runs in parallel
        (0..replicas as u64)
            .map(|r| {
                let paths: Vec<GridPath> = (0..pu).map(|j| sampler.path(r * pu + j)).collect();
                let refs: Vec<&GridPath> = paths.iter().collect();
                estimate_alpha(&refs, &region, kernel)
            })
            .collect::<Result<Vec<f64>>>()?
    };
    Ok(IntersectionSample {
        values,
        model: *model,
        params,
        region,
        kernel,
        step: t / n_steps as f64,
    })
}

/// KS distance between `α̂([0,t]^p)` and `t^{p-Hd(p-1)} α̂([0,1]^p)`; the
/// sample at `t` must use `ε_t = t^{2H} ε_1`.
pub fn intersection_scaling_check(
    t: f64,
    base: &IntersectionSample,
    at_t: &IntersectionSample,
) -> Result<f64> {
    if base.params != at_t.params || base.model != at_t.model {
        return Err(Error::domain("samples come from different models"));
    }
    let expected = base.kernel.rescaled(t, base.params.h).epsilon;
    if (at_t.kernel.epsilon - expected).abs() > 1e-12 * expected {
        return Err(Error::domain(format!(
            "kernel at t must be t^(2H) eps_1 = {expected:e}, got {:e}",
            at_t.kernel.epsilon
        )));
    }
    let f = t.powf(intersection_scaling_exponent(&base.params));
    let scaled: Vec<f64> = base.values.iter().map(|v| v * f).collect();
    Ok(ks_two_sample(&at_t.values, &scaled))
}

/// Paired check `E[α̃^m] ≥ c_H^{d(p-1)m} E[α^m]` on `[0,1]^p`, with the RL
/// and fBm paths driven by the same normals.
pub fn comparison_check_intersection(
    m: u32,
    params: &ModelParams,
    kernel: KernelParams,
    n_steps: usize,
    seed: u64,
    replicas: usize,
) -> Result<CheckReport> {
    params.validate_intersection()?;
    let rl = CovModel::new(CovKind::Rl, *params)?;
    let fbm = CovModel::new(CovKind::Fbm, *params)?;
    let c = compute_c_h(params.h)?;
    let factor = c.powf((params.d * (params.p - 1)) as f64 * m as f64);
    let s_rl = sample_alpha(&rl, params.p, 1.0, kernel, n_steps, seed, replicas)?;
    let s_b = sample_alpha(&fbm, params.p, 1.0, kernel, n_steps, seed, replicas)?;
    let mi = m as i32;
    let diffs: Vec<f64> = s_rl
        .values
        .iter()
        .zip(&s_b.values)
        .map(|(a, b)| a.powi(mi) - factor * b.powi(mi))
        .collect();
    let d = Summary::from_slice(&diffs);
    let rl_m = Summary::from_slice(&s_rl.values.iter().map(|a| a.powi(mi)).collect::<Vec<_>>());
    let b_m = Summary::from_slice(&s_b.values.iter().map(|a| a.powi(mi)).collect::<Vec<_>>());
    Ok(CheckReport {
        operation: "comparison_check_intersection".into(),
        params: json!({ "H": params.h, "d": params.d, "p": params.p, "m": m,
            "epsilon": kernel.epsilon, "n": n_steps, "replicas": replicas, "seed": seed }),
        estimates: vec![
            NamedEstimate::new("E[alpha_RL^m]", rl_m.mean, rl_m.stderr()),
            NamedEstimate::new(
                "c_H^{d(p-1)m} E[alpha_fBm^m]",
                factor * b_m.mean,
                factor * b_m.stderr(),
            ),
        ],
        inequality: "E[alpha_RL^m] >= c_H^{d(p-1)m} E[alpha_fBm^m]".into(),
        slack: d.mean,
        stderr: d.stderr(),
        verdict: Verdict::from_slack(d.mean, d.stderr(), 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_sim::{sample_paths, uniform_grid};

    #[test]
    fn two_point_kernel_is_difference_density() {
        let eps = 0.3f64;
        let (a, b) = ([0.4, -0.2], [-0.1, 0.5]);
        let g = g_eps(&[&a[..], &b[..]], eps);
        let r2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        let direct = (2.0 * std::f64::consts::TAU * eps).powf(-1.0) * (-r2 / (4.0 * eps)).exp();
        assert!((g - direct).abs() < 1e-15);
    }

    #[test]
    fn equal_points() {
        let y = [0.3f64];
        let g = g_eps(&[&y[..], &y[..], &y[..]], 0.5);
        let expected = (std::f64::consts::TAU * 0.5).powf(-1.0) * 3f64.powf(-0.5);
        assert!((g - expected).abs() < 1e-15);
    }

    #[test]
    fn exponent_arithmetic() {
        assert_eq!(
            intersection_scaling_exponent(&ModelParams::with_p(0.25, 1, 2)),
            1.75
        );
    }

    #[test]
    fn zero_volume_and_monotone_regions() {
        let m = CovModel::rl(0.25, 1).unwrap();
        let ps = sample_paths(&m, &uniform_grid(32, 1.0), 3, 2).unwrap();
        let refs = [&ps[0], &ps[1]];
        let k = KernelParams::new(0.05).unwrap();
        assert_eq!(
            estimate_alpha(&refs, &[(0.5, 0.5), (0.0, 1.0)], k).unwrap(),
            0.0
        );
        let small = estimate_alpha(&refs, &[(0.0, 0.5), (0.25, 0.75)], k).unwrap();
        let big = estimate_alpha(&refs, &[(0.0, 1.0), (0.0, 1.0)], k).unwrap();
        assert!(small > 0.0 && small <= big);
    }

    #[test]
    fn size_limits() {
        let m = CovModel::rl(0.25, 1).unwrap();
        let ps = sample_paths(&m, &uniform_grid(300, 1.0), 3, 3).unwrap();
        let refs = [&ps[0], &ps[1], &ps[2]];
        let k = KernelParams::new(0.05).unwrap();
        assert!(matches!(
            estimate_alpha(&refs, &[(0.0, 1.0); 3], k),
            Err(Error::SizeLimit(_))
        ));
    }

    #[test]
    fn three_path_sum_matches_generic_kernel() {
        let m = CovModel::fbm(0.4, 2).unwrap();
        let ps = sample_paths(&m, &uniform_grid(4, 1.0), 8, 3).unwrap();
        let refs = [&ps[0], &ps[1], &ps[2]];
        let k = KernelParams::new(0.2).unwrap();
        let fast = estimate_alpha(&refs, &[(0.0, 1.0); 3], k).unwrap();
        let w = |i: usize| if i == 0 || i == 4 { 0.125 } else { 0.25 };
        let mut slow = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                for l in 0..5 {
                    slow += w(i)
                        * w(j)
                        * w(l)
                        * g_eps(&[ps[0].point(i), ps[1].point(j), ps[2].point(l)], 0.2);
                }
            }
        }
        assert!((fast - slow).abs() < 1e-13 * slow);
    }
}
