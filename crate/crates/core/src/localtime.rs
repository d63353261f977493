//! Kernel-smoothed and occupation-window local time estimators, replica
//! samplers and tail diagnostics.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process_sim::{auto_sampler, CovModel, GridPath};
use crate::real::Real;
use crate::stats::{ks_two_sample, wilson, Z95};

/// Gaussian smoothing kernel with variance `epsilon` per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelParams {
    pub epsilon: f64,
}

impl KernelParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::domain(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(KernelParams { epsilon })
    }

    /// `max(10 Δ^{2H}, 1e-4)`: wide enough to dominate the grid-scale
    /// oscillation `Δ^H` of the path. Smaller values bias tails upward less
    /// but add discretization noise.
    pub fn default_for(step: f64, h: f64) -> Self {
        KernelParams {
            epsilon: (10.0 * step.powf(2.0 * h)).max(1e-4),
        }
    }

    /// The width matching a path observed on `[0, t]` instead of `[0, 1]`.
    pub fn rescaled(self, t: f64, h: f64) -> Self {
        KernelParams {
            epsilon: self.epsilon * t.powf(2.0 * h),
        }
    }
}

/// `(2πε)^{-d/2} exp(-|y|²/(2ε))`.
pub fn gaussian_kernel<T: Real>(y: &[T], epsilon: T) -> T {
    let r2 = y.iter().fold(T::zero(), |s, &v| s + v * v);
    let d = T::from_usize_lossy(y.len());
    (-(r2 / (T::lit(2.0) * epsilon)) - d * T::lit(0.5) * (T::TAU() * epsilon).ln()).exp()
}

/// Trapezoid weights on a uniform grid of `n` points.
#[inline]
pub(crate) fn trapezoid_weight(i: usize, n: usize, step: f64) -> f64 {
    if i == 0 || i + 1 == n {
        0.5 * step
    } else {
        step
    }
}

/// `∫ p_ε(X(s) - x) ds` over the path's grid by the trapezoid rule.
pub fn smoothed_local_time(path: &GridPath, x: &[f64], kernel: KernelParams) -> f64 {
    debug_assert_eq!(x.len(), path.dim);
    let n = path.len();
    let step = path.step();
    let eps = kernel.epsilon;
    let norm = (std::f64::consts::TAU * eps).powf(-0.5 * path.dim as f64);
    let mut acc = 0.0;
    for i in 0..n {
        let r2: f64 = path
            .point(i)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        acc += trapezoid_weight(i, n, step) * (-r2 / (2.0 * eps)).exp();
    }
    norm * acc
}

/// Occupation time of the window `[x-h, x+h]` divided by `2h`, with the
/// indicator integrated by the trapezoid rule. One-dimensional only.
pub fn occupation_local_time(path: &GridPath, x: f64, h: f64) -> Result<f64> {
    if path.dim != 1 {
        return Err(Error::domain(
            "occupation-window estimator is one-dimensional; use the kernel estimator",
        ));
    }
    if !(h > 0.0) {
        return Err(Error::domain("bandwidth must be positive"));
    }
    let n = path.len();
    let step = path.step();
    let occ: f64 = (0..n)
        .filter(|&i| (path.values[i] - x).abs() <= h)
        .map(|i| trapezoid_weight(i, n, step))
        .sum();
    Ok(occ / (2.0 * h))
}

/// Smoothed local times of independent replicas.
#[derive(Debug, Clone, Serialize)]
pub struct LocalTimeSample {
    pub values: Vec<f64>,
    pub model: CovModel,
    pub horizon: f64,
    pub x: Vec<f64>,
    pub kernel: KernelParams,
    pub step: f64,
}

impl LocalTimeSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One smoothed local time per replica, paths drawn on `n_steps` uniform
/// steps of `[0, t]`. Circulant embedding is used for fBm on power-of-two
/// grids, exact factorization otherwise.
pub fn sample_local_time(
    model: &CovModel,
    t: f64,
    x: &[f64],
    kernel: KernelParams,
    n_steps: usize,
    seed: u64,
    replicas: usize,
) -> Result<LocalTimeSample> {
    model.params.validate_local_time()?;
    if x.len() != model.params.d {
        return Err(Error::domain("evaluation point has the wrong dimension"));
    }
    if !(t > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    let step = t / n_steps as f64;
    let values = if replicas == 0 {
        Vec::new()
    } else {
        let sampler = auto_sampler(model, n_steps, t, seed)?;
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| smoothed_local_time(&sampler.path(r), x, kernel))
            .collect()
    };
    Ok(LocalTimeSample {
        values,
        model: *model,
        horizon: t,
        x: x.to_vec(),
        kernel,
        step,
    })
}

/// KS distance between `{L_t}` and `{t^{1-Hd} L_1}`. The sample at `t`
/// must use the rescaled width `ε_t = t^{2H} ε_1`.
pub fn scaling_check(t: f64, base: &LocalTimeSample, at_t: &LocalTimeSample) -> Result<f64> {
    if base.model != at_t.model {
        return Err(Error::domain("samples come from different models"));
    }
    let h = base.model.params.h;
    let expected = base.kernel.rescaled(t, h).epsilon;
    if (at_t.kernel.epsilon - expected).abs() > 1e-12 * expected {
        return Err(Error::domain(format!(
            "kernel at t must be t^(2H) eps_1 = {expected:e}, got {:e}",
            at_t.kernel.epsilon
        )));
    }
    let f = t.powf(1.0 - base.model.params.kappa());
    let scaled: Vec<f64> = base.values.iter().map(|v| v * f).collect();
    Ok(ks_two_sample(&at_t.values, &scaled))
}

#[derive(Debug, Clone, Serialize)]
pub struct TailPoint {
    pub a: f64,
    pub exceedances: u64,
    /// `log P̂{L ≥ a}`.
    pub log_p: f64,
    /// Wilson 95% interval for `log P`.
    pub log_p_low: f64,
    pub log_p_high: f64,
    /// `a^{-1/(Hd)} log P̂`, comparable with `[-θ_upper, -θ_lower]`.
    pub normalized: f64,
    /// Fewer than 10 exceedances: the point is not resolvable.
    pub flagged: bool,
}

/// Empirical log tail at each level with binomial confidence bounds.
pub fn tail_curve(sample: &LocalTimeSample, levels: &[f64]) -> Vec<TailPoint> {
    let n = sample.values.len() as u64;
    let kappa = sample.model.params.kappa();
    levels
        .iter()
        .map(|&a| {
            let k = sample.values.iter().filter(|&&v| v >= a).count() as u64;
            let p = if n == 0 {
                f64::NAN
            } else {
                k as f64 / n as f64
            };
            let (lo, hi) = wilson(k, n, Z95);
            let log_p = p.ln();
            TailPoint {
                a,
                exceedances: k,
                log_p,
                log_p_low: lo.ln(),
                log_p_high: hi.ln(),
                normalized: a.powf(-1.0 / kappa) * log_p,
                flagged: k < 10,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_sim::uniform_grid;

    fn constant_path(value: f64, n: usize, t: f64) -> GridPath {
        let m = CovModel::fbm(0.3, 1).unwrap();
        GridPath::new(uniform_grid(n, t), vec![value; n + 1], 1, m, 0).unwrap()
    }

    #[test]
    fn kernel_values() {
        let k = gaussian_kernel(&[0.0f64], 1.0);
        assert!((k - 0.398_942_280_401_432_7).abs() < 1e-15);
        // (2π·0.25)^{-1}
        let k2 = gaussian_kernel(&[0.0f64, 0.0], 0.25);
        assert!((k2 - 1.0 / (std::f64::consts::TAU * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn kernel_normalized() {
        let (lo, hi, n) = (-10.0, 10.0, 20_000);
        let dx = (hi - lo) / n as f64;
        let mass: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * gaussian_kernel(&[lo + i as f64 * dx], 0.3f64)
            })
            .sum::<f64>()
            * dx;
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_path_estimators() {
        let p = constant_path(0.2, 100, 2.0);
        let eps = 0.01;
        let l = smoothed_local_time(&p, &[0.2], KernelParams::new(eps).unwrap());
        assert!((l - 2.0 / (std::f64::consts::TAU * eps).sqrt()).abs() < 1e-12);
        let occ = occupation_local_time(&p, 0.2, 0.05).unwrap();
        assert!((occ - 2.0 / 0.1).abs() < 1e-12);
        assert_eq!(occupation_local_time(&p, 5.0, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn occupation_rejects_planar_paths() {
        let m = CovModel::fbm(0.3, 2).unwrap();
        let p = GridPath::new(uniform_grid(2, 1.0), vec![0.0; 6], 2, m, 0).unwrap();
        assert!(occupation_local_time(&p, 0.0, 0.1).is_err());
    }

    #[test]
    fn regime_and_empty() {
        let m = CovModel::fbm(0.6, 2).unwrap();
        let k = KernelParams::new(0.01).unwrap();
        assert!(matches!(
            sample_local_time(&m, 1.0, &[0.0, 0.0], k, 16, 1, 10),
            Err(Error::Regime(_))
        ));
        let m = CovModel::fbm(0.3, 1).unwrap();
        let s = sample_local_time(&m, 1.0, &[0.0], k, 16, 1, 0).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn scaling_check_identity() {
        let m = CovModel::fbm(0.3, 1).unwrap();
        let k = KernelParams::new(0.01).unwrap();
        let s = sample_local_time(&m, 1.0, &[0.0], k, 64, 1, 50).unwrap();
        assert_eq!(scaling_check(1.0, &s, &s).unwrap(), 0.0);
        assert!(scaling_check(2.0, &s, &s).is_err());
    }

    #[test]
    fn tail_below_minimum_is_zero() {
        let m = CovModel::fbm(0.5, 1).unwrap();
        let s = LocalTimeSample {
            values: vec![1.0, 2.0, 3.0],
            model: m,
            horizon: 1.0,
            x: vec![0.0],
            kernel: KernelParams::new(0.01).unwrap(),
            step: 0.1,
        };
        let c = tail_curve(&s, &[0.5, 2.5]);
        assert_eq!(c[0].log_p, 0.0);
        assert!((c[1].log_p - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(c[1].flagged);
    }

    #[test]
    fn brownian_kernel_bias_matches_smoothed_mean() {
        // For Brownian motion E p_ε(B(s)) = (2π(s+ε))^{-1/2}, so the kernel
        // estimator's mean is √(2/π)(√(1+ε) - √ε).
        let m = CovModel::fbm(0.5, 1).unwrap();
        let eps = 1e-2;
        let s = sample_local_time(
            &m,
            1.0,
            &[0.0],
            KernelParams::new(eps).unwrap(),
            1024,
            11,
            4000,
        )
        .unwrap();
        let expected = (2.0 / std::f64::consts::PI).sqrt() * ((1.0 + eps).sqrt() - eps.sqrt());
        let mean = crate::stats::mean(&s.values);
        let se = crate::stats::stderr(&s.values);
        assert!(
            (mean - expected).abs() < 3.0 * se + 2e-3,
            "{mean} vs {expected} ± {se}"
        );
    }
}
