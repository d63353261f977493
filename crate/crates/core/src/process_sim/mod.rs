//! Covariance kernels of fractional Brownian motion, the Riemann–Liouville
//! process and the moving-average remainder, with exact-in-law samplers.
//!
//! Every coordinate of a `d`-dimensional process is an independent copy of
//! the scalar process described by its kernel.

mod io;
mod path;

pub use io::{read_binary, read_csv, write_binary, write_csv, write_csv_many};
pub use path::{
    auto_sampler, sample_fbm_circulant, sample_paths, uniform_grid, CirculantOutput,
    CirculantSampler, FactorSampler, GridPath, PathSampler, MAX_FACTOR_GRID,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, forward_substitute, CovMatrix};
use crate::params::ModelParams;
use crate::quad::{gauss_kronrod, tanh_sinh_half_line, Tolerance};
use crate::real::{ln_beta, Real};

/// The moving-average normalizing constant `c_H`, with
/// `c_H^{-1} B^H = W^H + Z^H` in law.
pub fn compute_c_h<T: Real>(h: T) -> Result<T> {
    if !(h > T::zero() && h < T::one()) {
        return Err(Error::domain(format!("c_H needs H in (0,1), got {h}")));
    }
    let half = T::lit(0.5);
    // c_H^2 = 2H 4^H / B(1-H, H+1/2)
    let ln_c2 = (T::lit(2.0) * h).ln() + h * T::lit(4.0).ln() - ln_beta(T::one() - h, h + half);
    Ok((half * ln_c2).exp())
}

/// `c_H^{-2}` from its defining integral
/// `∫_0^∞ ((1+x)^{H-1/2} - x^{H-1/2})^2 dx + 1/(2H)`.
pub fn c_h_defining_integral<T: Real>(h: T) -> Result<T> {
    if !(h > T::zero() && h < T::one()) {
        return Err(Error::domain(format!("c_H needs H in (0,1), got {h}")));
    }
    let a = h - T::lit(0.5);
    let tail = tanh_sinh_half_line(
        |x: T| {
            let d = increment_power(T::one(), x, a);
            d * d
        },
        T::zero(),
        T::one(),
        Tolerance::tight(),
    );
    Ok(tail.value + T::one() / (T::lit(2.0) * h))
}

/// `(s+u)^a - u^a` for `u > 0`, free of cancellation when `u ≫ s`.
#[inline]
fn increment_power<T: Real>(s: T, u: T, a: T) -> T {
    if u <= T::zero() {
        return s.powf(a)
            - if a > T::zero() {
                T::zero()
            } else {
                T::infinity()
            };
    }
    u.powf(a) * (a * (s / u).ln_1p()).exp_m1()
}

/// `½(|t|^{2H} + |s|^{2H} - |t-s|^{2H})`. Negative times are accepted;
/// they index the two-sided process.
pub fn fbm_cov<T: Real>(s: T, t: T, h: T) -> T {
    let e = T::lit(2.0) * h;
    let p = |x: T| {
        if x == T::zero() {
            T::zero()
        } else {
            x.abs().powf(e)
        }
    };
    T::lit(0.5) * (p(t) + p(s) - p(t - s))
}

/// `∫_0^{min(s,t)} (s-u)^{H-1/2} (t-u)^{H-1/2} du`.
///
/// With `m = min(s,t)`, `δ = |t-s|` and `v = m - u` the integrand is
/// `v^a (v+δ)^a`; the substitution `w = v^{H+1/2}` removes the endpoint
/// singularity and leaves `∫_0^{m^{H+1/2}} (δ + w^{1/(H+1/2)})^a dw / (H+1/2)`.
pub fn rl_cov<T: Real>(s: T, t: T, h: T) -> T {
    let m = s.min(t);
    if m <= T::zero() {
        return T::zero();
    }
    let two_h = T::lit(2.0) * h;
    let delta = (t - s).abs();
    if delta == T::zero() {
        return m.powf(two_h) / two_h;
    }
    let half = T::lit(0.5);
    if (h - half).abs() <= T::epsilon() {
        return m;
    }
    let a = h - half;
    let b = h + half;
    let inv_b = T::one() / b;
    let upper = m.powf(b);
    // The integrand varies on the scale δ^b near w = 0.
    let knee = delta.powf(b);
    let f = |w: T| (delta + w.powf(inv_b)).powf(a);
    let tol = Tolerance::tight();
    let q = if knee < upper {
        let lo = gauss_kronrod(f, T::zero(), knee, tol).value;
        lo + gauss_kronrod(f, knee, upper, tol).value
    } else {
        gauss_kronrod(f, T::zero(), upper, tol).value
    };
    q * inv_b
}

/// `∫_0^∞ ((s+u)^{H-1/2} - u^{H-1/2})((t+u)^{H-1/2} - u^{H-1/2}) du`,
/// compactified by `u = L x/(1-x)` with `L = √(st)`.
pub fn remainder_cov<T: Real>(s: T, t: T, h: T) -> T {
    if s <= T::zero() || t <= T::zero() {
        return T::zero();
    }
    let a = h - T::lit(0.5);
    if a.abs() <= T::epsilon() {
        return T::zero();
    }
    let scale = (s * t).sqrt();
    let f = |u: T| increment_power(s, u, a) * increment_power(t, u, a);
    tanh_sinh_half_line(f, T::zero(), scale, Tolerance::tight()).value
}

/// `Cov(Z^{(j)}(s), Z^{(k)}(t))` for derivative orders `j, k ≤ 2` of the
/// remainder, `s, t > 0`. Differentiating under the integral replaces
/// `(s+u)^a - u^a` by `a (s+u)^{a-1}` and `a (a-1) (s+u)^{a-2}`.
pub fn remainder_cov_deriv<T: Real>(s: T, j: usize, t: T, k: usize, h: T) -> T {
    if j == 0 && k == 0 {
        return remainder_cov(s, t, h);
    }
    let a = h - T::lit(0.5);
    let g = |x: T, order: usize, u: T| -> T {
        match order {
            0 => increment_power(x, u, a),
            1 => a * (x + u).powf(a - T::one()),
            2 => a * (a - T::one()) * (x + u).powf(a - T::lit(2.0)),
            _ => unreachable!("derivative order above 2"),
        }
    };
    assert!(j <= 2 && k <= 2, "derivative order above 2");
    let scale = (s * t).sqrt();
    tanh_sinh_half_line(
        |u: T| g(s, j, u) * g(t, k, u),
        T::zero(),
        scale,
        Tolerance::tight(),
    )
    .value
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CovKind {
    Fbm,
    Rl,
    Remainder,
    /// `c_H^{-1} B^H`.
    FbmScaled,
}

impl CovKind {
    pub fn code(self) -> u32 {
        match self {
            CovKind::Fbm => 0,
            CovKind::Rl => 1,
            CovKind::Remainder => 2,
            CovKind::FbmScaled => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<CovKind> {
        match code {
            0 => Some(CovKind::Fbm),
            1 => Some(CovKind::Rl),
            2 => Some(CovKind::Remainder),
            3 => Some(CovKind::FbmScaled),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CovKind::Fbm => "FBM",
            CovKind::Rl => "RL",
            CovKind::Remainder => "REMAINDER",
            CovKind::FbmScaled => "FBM_SCALED",
        }
    }
}

impl std::str::FromStr for CovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FBM" => Ok(CovKind::Fbm),
            "RL" => Ok(CovKind::Rl),
            "REMAINDER" | "Z" => Ok(CovKind::Remainder),
            "FBM_SCALED" => Ok(CovKind::FbmScaled),
            other => Err(Error::domain(format!("unknown model kind {other}"))),
        }
    }
}

/// A scalar covariance kernel together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovModel<T = f64> {
    pub kind: CovKind,
    pub params: ModelParams<T>,
}

impl<T: Real> CovModel<T> {
    pub fn new(kind: CovKind, params: ModelParams<T>) -> Result<Self> {
        let m = CovModel { kind, params };
        m.validate()?;
        Ok(m)
    }

    pub fn fbm(h: T, d: usize) -> Result<Self> {
        Self::new(CovKind::Fbm, ModelParams::new(h, d))
    }

    pub fn rl(h: T, d: usize) -> Result<Self> {
        Self::new(CovKind::Rl, ModelParams::new(h, d))
    }

    pub fn remainder(h: T, d: usize) -> Result<Self> {
        Self::new(CovKind::Remainder, ModelParams::new(h, d))
    }

    pub fn fbm_scaled(h: T, d: usize) -> Result<Self> {
        Self::new(CovKind::FbmScaled, ModelParams::new(h, d))
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            CovKind::Rl => self.params.validate_basic(),
            _ => self.params.validate_fbm(),
        }
    }

    /// Scalar kernel `Cov(X(s), X(t))`.
    pub fn cov(&self, s: T, t: T) -> T {
        let h = self.params.h;
        match self.kind {
            CovKind::Fbm => fbm_cov(s, t, h),
            CovKind::Rl => rl_cov(s, t, h),
            CovKind::Remainder => remainder_cov(s, t, h),
            CovKind::FbmScaled => {
                let c = compute_c_h(h).expect("validated H");
                fbm_cov(s, t, h) / (c * c)
            }
        }
    }

    /// Self-similarity index: `X(λt) = λ^H X(t)` in law for all kinds.
    pub fn hurst(&self) -> T {
        self.params.h
    }
}

/// Covariance matrix of the model on `grid`, rows filled in parallel.
pub fn build_cov_matrix<T: Real>(model: &CovModel<T>, grid: &[T]) -> Result<CovMatrix<T>> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("grid must be strictly increasing"));
    }
    let n = grid.len();
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| model.cov(grid[i], grid[j])).collect())
        .collect();
    let mut entries = vec![T::zero(); n * n];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    CovMatrix::from_entries(grid.to_vec(), entries)
}

/// Schur complement `Var X(t) - kᵀ K^{-1} k` over the conditioning times.
pub fn conditional_variance<T: Real>(
    model: &CovModel<T>,
    target: T,
    conditioners: &[T],
) -> Result<T> {
    if conditioners.contains(&target) {
        return Err(Error::domain("target time is among the conditioners"));
    }
    let var = model.cov(target, target);
    let n = conditioners.len();
    if n == 0 {
        return Ok(var);
    }
    let mut k = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = model.cov(conditioners[i], conditioners[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let (lower, _) = cholesky_with_jitter(&k, n)?;
    let mut b: Vec<T> = conditioners.iter().map(|&c| model.cov(c, target)).collect();
    forward_substitute(&lower, n, &mut b);
    let proj = b.iter().fold(T::zero(), |s, &x| s + x * x);
    Ok((var - proj).max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_h_brownian_is_one() {
        assert!((compute_c_h(0.5f64).unwrap() - 1.0).abs() < 1e-15);
        assert!(compute_c_h(1.0f64).is_err());
        assert!(compute_c_h(0.0f64).is_err());
    }

    #[test]
    fn c_h_matches_defining_integral() {
        for &h in &[0.1f64, 0.25, 0.4, 0.6, 0.75, 0.9] {
            let c = compute_c_h(h).unwrap();
            let inv = c_h_defining_integral(h).unwrap();
            assert!((1.0 / (c * c) - inv).abs() < 1e-10, "H={h}");
        }
    }

    #[test]
    fn fbm_cov_values() {
        assert_eq!(fbm_cov(0.0f64, 5.0, 0.3), 0.0);
        assert!((fbm_cov(1.0f64, 2.0, 0.5) - 1.0).abs() < 1e-15);
        // ½(2^{1.5} + 1 - 1)
        assert!((fbm_cov(1.0f64, 2.0, 0.75) - 2f64.powf(1.5) / 2.0).abs() < 1e-15);
        assert!((fbm_cov(1.0f64, 2.0, 0.75) - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn rl_cov_closed_cases() {
        assert!((rl_cov(1.0f64, 3.0, 0.5) - 1.0).abs() < 1e-15);
        assert!((rl_cov(0.7f64, 0.7, 0.25) - 0.7f64.powf(0.5) / 0.5).abs() < 1e-14);
        assert_eq!(rl_cov(0.0f64, 1.0, 0.3), 0.0);
        // near-diagonal continuity
        // the off-diagonal defect is of order δ^{2H}
        let near = rl_cov(1.0f64, 1.0 + 1e-9, 0.25);
        assert!(near < 2.0 && near > 2.0 - 1e-4);
    }

    #[test]
    fn remainder_vanishes_at_origin_and_brownian() {
        assert_eq!(remainder_cov(0.0f64, 1.0, 0.25), 0.0);
        assert_eq!(remainder_cov(1.0f64, 2.0, 0.5), 0.0);
        assert!(remainder_cov(1.0f64, 1.0, 0.25) > 0.0);
    }

    #[test]
    fn decomposition_pointwise() {
        for &h in &[0.25f64, 0.75] {
            let c = compute_c_h(h).unwrap();
            for &(s, t) in &[(0.1, 1.0), (0.5, 0.5), (0.3, 0.9)] {
                let lhs = fbm_cov(s, t, h) / (c * c);
                let rhs = rl_cov(s, t, h) + remainder_cov(s, t, h);
                assert!((lhs - rhs).abs() < 1e-9, "H={h} s={s} t={t}: {lhs} {rhs}");
            }
        }
    }

    #[test]
    fn build_matrix_examples() {
        let m = build_cov_matrix(&CovModel::fbm(0.3f64, 1).unwrap(), &[1.0]).unwrap();
        assert!((m.get(0, 0) - 1.0).abs() < 1e-15);
        let m = build_cov_matrix(&CovModel::rl(0.25f64, 1).unwrap(), &[1.0]).unwrap();
        assert!((m.get(0, 0) - 2.0).abs() < 1e-14);
        assert!(build_cov_matrix(&CovModel::fbm(0.3f64, 1).unwrap(), &[1.0, 0.5]).is_err());
    }

    #[test]
    fn conditional_variance_brownian() {
        let bm = CovModel::fbm(0.5f64, 1).unwrap();
        assert!((conditional_variance(&bm, 1.0, &[]).unwrap() - 1.0).abs() < 1e-15);
        let v: f64 = conditional_variance(&bm, 1.0, &[0.25, 0.5]).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert!(conditional_variance(&bm, 0.5, &[0.5]).is_err());
    }

    #[test]
    fn single_precision_kernels() {
        let c = compute_c_h(0.3f32).unwrap();
        let c64 = compute_c_h(0.3f64).unwrap();
        assert!((c as f64 - c64).abs() < 1e-5);
        assert!((rl_cov(1.0f32, 2.0, 0.75) as f64 - rl_cov(1.0f64, 2.0, 0.75)).abs() < 1e-4);
    }
}
