//! Riemann–Liouville fractional integrals, norms in the reproducing kernel
//! Hilbert space of the RL process, the polynomial fills that move the
//! remainder and `Q_n` processes into that space, and the Monte Carlo
//! comparison between the RL process and fBm.
//!
//! For `m = ⌈H + 1/2⌉` and `β = m - H - 1/2` the norm of a function with
//! `f^{(k)}(0) = 0` (`k < m`) is `k_H ‖I^β f^{(m)}‖_{L²[0,T]}`, with
//! `k_H = 1/Γ(H + 1/2)`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, lower_mul};
use crate::localtime::{smoothed_local_time, KernelParams};
use crate::moments::{MomentEstimate, MomentMethod};
use crate::params::ModelParams;
use crate::process_sim::{
    compute_c_h, remainder_cov_deriv, uniform_grid, CovKind, CovModel, FactorSampler, GridPath,
    PathSampler,
};
use crate::quad::{gauss_kronrod, tanh_sinh, Tolerance};
use crate::real::{gamma, Real};
use crate::report::{CheckReport, NamedEstimate, Verdict};
use crate::rng::{derive_seed, domain, stream, Rng};
use crate::stats::{linear_fit, Summary};

/// Tail grid intervals used by [`estimate_k_a`] and [`sample_g_n_norms`].
pub const DEFAULT_TAIL_GRID: usize = 400;

/// `⌈H + 1/2⌉`.
pub fn rkhs_order<T: Real>(h: T) -> usize {
    if h + T::lit(0.5) <= T::one() {
        1
    } else {
        2
    }
}

/// `β = m - H - 1/2`, the order of the fractional integral in the norm.
pub fn norm_exponent<T: Real>(h: T) -> T {
    T::from_usize_lossy(rkhs_order(h)) - h - T::lit(0.5)
}

/// `k_H = Γ(H + 1/2)^{-1}`.
pub fn k_h<T: Real>(h: T) -> T {
    T::one() / gamma(h + T::lit(0.5))
}

/// `(I^α f)(t) = Γ(α)^{-1} ∫_0^t (t-s)^{α-1} f(s) ds`; for `α < 1` the
/// substitution `w = (t-s)^α` removes the kernel singularity.
pub fn fractional_integral_fn<T: Real, F: Fn(T) -> T>(f: F, alpha: T, t: T) -> Result<T> {
    if !(alpha >= T::zero()) {
        return Err(Error::domain(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    if !(t >= T::zero()) {
        return Err(Error::domain("fractional integral needs t >= 0"));
    }
    if alpha == T::zero() {
        return Ok(f(t));
    }
    if t == T::zero() {
        return Ok(T::zero());
    }
    let tol = Tolerance::tight();
    if alpha < T::one() {
        let inv = T::one() / alpha;
        let q = tanh_sinh(
            |w: T| f((t - w.powf(inv)).max(T::zero())),
            T::zero(),
            t.powf(alpha),
            tol,
        );
        Ok(q.value / gamma(alpha + T::one()))
    } else {
        let q = tanh_sinh(
            |s: T| (t - s).powf(alpha - T::one()) * f(s),
            T::zero(),
            t,
            tol,
        );
        Ok(q.value / gamma(alpha))
    }
}

/// Product-trapezoid weights for `I^α` at node `n` of a uniform grid:
/// `a_0 = (n-1)^{α+1} - (n-1-α) n^α`,
/// `a_j = (n-j+1)^{α+1} + (n-j-1)^{α+1} - 2(n-j)^{α+1}`, `a_n = 1`,
/// all scaled by `Δ^α/Γ(α+2)`.
struct ProductTrapezoid<T> {
    alpha: T,
    scale: T,
    /// `b_k` for the interior weight at distance `k = n - j`.
    interior: Vec<T>,
}

impl<T: Real> ProductTrapezoid<T> {
    fn new(alpha: T, step: T, len: usize) -> Self {
        let ap1 = alpha + T::one();
        let p = |k: usize| T::from_usize_lossy(k).powf(ap1);
        let interior = (0..len.max(2))
            .map(|k| {
                if k == 0 {
                    T::zero()
                } else {
                    p(k + 1) + p(k - 1) - T::lit(2.0) * p(k)
                }
            })
            .collect();
        ProductTrapezoid {
            alpha,
            scale: step.powf(alpha) / gamma(alpha + T::lit(2.0)),
            interior,
        }
    }

    fn first(&self, n: usize) -> T {
        let nf = T::from_usize_lossy(n);
        let nm1 = nf - T::one();
        nm1.powf(self.alpha + T::one()) - (nm1 - self.alpha) * nf.powf(self.alpha)
    }

    fn apply(&self, f: &[T], out: &mut [T]) {
        if f.is_empty() {
            return;
        }
        out[0] = T::zero();
        for n in 1..f.len() {
            let mut s = self.first(n) * f[0] + f[n];
            for j in 1..n {
                s = s + self.interior[n - j] * f[j];
            }
            out[n] = self.scale * s;
        }
    }
}

/// `I^α` of samples on a uniform grid starting at the lower limit, by
/// product integration against the piecewise-linear interpolant.
pub fn fractional_integral_samples<T: Real>(samples: &[T], step: T, alpha: T) -> Result<Vec<T>> {
    if !(alpha >= T::zero()) {
        return Err(Error::domain(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    if !(step > T::zero()) {
        return Err(Error::domain("grid step must be positive"));
    }
    if alpha == T::zero() {
        return Ok(samples.to_vec());
    }
    let mut out = vec![T::zero(); samples.len()];
    ProductTrapezoid::new(alpha, step, samples.len()).apply(samples, &mut out);
    Ok(out)
}

fn trapezoid_sq<T: Real>(g: &[T], step: T) -> T {
    let n = g.len();
    if n < 2 {
        return T::zero();
    }
    let inner = g[1..n - 1].iter().fold(T::zero(), |s, &x| s + x * x);
    step * (inner + T::lit(0.5) * (g[0] * g[0] + g[n - 1] * g[n - 1]))
}

/// A function on a uniform grid of `[0, horizon]` with its `m`-th
/// derivative, `m = ⌈H + 1/2⌉`.
#[derive(Debug, Clone)]
pub struct RkhsFunction<T = f64> {
    pub horizon: T,
    pub h: T,
    pub order: usize,
    pub values: Vec<T>,
    pub derivative: Vec<T>,
    /// `f^{(k)}(0)` for `k < m`.
    pub initial: Vec<T>,
    /// Accepted size of the entries of `initial`.
    pub initial_tol: T,
}

impl<T: Real> RkhsFunction<T> {
    /// From closures `f` and `derivs[k-1] = f^{(k)}`, `k = 1..=m`.
    pub fn from_derivatives(
        h: T,
        horizon: T,
        n: usize,
        f: &dyn Fn(T) -> T,
        derivs: &[&dyn Fn(T) -> T],
    ) -> Result<Self> {
        let order = rkhs_order(h);
        if derivs.len() < order {
            return Err(Error::domain(format!(
                "need derivatives up to order {order}"
            )));
        }
        check_grid(horizon, n)?;
        let grid = uniform_grid_t(n, horizon);
        let mut initial = vec![f(T::zero())];
        for d in derivs.iter().take(order - 1) {
            initial.push(d(T::zero()));
        }
        let out = RkhsFunction {
            horizon,
            h,
            order,
            values: grid.iter().map(|&t| f(t)).collect(),
            derivative: grid.iter().map(|&t| derivs[order - 1](t)).collect(),
            initial,
            initial_tol: T::lit(1e-8),
        };
        out.validate()?;
        Ok(out)
    }

    /// From samples alone: the `m`-th derivative by second-order central
    /// differences with the grid step (one-sided at the ends).
    pub fn from_samples(h: T, horizon: T, values: Vec<T>) -> Result<Self> {
        let order = rkhs_order(h);
        if values.len() < 4 {
            return Err(Error::domain("need at least four samples"));
        }
        check_grid(horizon, values.len() - 1)?;
        let step = horizon / T::from_usize_lossy(values.len() - 1);
        let d1 = central_difference(&values, step);
        let derivative = if order == 1 {
            d1.clone()
        } else {
            central_difference(&d1, step)
        };
        let mut initial = vec![values[0]];
        let mut initial_tol = T::lit(1e-8);
        if order == 2 {
            initial.push(d1[0]);
            // the one-sided stencil is exact for quadratics; beyond that its
            // truncation is bounded by Δ² max|f'''| ≲ Δ max|f''|
            let max2 = derivative.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
            initial_tol = initial_tol.max(step * max2);
        }
        let out = RkhsFunction {
            horizon,
            h,
            order,
            values,
            derivative,
            initial,
            initial_tol,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn step(&self) -> T {
        self.horizon / T::from_usize_lossy(self.values.len() - 1)
    }

    /// Membership precondition `f^{(k)}(0) = 0`, `k < m`.
    pub fn validate(&self) -> Result<()> {
        for (k, &v) in self.initial.iter().enumerate() {
            if !(v.abs() <= self.initial_tol) {
                return Err(Error::Membership(format!(
                    "f^({k})(0) = {v} exceeds {}",
                    self.initial_tol
                )));
            }
        }
        if self.derivative.iter().any(|x| !x.is_finite()) {
            return Err(Error::Membership(
                "derivative samples are not finite".into(),
            ));
        }
        Ok(())
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        for v in out
            .values
            .iter_mut()
            .chain(out.derivative.iter_mut())
            .chain(out.initial.iter_mut())
        {
            *v = *v * c;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.values.len() != other.values.len()
            || self.horizon != other.horizon
            || self.h != other.h
        {
            return Err(Error::domain("functions live on different grids"));
        }
        let zip = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x + y).collect::<Vec<T>>();
        Ok(RkhsFunction {
            horizon: self.horizon,
            h: self.h,
            order: self.order,
            values: zip(&self.values, &other.values),
            derivative: zip(&self.derivative, &other.derivative),
            initial: zip(&self.initial, &other.initial),
            initial_tol: self.initial_tol.max(other.initial_tol),
        })
    }
}

fn check_grid<T: Real>(horizon: T, n: usize) -> Result<()> {
    if !(horizon > T::zero()) || n < 2 {
        return Err(Error::domain(
            "need a positive horizon and at least two intervals",
        ));
    }
    Ok(())
}

fn uniform_grid_t<T: Real>(n: usize, horizon: T) -> Vec<T> {
    let nf = T::from_usize_lossy(n);
    (0..=n)
        .map(|i| horizon * T::from_usize_lossy(i) / nf)
        .collect()
}

fn central_difference<T: Real>(v: &[T], step: T) -> Vec<T> {
    let n = v.len();
    let two = T::lit(2.0);
    let mut d = vec![T::zero(); n];
    d[0] = (-T::lit(3.0) * v[0] + T::lit(4.0) * v[1] - v[2]) / (two * step);
    d[n - 1] = (T::lit(3.0) * v[n - 1] - T::lit(4.0) * v[n - 2] + v[n - 3]) / (two * step);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (two * step);
    }
    d
}

/// `k_H ‖I^β f^{(m)}‖_{L²[0,T]}` on the sample grid.
pub fn rkhs_norm<T: Real>(f: &RkhsFunction<T>) -> Result<T> {
    f.validate()?;
    let step = f.step();
    let g = fractional_integral_samples(&f.derivative, step, norm_exponent(f.h))?;
    Ok(k_h(f.h) * trapezoid_sq(&g, step).sqrt())
}

/// [`rkhs_norm`] with `f^{(m)}` given as a closure and both integrals done
/// by quadrature.
pub fn rkhs_norm_fn<T: Real, F: Fn(T) -> T>(f_m: F, h: T, horizon: T) -> Result<T> {
    if !(horizon > T::zero()) {
        return Err(Error::domain("horizon must be positive"));
    }
    let beta = norm_exponent(h);
    let g = |t: T| fractional_integral_fn(&f_m, beta, t).unwrap_or(T::nan());
    let q = tanh_sinh(
        |t: T| g(t) * g(t),
        T::zero(),
        horizon,
        Tolerance::rel(1e-11),
    );
    if !q.value.is_finite() {
        return Err(Error::Membership("norm integral diverged".into()));
    }
    Ok(k_h(h) * q.value.sqrt())
}

/// `k_H ‖I^β (d^m/dt^m) t^k‖_{L²[0,T]}`, for `k ≥ m`.
pub fn monomial_norm<T: Real>(k: usize, h: T, horizon: T) -> T {
    let m = rkhs_order(h);
    assert!(k >= m, "monomial degree below the norm order");
    let e = T::from_usize_lossy(k) - h - T::lit(0.5);
    let kf = T::from_usize_lossy(k);
    let coeff = (kf + T::one()).ln_gamma() - (e + T::one()).ln_gamma();
    let ln_sq = T::lit(2.0) * coeff + (T::lit(2.0) * e + T::one()) * horizon.ln()
        - (T::lit(2.0) * e + T::one()).ln();
    k_h(h) * (T::lit(0.5) * ln_sq).exp()
}

/// Polynomial fill on `[0, a]` matching a smooth process at `a`: `A t`
/// for `H < 1/2`, `B_1 t² + B_2 t³` for `H > 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZaFill<T = f64> {
    pub a: T,
    pub h: T,
    pub order: usize,
    /// `[A, 0]` or `[B_1, B_2]`.
    pub coeffs: [T; 2],
}

impl<T: Real> ZaFill<T> {
    pub fn new(a: T, h: T, z: T, zdot: Option<T>) -> Result<Self> {
        if !(h > T::zero() && h < T::one()) || (h - T::lit(0.5)).abs() <= T::epsilon() {
            return Err(Error::domain(format!(
                "fill needs H in (0,1) other than 1/2, got {h}"
            )));
        }
        if !(a > T::zero()) {
            return Err(Error::domain("fill point must be positive"));
        }
        let order = rkhs_order(h);
        let coeffs = if order == 1 {
            [z / a, T::zero()]
        } else {
            let zd = zdot.ok_or_else(|| Error::domain("H > 1/2 needs the derivative at a"))?;
            let (a2, a3) = (a * a, a * a * a);
            [
                T::lit(3.0) * z / a2 - zd / a,
                -T::lit(2.0) * z / a3 + zd / a2,
            ]
        };
        Ok(ZaFill {
            a,
            h,
            order,
            coeffs,
        })
    }

    pub fn value(&self, t: T) -> T {
        match self.order {
            1 => self.coeffs[0] * t,
            _ => (self.coeffs[0] + self.coeffs[1] * t) * t * t,
        }
    }

    pub fn derivative(&self, t: T) -> T {
        match self.order {
            1 => self.coeffs[0],
            _ => (T::lit(2.0) * self.coeffs[0] + T::lit(3.0) * self.coeffs[1] * t) * t,
        }
    }

    /// `f^{(m)}` of the fill.
    pub fn top_derivative(&self, t: T) -> T {
        match self.order {
            1 => self.coeffs[0],
            _ => T::lit(2.0) * self.coeffs[0] + T::lit(6.0) * self.coeffs[1] * t,
        }
    }

    /// `I^β (f^{(m)} 1_{[0,a]})(t)` in closed form.
    pub fn fractional_part(&self, t: T) -> T {
        let beta = norm_exponent(self.h);
        let r = (t - self.a).max(T::zero());
        let p = |x: T, e: T| if x > T::zero() { x.powf(e) } else { T::zero() };
        let d0 = p(t, beta) - p(r, beta);
        let c = self.top_constant();
        let linear = c * d0 / gamma(beta + T::one());
        if self.order == 1 {
            return linear;
        }
        // ∫_0^a (t-s)^{β-1} s ds = t (t^β - r^β)/β - (t^{β+1} - r^{β+1})/(β+1)
        let b1 = beta + T::one();
        let s_int = t * d0 / beta - (p(t, b1) - p(r, b1)) / b1;
        linear + T::lit(6.0) * self.coeffs[1] * s_int / gamma(beta)
    }

    fn top_constant(&self) -> T {
        match self.order {
            1 => self.coeffs[0],
            _ => T::lit(2.0) * self.coeffs[0],
        }
    }

    /// `k_H² ∫_0^a (I^β f^{(m)})² dt` for the fill alone.
    pub fn norm_sq_on_fill(&self) -> T {
        let beta = norm_exponent(self.h);
        let a = self.a;
        let c1 = self.top_constant() / gamma(beta + T::one());
        let e = T::lit(2.0) * beta + T::one();
        let mut s = c1 * c1 * a.powf(e) / e;
        if self.order == 2 {
            let c2 = T::lit(6.0) * self.coeffs[1] / gamma(beta + T::lit(2.0));
            s = s
                + T::lit(2.0) * c1 * c2 * a.powf(e + T::one()) / (e + T::one())
                + c2 * c2 * a.powf(e + T::lit(2.0)) / (e + T::lit(2.0));
        }
        let k = k_h(self.h);
        k * k * s
    }

    /// Replaces the samples at times before `a` by the fill.
    pub fn paste(&self, times: &[T], values: &[T]) -> Vec<T> {
        times
            .iter()
            .zip(values)
            .map(|(&t, &v)| if t < self.a { self.value(t) } else { v })
            .collect()
    }
}

/// The modified path: fill on `[0, a)` and the supplied samples from `a`
/// on.
pub fn build_z_a<T: Real>(
    z_a: T,
    zdot_a: Option<T>,
    a: T,
    h: T,
    times: &[T],
    values: &[T],
) -> Result<(ZaFill<T>, Vec<T>)> {
    if times.len() != values.len() {
        return Err(Error::domain("times and values differ in length"));
    }
    if times.last().is_some_and(|&t| !(t > a)) {
        return Err(Error::domain("fill point must lie inside the horizon"));
    }
    let fill = ZaFill::new(a, h, z_a, zdot_a)?;
    Ok((fill, fill.paste(times, values)))
}

/// Squared norm on `[0, T]` of the path equal to `fill` before `a` and
/// with `m`-th derivative `tail` on the uniform grid of `[a, T]` after.
pub fn fill_norm_sq(fill: &ZaFill, tail: &[f64], horizon: f64) -> Result<f64> {
    if tail.len() < 2 || !(horizon > fill.a) {
        return Err(Error::domain("tail grid needs two points beyond a"));
    }
    let step = (horizon - fill.a) / (tail.len() - 1) as f64;
    let beta = norm_exponent(fill.h);
    let mut g = fractional_integral_samples(tail, step, beta)?;
    for (j, gj) in g.iter_mut().enumerate() {
        *gj += fill.fractional_part(fill.a + j as f64 * step);
    }
    let k = k_h(fill.h);
    Ok(fill.norm_sq_on_fill() + k * k * trapezoid_sq(&g, step))
}

/// Right side of the norm bound with constant `c`:
/// `c {(T^{2m-2H} - a^{2m-2H}) sup_{[0,a]} |f^{(m)}|² + ∫_a^T |∫_a^t (t-s)^{β-1} f^{(m)}(s) ds|² dt}`.
pub fn norm_upper_bound(f: &RkhsFunction, a: f64, c: f64) -> Result<f64> {
    f.validate()?;
    let t_end = f.horizon;
    if !(a > 0.0 && a < t_end) {
        return Err(Error::domain("a must lie inside (0, T)"));
    }
    let step = f.step();
    let split = ((a / step).round() as usize).min(f.values.len() - 2);
    let sup = f.derivative[..=split]
        .iter()
        .fold(0.0f64, |m, &x| m.max(x.abs()));
    let e = 2.0 * f.order as f64 - 2.0 * f.h;
    let first = (t_end.powf(e) - a.powf(e)) * sup * sup;
    let beta = norm_exponent(f.h);
    let inner = fractional_integral_samples(&f.derivative[split..], step, beta)?;
    let g = gamma(beta);
    let scaled: Vec<f64> = inner.iter().map(|x| x * g).collect();
    Ok(c * (first + trapezoid_sq(&scaled, step)))
}

/// Sample grid used by [`calibrate_norm_constant`].
const CALIBRATION_GRID: usize = 1000;

/// Smallest `C` making [`norm_upper_bound`] dominate `rkhs_norm²` over
/// `f = t^k`, `k = m..m+3`, and `a ∈ {0.1, …, 0.9}` on `[0, 1]`.
pub fn calibrate_norm_constant(h: f64) -> Result<f64> {
    let m = rkhs_order(h);
    let mut best = 0.0f64;
    for k in m..m + 4 {
        let kf = k as f64;
        let top = (0..m).fold(1.0, |s, i| s * (kf - i as f64));
        let f = move |t: f64| t.powi(k as i32);
        let dm = move |t: f64| top * t.powi((k - m) as i32);
        let d1 = move |t: f64| kf * t.powi(k as i32 - 1);
        let derivs: Vec<&dyn Fn(f64) -> f64> = if m == 1 { vec![&dm] } else { vec![&d1, &dm] };
        let func = RkhsFunction::from_derivatives(h, 1.0, CALIBRATION_GRID, &f, &derivs)?;
        let n2 = rkhs_norm(&func)?.powi(2);
        for i in 1..10 {
            let b = norm_upper_bound(&func, i as f64 / 10.0, 1.0)?;
            best = best.max(n2 / b);
        }
    }
    Ok(best)
}

/// Exact joint sampler of `(X(a), X'(a) when m = 2, X^{(m)}(t_j))` with
/// `t_j` the uniform grid of `[a, T]`.
struct JointSampler {
    lower: Vec<f64>,
    size: usize,
    order: usize,
}

impl JointSampler {
    fn new<K: Fn(f64, usize, f64, usize) -> f64 + Sync>(
        kernel: K,
        order: usize,
        a: f64,
        horizon: f64,
        n: usize,
    ) -> Result<Self> {
        let mut points = vec![(a, 0usize)];
        if order == 2 {
            points.push((a, 1));
        }
        let step = (horizon - a) / n as f64;
        points.extend((0..=n).map(|j| (if j == n { horizon } else { a + j as f64 * step }, order)));
        let size = points.len();
        let rows: Vec<Vec<f64>> = (0..size)
            .into_par_iter()
            .map(|i| {
                (0..=i)
                    .map(|j| kernel(points[i].0, points[i].1, points[j].0, points[j].1))
                    .collect()
            })
            .collect();
        let mut entries = vec![0.0; size * size];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                entries[i * size + j] = v;
                entries[j * size + i] = v;
            }
        }
        let (lower, _) = cholesky_with_jitter(&entries, size)?;
        Ok(JointSampler { lower, size, order })
    }

    /// `(X(a), X'(a), tail of X^{(m)})`.
    fn draw(&self, rng: &mut Rng) -> (f64, Option<f64>, Vec<f64>) {
        let z: Vec<f64> = (0..self.size).map(|_| StandardNormal.sample(rng)).collect();
        let mut x = vec![0.0; self.size];
        lower_mul(&self.lower, self.size, &z, &mut x);
        let skip = if self.order == 2 { 2 } else { 1 };
        let zdot = (self.order == 2).then(|| x[1]);
        (x[0], zdot, x[skip..].to_vec())
    }
}

fn halved(tail: &[f64]) -> Vec<f64> {
    tail.iter().step_by(2).copied().collect()
}

fn check_fill_params(h: f64, a: f64, horizon: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) || h == 0.5 {
        return Err(Error::domain(format!(
            "H must lie in (0,1) other than 1/2, got {h}"
        )));
    }
    if !(a > 0.0 && a < horizon) {
        return Err(Error::domain(format!(
            "a must lie in (0, {horizon}), got {a}"
        )));
    }
    Ok(())
}

/// Mean of `exp(-½ x)` over samples with the grid-halving error folded
/// into the standard error.
fn exp_mean(full: &[f64], half: &[f64]) -> (f64, f64) {
    let s = Summary::from_slice(&full.iter().map(|x| (-0.5 * x).exp()).collect::<Vec<_>>());
    let s_half = Summary::from_slice(&half.iter().map(|x| (-0.5 * x).exp()).collect::<Vec<_>>());
    let disc = (s.mean - s_half.mean).abs();
    (s.mean, s.stderr().hypot(disc))
}

/// `K_a = E exp(-½ ‖Z_a‖²)` for one coordinate, the norm taken on
/// `[0, 1]`. Replica `r` draws from remainder stream `r`.
pub fn estimate_k_a(h: f64, a: f64, replicas: usize, seed: u64) -> Result<MomentEstimate> {
    estimate_k_a_on(h, a, replicas, seed, DEFAULT_TAIL_GRID)
}

/// [`estimate_k_a`] with an explicit (even) number of tail intervals.
pub fn estimate_k_a_on(
    h: f64,
    a: f64,
    replicas: usize,
    seed: u64,
    n_tail: usize,
) -> Result<MomentEstimate> {
    check_fill_params(h, a, 1.0)?;
    if n_tail < 4 || !n_tail.is_multiple_of(2) {
        return Err(Error::domain(
            "tail grid needs an even number of intervals, at least 4",
        ));
    }
    if replicas < 2 {
        return Err(Error::domain("need at least two replicas"));
    }
    let order = rkhs_order(h);
    let joint = JointSampler::new(
        |s, j, t, k| remainder_cov_deriv(s, j, t, k, h),
        order,
        a,
        1.0,
        n_tail,
    )?;
    let norms: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, domain::REMAINDER, r);
            let (z, zd, tail) = joint.draw(&mut rng);
            let fill = ZaFill::new(a, h, z, zd)?;
            Ok((
                fill_norm_sq(&fill, &tail, 1.0)?,
                fill_norm_sq(&fill, &halved(&tail), 1.0)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (full, half): (Vec<f64>, Vec<f64>) = norms.into_iter().unzip();
    let (value, stderr) = exp_mean(&full, &half);
    Ok(MomentEstimate {
        m: 1,
        value,
        stderr,
        samples: replicas as u64,
        method: MomentMethod::PathMc,
        max_weight: None,
    })
}

/// `Cov(Q_n^{(j)}(s), Q_n^{(k)}(t)) = ∫_0^{t_n} ∂^j(s+u)^{H-1/2} ∂^k(t+u)^{H-1/2} du`.
pub fn qn_cov_deriv(s: f64, j: usize, t: f64, k: usize, h: f64, t_n: f64) -> f64 {
    let a = h - 0.5;
    let falling = |order: usize| (0..order).fold(1.0, |p, i| p * (a - i as f64));
    let (fj, fk) = (falling(j), falling(k));
    let f = |u: f64| fj * (s + u).powf(a - j as f64) * fk * (t + u).powf(a - k as f64);
    gauss_kronrod(f, 0.0, t_n, Tolerance::tight()).value
}

/// The fill of `Q_n` at `t_n = N^n`.
pub fn build_g_n(h: f64, big_n: f64, n: u32, q_tn: f64, qdot_tn: Option<f64>) -> Result<ZaFill> {
    if !(big_n > 1.0) || n == 0 {
        return Err(Error::domain("need N > 1 and n >= 1"));
    }
    ZaFill::new(big_n.powi(n as i32), h, q_tn, qdot_tn)
}

/// `‖G_n‖²` on `[0, t_{n+1}]` for independent replicas. Replica `r` uses
/// stream `r` for every `n`, so different `n` are coupled.
pub fn sample_g_n_norms(
    h: f64,
    big_n: f64,
    n: u32,
    replicas: usize,
    seed: u64,
    n_tail: usize,
) -> Result<Vec<f64>> {
    let t_n = big_n.powi(n as i32);
    let t_next = t_n * big_n;
    check_fill_params(h, t_n, t_next)?;
    let order = rkhs_order(h);
    let joint = JointSampler::new(
        |s, j, t, k| qn_cov_deriv(s, j, t, k, h, t_n),
        order,
        t_n,
        t_next,
        n_tail,
    )?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, domain::QN, r);
            let (q, qd, tail) = joint.draw(&mut rng);
            let fill = build_g_n(h, big_n, n, q, qd)?;
            fill_norm_sq(&fill, &tail, t_next)
        })
        .collect()
}

/// Trend of `E‖G_n‖²` over `n`.
#[derive(Debug, Clone, Serialize)]
pub struct GnTrend {
    pub n: Vec<u32>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
}

pub fn g_n_trend(h: f64, big_n: f64, ns: &[u32], replicas: usize, seed: u64) -> Result<GnTrend> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let (mut means, mut stderrs) = (Vec::new(), Vec::new());
    for &n in ns {
        let v = sample_g_n_norms(h, big_n, n, replicas, seed, DEFAULT_TAIL_GRID)?;
        let s = Summary::from_slice(&v);
        means.push(s.mean);
        stderrs.push(s.stderr());
        xs.extend(std::iter::repeat_n(n as f64, v.len()));
        ys.extend(v);
    }
    let (_, slope, slope_stderr) = linear_fit(&xs, &ys);
    Ok(GnTrend {
        n: ns.to_vec(),
        means,
        stderrs,
        slope,
        slope_stderr,
    })
}

/// Controls of [`comparison_check`].
#[derive(Debug, Clone, Copy)]
pub struct ComparisonConfig {
    pub n_steps: usize,
    /// Smoothing width; `None` selects the grid default.
    pub epsilon: Option<f64>,
    /// Fill point of the reverse chain.
    pub a: f64,
    pub k_replicas: usize,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            n_steps: 256,
            epsilon: None,
            a: 0.2,
            k_replicas: 1000,
        }
    }
}

/// Paired moment comparison of `X = W + Z` (the law of `c_H^{-1} B^H`)
/// with the RL process `W`.
///
/// The first report checks `c_H^{md} E[L_1^0(B)^m] ≤ E[L_1^0(W)^m]`,
/// the second (for `H ≠ 1/2`) checks
/// `c_H^{md} E[L_1^0(B)^m] ≥ K_a^d (1 - a^{1-Hd})^m E[L_1^0(W)^m]`.
/// `W` and `Z` are independent and `X` reuses the `W` path.
pub fn comparison_check(
    m: u32,
    params: &ModelParams,
    config: ComparisonConfig,
    replicas: usize,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    params.validate_fbm()?;
    params.validate_local_time()?;
    if m == 0 || m > 3 {
        return Err(Error::domain(format!("m must be in 1..=3, got {m}")));
    }
    if replicas < 2 {
        return Err(Error::domain("need at least two replicas"));
    }
    let d = params.d;
    let times = uniform_grid(config.n_steps, 1.0);
    let kernel = match config.epsilon {
        Some(e) => KernelParams::new(e)?,
        None => KernelParams::default_for(1.0 / config.n_steps as f64, params.h),
    };
    let w_model = CovModel::new(CovKind::Rl, *params)?;
    let z_model = CovModel::new(CovKind::Remainder, *params)?;
    let x_model = CovModel::new(CovKind::FbmScaled, *params)?;
    let ws = FactorSampler::new(w_model, times.clone(), seed)?;
    let zs = FactorSampler::new(z_model, times.clone(), derive_seed(seed, domain::REMAINDER))?;
    let origin = vec![0.0; d];
    let pairs: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let w = ws.path(r);
            let z = zs.path(r);
            let values = w.values.iter().zip(&z.values).map(|(a, b)| a + b).collect();
            let x = GridPath {
                times: times.clone(),
                values,
                dim: d,
                model: x_model,
                seed,
            };
            (
                smoothed_local_time(&w, &origin, kernel),
                smoothed_local_time(&x, &origin, kernel),
            )
        })
        .collect();
    let mi = m as i32;
    let lw: Vec<f64> = pairs.iter().map(|p| p.0.powi(mi)).collect();
    let lx: Vec<f64> = pairs.iter().map(|p| p.1.powi(mi)).collect();
    let (sw, sx) = (Summary::from_slice(&lw), Summary::from_slice(&lx));
    let diff = Summary::from_slice(&lw.iter().zip(&lx).map(|(a, b)| a - b).collect::<Vec<_>>());
    let base = json!({ "H": params.h, "d": d, "m": m, "n": config.n_steps,
        "epsilon": kernel.epsilon, "replicas": replicas, "seed": seed });
    let est_w = NamedEstimate::new("E[L(W)^m]", sw.mean, sw.stderr());
    let est_x = NamedEstimate::new("c_H^{md} E[L(B)^m]", sx.mean, sx.stderr());
    let forward = CheckReport {
        operation: "comparison_check".into(),
        params: base.clone(),
        estimates: vec![est_x.clone(), est_w.clone()],
        inequality: "c_H^{md} E[L(B)^m] <= E[L(W)^m]".into(),
        slack: diff.mean,
        stderr: diff.stderr(),
        verdict: Verdict::from_slack(diff.mean, diff.stderr(), 1e-12 * sw.mean),
    };
    let mut out = vec![forward];
    if !params.is_brownian() {
        let k = estimate_k_a(params.h, config.a, config.k_replicas, seed)?;
        let shrink = (1.0 - config.a.powf(1.0 - params.kappa())).powi(mi);
        let df = d as f64;
        let f = k.value.powf(df) * shrink;
        let lin = Summary::from_slice(
            &lx.iter()
                .zip(&lw)
                .map(|(x, w)| x - f * w)
                .collect::<Vec<_>>(),
        );
        let dk = df * k.value.powf(df - 1.0) * shrink * sw.mean * k.stderr;
        let se = lin.stderr().hypot(dk);
        let mut params_json = base;
        params_json["a"] = json!(config.a);
        params_json["k_replicas"] = json!(config.k_replicas);
        out.push(CheckReport {
            operation: "comparison_check_reverse".into(),
            params: params_json,
            estimates: vec![
                est_x,
                est_w,
                NamedEstimate::new("K_a", k.value, k.stderr),
                NamedEstimate::new(
                    "K_a^d (1-a^{1-Hd})^m",
                    f,
                    dk / (sw.mean.max(f64::MIN_POSITIVE)),
                ),
            ],
            inequality: "c_H^{md} E[L(B)^m] >= K_a^d (1-a^{1-Hd})^m E[L(W)^m]".into(),
            slack: lin.mean,
            stderr: se,
            verdict: Verdict::from_slack(lin.mean, se, 1e-12 * sx.mean),
        });
    }
    Ok(out)
}

/// `c_H^{md}`, the factor between moments of `B^H` and of `c_H^{-1} B^H`.
pub fn comparison_factor(m: u32, params: &ModelParams) -> Result<f64> {
    Ok(compute_c_h(params.h)?.powf((m as usize * params.d) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_rule_quadrature() {
        for &beta in &[0.0f64, 1.0, 2.0, 3.0] {
            for &alpha in &[0.25f64, 0.5, 0.75, 1.0] {
                let t = 0.8f64;
                let v = fractional_integral_fn(|s: f64| s.powf(beta), alpha, t).unwrap();
                let oracle = gamma(beta + 1.0) / gamma(beta + 1.0 + alpha) * t.powf(beta + alpha);
                assert!(
                    (v - oracle).abs() < 1e-10,
                    "beta {beta} alpha {alpha}: {v} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn zero_order_is_identity() {
        assert_eq!(
            fractional_integral_fn(|s: f64| s.cos(), 0.0, 0.7).unwrap(),
            0.7f64.cos()
        );
        let xs = vec![1.0, 2.0, 3.0];
        assert_eq!(fractional_integral_samples(&xs, 0.1, 0.0).unwrap(), xs);
    }

    #[test]
    fn product_trapezoid_exact_on_linear() {
        let n = 50;
        let step = 0.02f64;
        for &alpha in &[0.3f64, 0.5, 1.0, 1.7] {
            let f: Vec<f64> = (0..=n).map(|i| 2.0 + 3.0 * i as f64 * step).collect();
            let g = fractional_integral_samples(&f, step, alpha).unwrap();
            for (i, &gi) in g.iter().enumerate() {
                let t = i as f64 * step;
                let oracle = 2.0 * t.powf(alpha) / gamma(alpha + 1.0)
                    + 3.0 * t.powf(alpha + 1.0) / gamma(alpha + 2.0);
                assert!((gi - oracle).abs() < 1e-12, "alpha {alpha} at {t}");
            }
        }
    }

    #[test]
    fn cameron_martin_at_half() {
        let f =
            RkhsFunction::from_derivatives(0.5, 1.0, 2000, &|t: f64| t * t, &[&|t: f64| 2.0 * t])
                .unwrap();
        let n = rkhs_norm(&f).unwrap();
        assert!((n - (4.0f64 / 3.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn linear_function_norm() {
        let h = 0.25f64;
        let oracle = k_h(h) / gamma(1.5 - h) * (2.0 - 2.0 * h).powf(-0.5);
        let q = rkhs_norm_fn(|_| 1.0, h, 1.0).unwrap();
        assert!((q - oracle).abs() < 1e-9);
        assert!((monomial_norm(1, h, 1.0) - oracle).abs() < 1e-14);
    }

    #[test]
    fn membership_enforced() {
        let r = RkhsFunction::from_derivatives(0.3, 1.0, 10, &|t: f64| 1.0 + t, &[&|_| 1.0]);
        assert!(matches!(r, Err(Error::Membership(_))));
        let r = RkhsFunction::from_derivatives(0.7, 1.0, 10, &|t: f64| t, &[&|_| 1.0, &|_| 0.0]);
        assert!(matches!(r, Err(Error::Membership(_))));
    }

    #[test]
    fn finite_differences_agree() {
        let h = 0.7;
        let n = 400;
        let vals: Vec<f64> = (0..=n).map(|i| (i as f64 / n as f64).powi(3)).collect();
        let s = RkhsFunction::from_samples(h, 1.0, vals).unwrap();
        let a = RkhsFunction::from_derivatives(
            h,
            1.0,
            n,
            &|t: f64| t.powi(3),
            &[&|t: f64| 3.0 * t * t, &|t: f64| 6.0 * t],
        )
        .unwrap();
        let (ns, na) = (rkhs_norm(&s).unwrap(), rkhs_norm(&a).unwrap());
        assert!((ns / na - 1.0).abs() < 1e-3);
    }

    #[test]
    fn fill_boundary_identities() {
        let f = ZaFill::new(0.3f64, 0.25, -0.7, None).unwrap();
        assert!((f.value(0.3) + 0.7).abs() <= 4.0 * f64::EPSILON);
        let g = ZaFill::new(0.3f64, 0.75, 0.4, Some(-1.1)).unwrap();
        assert!((g.value(0.3) - 0.4).abs() <= 4.0 * f64::EPSILON);
        assert!((g.derivative(0.3) + 1.1).abs() <= 8.0 * f64::EPSILON);
        assert_eq!(g.value(0.0), 0.0);
        assert_eq!(g.derivative(0.0), 0.0);
        let z = ZaFill::new(0.3f64, 0.75, 0.0, Some(0.0)).unwrap();
        assert_eq!(z.value(0.2), 0.0);
        assert!(ZaFill::new(0.3f64, 0.5, 1.0, None).is_err());
    }

    #[test]
    fn fill_fractional_part_matches_quadrature() {
        for &(h, zd) in &[(0.25f64, None), (0.75, Some(0.6))] {
            let f = ZaFill::new(0.4, h, 0.9, zd).unwrap();
            let beta = norm_exponent(h);
            for &t in &[0.1f64, 0.4, 0.7] {
                let q = if t <= 0.4 {
                    fractional_integral_fn(|s| f.top_derivative(s), beta, t).unwrap()
                } else {
                    let k = |s: f64| (t - s).powf(beta - 1.0) * f.top_derivative(s);
                    gauss_kronrod(k, 0.0, 0.4, Tolerance::tight()).value / gamma(beta)
                };
                assert!((f.fractional_part(t) - q).abs() < 1e-7, "H {h} t {t}");
            }
            let n2 = rkhs_norm_fn(|s| f.top_derivative(s), h, 0.4)
                .unwrap()
                .powi(2);
            assert!((f.norm_sq_on_fill() / n2 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn bound_examples() {
        let z = RkhsFunction::from_derivatives(0.75, 1.0, 200, &|_| 0.0, &[&|_| 0.0, &|_| 0.0])
            .unwrap();
        assert_eq!(norm_upper_bound(&z, 0.3, 1.0).unwrap(), 0.0);
        let c = calibrate_norm_constant(0.75).unwrap();
        let f = RkhsFunction::from_derivatives(
            0.75,
            1.0,
            CALIBRATION_GRID,
            &|t: f64| t * t,
            &[&|t: f64| 2.0 * t, &|_| 2.0],
        )
        .unwrap();
        let n2 = rkhs_norm(&f).unwrap().powi(2);
        for i in 1..10 {
            assert!(norm_upper_bound(&f, i as f64 / 10.0, c).unwrap() >= n2 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn k_a_in_unit_interval() {
        let k = estimate_k_a_on(0.25, 0.2, 64, 3, 100).unwrap();
        assert!(k.value > 0.0 && k.value <= 1.0);
        assert!(k.stderr > 0.0);
    }

    #[test]
    fn qn_variance_closed_form() {
        // Var Q_n(t) = ((t+t_n)^{2H} - t^{2H}) / (2H)
        let (h, tn, t) = (0.3f64, 4.0, 6.0);
        let v = qn_cov_deriv(t, 0, t, 0, h, tn);
        let oracle = ((t + tn).powf(2.0 * h) - t.powf(2.0 * h)) / (2.0 * h);
        assert!((v / oracle - 1.0).abs() < 1e-12);
    }
}
