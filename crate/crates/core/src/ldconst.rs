//! Closed-form large-deviation and LIL constants with their bounds.
//!
//! Gamma factors are combined on the log scale throughout, so the formulas
//! stay finite near `Hd → 1` and `Hd → p*`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::process_sim::compute_c_h;
use crate::quad::{gauss_kronrod, tanh_sinh, Tolerance};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    Theta,
    ThetaTilde,
    KTilde,
    K,
    L,
    Lil,
    /// Log moment-growth constant of the unit-cube intersection moments.
    C,
}

/// Bracket `[lower, upper]` with an optional point value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBounds<T = f64> {
    pub lower: T,
    pub upper: T,
    pub point: Option<T>,
    pub kind: ConstantKind,
}

impl<T: Real> RateBounds<T> {
    pub fn new(lower: T, upper: T, kind: ConstantKind) -> Self {
        RateBounds {
            lower,
            upper,
            point: None,
            kind,
        }
    }

    pub fn is_ordered(&self) -> bool {
        self.lower <= self.upper + T::lit(1e-12) * self.upper.abs().max(T::one())
    }

    pub fn contains(&self, x: T, slack: T) -> bool {
        x >= self.lower - slack && x <= self.upper + slack
    }

    /// Image under a positive scaling.
    pub fn scaled(&self, factor: T, kind: ConstantKind) -> Self {
        RateBounds {
            lower: self.lower * factor,
            upper: self.upper * factor,
            point: self.point.map(|p| p * factor),
            kind,
        }
    }

    /// Image under the decreasing map `x ↦ x^{-e}`, `e > 0`.
    pub fn inverse_power(&self, e: T, kind: ConstantKind) -> Self {
        RateBounds {
            lower: self.upper.powf(-e),
            upper: self.lower.powf(-e),
            point: self.point.map(|p| p.powf(-e)),
            kind,
        }
    }
}

fn ln_theta0<T: Real>(kappa: T) -> T {
    let omk = T::one() - kappa;
    kappa.ln() + (omk * omk.ln() - omk.ln_gamma()) / kappa
}

/// `θ₀(κ) = κ ((1-κ)^{1-κ} / Γ(1-κ))^{1/κ}`.
pub fn theta0<T: Real>(kappa: T) -> Result<T> {
    if !(kappa > T::zero() && kappa < T::one()) {
        return Err(Error::domain(format!(
            "theta0 needs kappa in (0,1), got {kappa}"
        )));
    }
    Ok(ln_theta0(kappa).exp())
}

/// `[(πc_H²/H)^{1/(2H)} θ₀(Hd), (2π)^{1/(2H)} θ₀(Hd)]`. At `H = 1/2` both
/// ends coincide.
pub fn theta_bounds<T: Real>(params: &ModelParams<T>) -> Result<RateBounds<T>> {
    params.validate_fbm()?;
    params.validate_local_time()?;
    let h = params.h;
    let c = compute_c_h(h)?;
    let l0 = ln_theta0(params.kappa());
    let e = T::one() / (T::lit(2.0) * h);
    let lower = (l0 + e * (T::PI() * c * c / h).ln()).exp();
    let upper = (l0 + e * T::TAU().ln()).exp();
    Ok(RateBounds::new(lower, upper, ConstantKind::Theta))
}

/// `θ̃ = c_H^{-1/H} θ`.
pub fn tilde_theta<T: Real>(params: &ModelParams<T>, theta: T) -> Result<T> {
    if !(theta > T::zero()) {
        return Err(Error::domain("theta must be positive"));
    }
    let c = compute_c_h(params.h)?;
    Ok(theta * c.powf(-T::one() / params.h))
}

pub fn tilde_theta_bounds<T: Real>(params: &ModelParams<T>) -> Result<RateBounds<T>> {
    let b = theta_bounds(params)?;
    let c = compute_c_h(params.h)?;
    Ok(b.scaled(c.powf(-T::one() / params.h), ConstantKind::ThetaTilde))
}

/// `J(H,d) = ∫_0^∞ (1 + t^{2H})^{-d/2} e^{-t} dt`, split at `t = 1` with
/// `t = e^u - 1` on the tail.
pub fn j_integral<T: Real>(h: T, d: usize) -> T {
    let two_h = T::lit(2.0) * h;
    let half_d = T::from_usize_lossy(d) * T::lit(0.5);
    let f = |t: T| (T::one() + t.powf(two_h)).powf(-half_d) * (-t).exp();
    let tol = Tolerance::tight();
    let head = tanh_sinh(f, T::zero(), T::one(), tol).value;
    // e^{-t} underflows relative to the head long before t = 800
    let tail = gauss_kronrod(
        |u: T| {
            let t = u.exp_m1();
            f(t) * u.exp()
        },
        T::lit(2.0).ln(),
        T::lit(801.0).ln(),
        tol,
    )
    .value;
    head + tail
}

/// Bounds on `K̃(H,d,p)` with `κ' = Hd/p*`:
/// lower `p κ' (1-κ')^{1-p*/(Hd)} (π/H)^{1/(2H)} p^{p*/(2Hp)} Γ(1-κ')^{-p*/(Hd)}`,
/// upper `p κ' (1-κ')^{1-p*/(Hd)} (2π/(c_H² p*))^{1/(2H)} J(H,d)^{-p*/(Hd)}`.
pub fn k_tilde_bounds<T: Real>(params: &ModelParams<T>) -> Result<RateBounds<T>> {
    params.validate_fbm()?;
    params.validate_intersection()?;
    let h = params.h;
    let hd = params.kappa();
    let ps = params.p_star();
    let p = T::from_usize_lossy(params.p);
    let kp = hd / ps;
    let omk = T::one() - kp;
    let c = compute_c_h(h)?;
    let e = T::one() / (T::lit(2.0) * h);
    let ln_pre = p.ln() + kp.ln() + (T::one() - ps / hd) * omk.ln();
    let ln_lower = ln_pre + e * (T::PI() / h).ln() + ps / (T::lit(2.0) * h * p) * p.ln()
        - ps / hd * omk.ln_gamma();
    let ln_upper =
        ln_pre + e * (T::TAU() / (c * c * ps)).ln() - ps / hd * j_integral(h, params.d).ln();
    Ok(RateBounds::new(
        ln_lower.exp(),
        ln_upper.exp(),
        ConstantKind::KTilde,
    ))
}

/// `K = c_H^{1/H} K̃`.
pub fn k_from_tilde<T: Real>(params: &ModelParams<T>, k_tilde: T) -> Result<T> {
    if !(k_tilde > T::zero()) {
        return Err(Error::domain("K tilde must be positive"));
    }
    let c = compute_c_h(params.h)?;
    Ok(c.powf(T::one() / params.h) * k_tilde)
}

pub fn k_bounds<T: Real>(params: &ModelParams<T>) -> Result<RateBounds<T>> {
    let b = k_tilde_bounds(params)?;
    let c = compute_c_h(params.h)?;
    Ok(b.scaled(c.powf(T::one() / params.h), ConstantKind::K))
}

/// Bounds on the moment-growth constant
/// `C = lim (1/m) log((m!)^{-Hd(p-1)} E[α̃([0,1]^p)^m])`, with `κ' = Hd/p*`:
/// upper `log{(H/π)^{d(p-1)/2} p^{-d/2} Γ(1-κ')^p (1-κ')^{-p(1-κ')}}`,
/// lower `p log{c_H^{d/p*} (1-κ')^{-(1-κ')} (p*/2π)^{d/(2p*)} J(H,d)}`.
pub fn c_bounds<T: Real>(params: &ModelParams<T>) -> Result<RateBounds<T>> {
    params.validate_fbm()?;
    params.validate_intersection()?;
    let h = params.h;
    let d = params.dim();
    let p = T::from_usize_lossy(params.p);
    let ps = params.p_star();
    let kp = params.kappa() / ps;
    let omk = T::one() - kp;
    let half = T::lit(0.5);
    let c = compute_c_h(h)?;
    let upper = d * (p - T::one()) * half * (h / T::PI()).ln() - d * half * p.ln()
        + p * omk.ln_gamma()
        - p * omk * omk.ln();
    let lower = p
        * (d / ps * c.ln() - omk * omk.ln()
            + d / (T::lit(2.0) * ps) * (ps / T::TAU()).ln()
            + j_integral(h, params.d).ln());
    Ok(RateBounds::new(lower, upper, ConstantKind::C))
}

/// Tail constant `γ e^{-κ/γ}` from moment growth `(m!)^γ e^{κm}`.
pub fn km_transform<T: Real>(kappa: T, gamma: T) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(Error::domain("gamma must be positive"));
    }
    Ok(gamma * (-kappa / gamma).exp())
}

/// LIL constants `θ^{-Hd}`, `θ̃^{-Hd}`, `K^{-Hd(p-1)}`, `K̃^{-Hd(p-1)}`.
/// Entries whose regime condition fails are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct LilConstants<T = f64> {
    pub theta: Option<RateBounds<T>>,
    pub theta_tilde: Option<RateBounds<T>>,
    pub k: Option<RateBounds<T>>,
    pub k_tilde: Option<RateBounds<T>>,
}

/// Point values supplied to [`lil_constants`] replace the brackets.
#[derive(Debug, Clone, Copy, Default)]
pub struct KnownConstants<T> {
    pub theta: Option<T>,
    pub k_tilde: Option<T>,
}

pub fn lil_constants<T: Real>(
    params: &ModelParams<T>,
    known: KnownConstants<T>,
) -> Result<LilConstants<T>> {
    params.validate_fbm()?;
    let hd = params.kappa();
    let with_point = |b: RateBounds<T>, p: Option<T>| match p {
        Some(x) => RateBounds {
            lower: x,
            upper: x,
            point: Some(x),
            kind: b.kind,
        },
        None => b,
    };
    let (theta, theta_tilde) = if params.validate_local_time().is_ok() {
        let tb = with_point(theta_bounds(params)?, known.theta);
        let c = compute_c_h(params.h)?;
        let ttb = tb.scaled(c.powf(-T::one() / params.h), ConstantKind::ThetaTilde);
        (
            Some(tb.inverse_power(hd, ConstantKind::Lil)),
            Some(ttb.inverse_power(hd, ConstantKind::Lil)),
        )
    } else {
        (None, None)
    };
    let (k, k_tilde) = if params.p >= 2 && params.validate_intersection().is_ok() {
        let e = hd * (T::from_usize_lossy(params.p) - T::one());
        let ktb = with_point(k_tilde_bounds(params)?, known.k_tilde);
        let c = compute_c_h(params.h)?;
        let kb = ktb.scaled(c.powf(T::one() / params.h), ConstantKind::K);
        (
            Some(kb.inverse_power(e, ConstantKind::Lil)),
            Some(ktb.inverse_power(e, ConstantKind::Lil)),
        )
    } else {
        (None, None)
    };
    if theta.is_none() && k.is_none() {
        return Err(Error::regime(format!(
            "no LIL constant exists for H={} d={} p={}",
            params.h, params.d, params.p
        )));
    }
    Ok(LilConstants {
        theta,
        theta_tilde,
        k,
        k_tilde,
    })
}

/// `L` bracket `[(2π)^{-d/2} Γ(1-Hd), (πc_H²/H)^{-d/2} Γ(1-Hd)]` of the
/// exponential-time moment growth.
pub fn l_bounds<T: Real>(params: &ModelParams<T>) -> Result<RateBounds<T>> {
    params.validate_fbm()?;
    params.validate_local_time()?;
    let h = params.h;
    let c = compute_c_h(h)?;
    let half_d = params.dim() * T::lit(0.5);
    let lg = (T::one() - params.kappa()).ln_gamma();
    let lower = (lg - half_d * T::TAU().ln()).exp();
    let upper = (lg - half_d * (T::PI() * c * c / h).ln()).exp();
    Ok(RateBounds::new(lower, upper, ConstantKind::L))
}

/// `θ = Hd (1-Hd)^{-1+1/(Hd)} L^{-1/(Hd)}`.
pub fn theta_from_l<T: Real>(params: &ModelParams<T>, l: T) -> T {
    let k = params.kappa();
    let omk = T::one() - k;
    (k.ln() + (T::one() / k - T::one()) * omk.ln() - l.ln() / k).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta0_half() {
        let v = theta0(0.5f64).unwrap();
        assert!((v - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!(theta0(1.0f64).is_err());
        let near = theta0(1.0f64 - 1e-12).unwrap();
        assert!(near.is_finite() && near > 0.0);
    }

    #[test]
    fn brownian_theta_is_half() {
        let b = theta_bounds(&ModelParams::new(0.5f64, 1)).unwrap();
        assert!((b.lower - 0.5).abs() < 1e-12 && (b.upper - 0.5).abs() < 1e-12);
    }

    #[test]
    fn theta_from_l_inverts_bracket() {
        let p = ModelParams::new(0.4f64, 1);
        let l = l_bounds(&p).unwrap();
        let t = theta_bounds(&p).unwrap();
        assert!((theta_from_l(&p, l.upper) / t.lower - 1.0).abs() < 1e-12);
        assert!((theta_from_l(&p, l.lower) / t.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn j_brownian_planar_against_series() {
        // e E_1(1) with E_1(1) = -γ - Σ (-1)^k / (k k!)
        let euler = 0.577_215_664_901_532_9;
        let mut s = 0.0;
        let mut fact = 1.0;
        for k in 1..40 {
            fact *= k as f64;
            s += (-1f64).powi(k) / (k as f64 * fact);
        }
        let e1 = -euler - s;
        let oracle = std::f64::consts::E * e1;
        assert!((oracle - 0.596_347_362_323_194).abs() < 1e-14);
        assert!((j_integral(0.5f64, 2) / oracle - 1.0).abs() < 1e-10);
    }

    #[test]
    fn j_decreasing_in_dimension() {
        for &h in &[0.2f64, 0.5, 0.8] {
            assert!(j_integral(h, 1) > j_integral(h, 2));
            assert!(j_integral(h, 2) > j_integral(h, 3));
        }
    }

    #[test]
    fn km_examples() {
        assert_eq!(km_transform(0.0f64, 1.0).unwrap(), 1.0);
        assert!(km_transform(1.0f64, 1.0).unwrap() < km_transform(0.5, 1.0).unwrap());
        assert!(km_transform(1.0f64, 0.0).is_err());
    }

    #[test]
    fn lil_brownian() {
        let l = lil_constants(&ModelParams::new(0.5f64, 1), KnownConstants::default()).unwrap();
        let t = l.theta.unwrap();
        assert!((t.lower - 2f64.sqrt()).abs() < 1e-12 && (t.upper - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn k_tilde_relation_to_moment_growth() {
        // The tail transform of the C bracket differs from the direct
        // K̃ bracket by (1-κ')^{2-2p*/(Hd)} at both ends.
        for &(h, d, p) in &[(0.25f64, 1usize, 2usize), (0.4, 2, 3), (0.7, 1, 2)] {
            let par = ModelParams::with_p(h, d, p);
            let kt = k_tilde_bounds(&par).unwrap();
            let cb = c_bounds(&par).unwrap();
            let g = par.kappa() * (p as f64 - 1.0);
            let km_lower = km_transform(cb.upper, g).unwrap();
            let km_upper = km_transform(cb.lower, g).unwrap();
            let kp = par.kappa() / par.p_star();
            let f = (1.0 - kp).powf(2.0 - 2.0 * par.p_star() / par.kappa());
            assert!((kt.lower / km_lower / f - 1.0).abs() < 1e-12);
            assert!((kt.upper / km_upper / f - 1.0).abs() < 1e-12);
        }
    }
}
