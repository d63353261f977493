use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Hurst index `h`, spatial dimension `d` and number of independent
/// processes `p` (only meaningful for intersection quantities).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T = f64> {
    #[serde(rename = "H")]
    pub h: T,
    pub d: usize,
    pub p: usize,
}

impl<T: Real> ModelParams<T> {
    pub fn new(h: T, d: usize) -> Self {
        ModelParams { h, d, p: 2 }
    }

    pub fn with_p(h: T, d: usize, p: usize) -> Self {
        ModelParams { h, d, p }
    }

    pub fn dim(&self) -> T {
        T::from_usize_lossy(self.d)
    }

    /// `κ = Hd`.
    pub fn kappa(&self) -> T {
        self.h * self.dim()
    }

    /// Conjugate exponent `p* = p/(p-1)`.
    pub fn p_star(&self) -> T {
        let p = T::from_usize_lossy(self.p);
        p / (p - T::one())
    }

    /// Brownian case, where several bounds collapse.
    pub fn is_brownian(&self) -> bool {
        (self.h - T::lit(0.5)).abs() <= T::epsilon()
    }

    pub fn validate_basic(&self) -> Result<()> {
        if !(self.h > T::zero()) || !self.h.is_finite() {
            return Err(Error::domain(format!("H must be positive, got {}", self.h)));
        }
        if self.d == 0 {
            return Err(Error::domain("d must be at least 1"));
        }
        Ok(())
    }

    /// `H ∈ (0,1)`, needed by every fBm quantity.
    pub fn validate_fbm(&self) -> Result<()> {
        self.validate_basic()?;
        if !(self.h < T::one()) {
            return Err(Error::domain(format!(
                "H must lie in (0,1), got {}",
                self.h
            )));
        }
        Ok(())
    }

    /// Local time at a point exists: `Hd < 1`.
    pub fn validate_local_time(&self) -> Result<()> {
        self.validate_basic()?;
        if !(self.kappa() < T::one()) {
            return Err(Error::regime(format!(
                "local time requires Hd < 1, got H={} d={}",
                self.h, self.d
            )));
        }
        Ok(())
    }

    /// Mutual intersection local time exists: `p ≥ 2` and `Hd < p*`.
    pub fn validate_intersection(&self) -> Result<()> {
        self.validate_basic()?;
        if self.p < 2 {
            return Err(Error::domain(format!(
                "p must be at least 2, got {}",
                self.p
            )));
        }
        if !(self.kappa() < self.p_star()) {
            return Err(Error::regime(format!(
                "intersection local time requires Hd < p/(p-1), got H={} d={} p={}",
                self.h, self.d, self.p
            )));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            h: U::lit(self.h.to_f64_lossy()),
            d: self.d,
            p: self.p,
        }
    }
}
