//! Dense symmetric matrices and Cholesky factorization with a fixed jitter
//! ladder.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::real::Real;

/// Relative diagonal jitter levels tried in order.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-14, 1e-12, 1e-10];

/// In-place lower Cholesky of a row-major `n × n` matrix. Returns `false`
/// if a non-positive pivot is met. The strict upper triangle is zeroed.
pub fn cholesky_in_place<T: Real>(a: &mut [T], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag = diag - a[j * n + k] * a[j * n + k];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
        for k in (j + 1)..n {
            a[j * n + k] = T::zero();
        }
    }
    true
}

/// Factorization with the jitter ladder. Returns the factor and the
/// absolute jitter that was added.
pub fn cholesky_with_jitter<T: Real>(entries: &[T], n: usize) -> Result<(Vec<T>, T)> {
    let max_diag = (0..n)
        .map(|i| entries[i * n + i])
        .fold(T::zero(), |m, x| m.max(x));
    for &rel in JITTER_LADDER.iter() {
        let jitter = T::lit(rel) * max_diag;
        let mut a = entries.to_vec();
        for i in 0..n {
            a[i * n + i] = a[i * n + i] + jitter;
        }
        if cholesky_in_place(&mut a, n) {
            return Ok((a, jitter));
        }
    }
    Err(Error::NonPsd {
        size: n,
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

#[derive(Debug, Clone)]
pub struct Factor<T> {
    /// Row-major lower triangular factor.
    pub lower: Vec<T>,
    /// Absolute diagonal jitter that was needed.
    pub jitter: T,
}

/// Symmetric covariance matrix on a time grid with a lazily computed
/// Cholesky factor.
#[derive(Debug)]
pub struct CovMatrix<T> {
    pub grid: Vec<T>,
    n: usize,
    entries: Vec<T>,
    factor: OnceLock<std::result::Result<Factor<T>, f64>>,
}

impl<T: Real> Clone for CovMatrix<T> {
    fn clone(&self) -> Self {
        let factor = OnceLock::new();
        if let Some(f) = self.factor.get() {
            let _ = factor.set(f.clone());
        }
        CovMatrix {
            grid: self.grid.clone(),
            n: self.n,
            entries: self.entries.clone(),
            factor,
        }
    }
}

impl<T: Real> CovMatrix<T> {
    /// Wraps row-major entries. The matrix is symmetrized from its lower
    /// triangle after checking symmetry to `1e-12` relative.
    pub fn from_entries(grid: Vec<T>, mut entries: Vec<T>) -> Result<Self> {
        let n = grid.len();
        if entries.len() != n * n {
            return Err(Error::domain(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let scale = (0..n)
            .map(|i| entries[i * n + i].abs())
            .fold(T::zero(), |m, x| m.max(x))
            .max(T::min_positive_value());
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if (a - b).abs() > T::lit(1e-12) * scale {
                    return Err(Error::domain(format!("matrix not symmetric at ({i},{j})")));
                }
                entries[j * n + i] = a;
            }
        }
        Ok(CovMatrix {
            grid,
            n,
            entries,
            factor: OnceLock::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn max_asymmetry(&self) -> T {
        let n = self.n;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.entries[i * n + j] - self.entries[j * n + i]).abs());
            }
        }
        worst
    }

    /// Cholesky factor, computed on first use.
    pub fn factor(&self) -> Result<&Factor<T>> {
        let slot = self.factor.get_or_init(|| {
            cholesky_with_jitter(&self.entries, self.n)
                .map(|(lower, jitter)| Factor { lower, jitter })
                .map_err(|_| JITTER_LADDER[JITTER_LADDER.len() - 1])
        });
        match slot {
            Ok(f) => Ok(f),
            Err(j) => Err(Error::NonPsd {
                size: self.n,
                jitter: *j,
            }),
        }
    }

    /// `ln det`, from the factor.
    pub fn log_det(&self) -> Result<T> {
        let f = self.factor()?;
        let n = self.n;
        Ok((0..n)
            .map(|i| T::lit(2.0) * f.lower[i * n + i].ln())
            .fold(T::zero(), |a, b| a + b))
    }

    pub fn det(&self) -> Result<T> {
        Ok(self.log_det()?.exp())
    }

    /// Sequential conditional variances `Var(X_k | X_0..X_{k-1})`, the
    /// squared diagonal of the factor.
    pub fn sequential_conditional_variances(&self) -> Result<Vec<T>> {
        let f = self.factor()?;
        let n = self.n;
        Ok((0..n)
            .map(|i| f.lower[i * n + i] * f.lower[i * n + i])
            .collect())
    }

    /// `out = L z`.
    pub fn apply_factor(&self, z: &[T], out: &mut [T]) -> Result<()> {
        let f = self.factor()?;
        lower_mul(&f.lower, self.n, z, out);
        Ok(())
    }
}

/// `out = L z` for a row-major lower triangular `L`.
pub fn lower_mul<T: Real>(lower: &[T], n: usize, z: &[T], out: &mut [T]) {
    for i in 0..n {
        let row = &lower[i * n..i * n + i + 1];
        out[i] = row
            .iter()
            .zip(&z[..=i])
            .fold(T::zero(), |s, (&l, &x)| s + l * x);
    }
}

/// Solves `L x = b` in place for a row-major lower triangular `L`.
pub fn forward_substitute<T: Real>(lower: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - lower[i * n + k] * b[k];
        }
        b[i] = s / lower[i * n + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reconstructs() {
        let a = vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let m = CovMatrix::from_entries(vec![0.0, 1.0, 2.0], a.clone()).unwrap();
        let f = m.factor().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3)
                    .map(|k| f.lower[i * 3 + k] * f.lower[j * 3 + k])
                    .sum();
                assert!((s - a[i * 3 + j]).abs() < 1e-14);
            }
        }
        assert_eq!(f.jitter, 0.0);
    }

    #[test]
    fn singular_needs_jitter() {
        let a = vec![1.0, 1.0, 1.0, 1.0];
        let m = CovMatrix::from_entries(vec![0.0, 1.0], a).unwrap();
        let f = m.factor().unwrap();
        assert!(f.jitter > 0.0 && f.jitter <= 1e-10);
    }

    #[test]
    fn indefinite_fails() {
        let a = vec![1.0, 2.0, 2.0, 1.0];
        let m = CovMatrix::from_entries(vec![0.0, 1.0], a).unwrap();
        assert!(matches!(m.factor(), Err(Error::NonPsd { .. })));
    }

    #[test]
    fn asymmetric_rejected() {
        let a = vec![1.0, 0.5, 0.4, 1.0];
        assert!(CovMatrix::from_entries(vec![0.0, 1.0], a).is_err());
    }

    #[test]
    fn det_of_diagonal() {
        let a = vec![2.0f64, 0.0, 0.0, 3.0];
        let m = CovMatrix::from_entries(vec![0.0, 1.0], a).unwrap();
        assert!((m.det().unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn forward_substitution_inverts() {
        let l = vec![2.0, 0.0, 1.0, 3.0];
        let mut b = vec![4.0, 11.0];
        forward_substitute(&l, 2, &mut b);
        assert_eq!(b, vec![2.0, 3.0]);
    }
}
