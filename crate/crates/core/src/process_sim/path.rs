use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{build_cov_matrix, compute_c_h, CovKind, CovModel};
use crate::error::{Error, Result};
use crate::linalg::{lower_mul, CovMatrix};
use crate::params::ModelParams;
use crate::rng::{domain, stream, Rng};

/// Largest grid admitted by factorization sampling.
pub const MAX_FACTOR_GRID: usize = 16384;

/// A `d`-dimensional path on a uniform time grid. `values` is row-major:
/// the state at `times[i]` is `values[i*dim .. (i+1)*dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub dim: usize,
    pub model: CovModel,
    pub seed: u64,
}

impl GridPath {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        dim: usize,
        model: CovModel,
        seed: u64,
    ) -> Result<Self> {
        let p = GridPath {
            times,
            values,
            dim,
            model,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 2 {
            return Err(Error::domain("a path needs at least two grid points"));
        }
        if self.dim == 0 || self.values.len() != n * self.dim {
            return Err(Error::domain(format!(
                "expected {} values for {} points in dimension {}",
                n * self.dim,
                n,
                self.dim
            )));
        }
        if !(self.times[0] >= 0.0) {
            return Err(Error::domain("times must start at a nonnegative value"));
        }
        let step = self.times[1] - self.times[0];
        if !(step > 0.0) {
            return Err(Error::domain("times must be strictly increasing"));
        }
        for w in self.times.windows(2) {
            // relative 1e-12 on the step, plus rounding of the time values
            let tol = 1e-12 * step + 8.0 * f64::EPSILON * w[1].abs();
            if ((w[1] - w[0]) - step).abs() > tol {
                return Err(Error::domain("grid step is not uniform"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Coordinate `k` as a strided copy.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.values[i * self.dim + k])
            .collect()
    }

    /// The path of `t ↦ X(λt)` realised through self-similarity: times are
    /// multiplied by `λ` and values by `λ^H`.
    pub fn rescaled(&self, lambda: f64) -> GridPath {
        let f = lambda.powf(self.model.hurst());
        GridPath {
            times: self.times.iter().map(|t| t * lambda).collect(),
            values: self.values.iter().map(|x| x * f).collect(),
            dim: self.dim,
            model: self.model,
            seed: self.seed,
        }
    }
}

/// `n_steps + 1` equally spaced points on `[0, horizon]`.
pub fn uniform_grid(n_steps: usize, horizon: f64) -> Vec<f64> {
    (0..=n_steps)
        .map(|i| horizon * i as f64 / n_steps as f64)
        .collect()
}

/// Source of independent replicas; replica `index` is a pure function of
/// the sampler and `index`.
pub trait PathSampler: Sync + Send {
    fn path(&self, index: u64) -> GridPath;
    fn times(&self) -> &[f64];
    fn model(&self) -> &CovModel;
}

/// Exact sampler through the Cholesky factor of the grid covariance.
/// Grid points with zero variance (such as `t = 0`) are pinned at 0.
#[derive(Debug, Clone)]
pub struct FactorSampler {
    model: CovModel,
    times: Vec<f64>,
    active: Vec<usize>,
    cov: Option<CovMatrix<f64>>,
    seed: u64,
}

impl FactorSampler {
    pub fn new(model: CovModel, times: Vec<f64>, seed: u64) -> Result<Self> {
        model.validate()?;
        if times.len() > MAX_FACTOR_GRID {
            return Err(Error::SizeLimit(format!(
                "factorization sampling supports at most {MAX_FACTOR_GRID} grid points, got {}",
                times.len()
            )));
        }
        let active: Vec<usize> = (0..times.len())
            .filter(|&i| model.cov(times[i], times[i]) > 0.0)
            .collect();
        let cov = if active.is_empty() {
            None
        } else {
            let grid: Vec<f64> = active.iter().map(|&i| times[i]).collect();
            let m = build_cov_matrix(&model, &grid)?;
            m.factor()?;
            Some(m)
        };
        Ok(FactorSampler {
            model,
            times,
            active,
            cov,
            seed,
        })
    }

    /// Fills one coordinate (stride `dim`, offset `k`) from the generator.
    fn fill(&self, rng: &mut Rng, values: &mut [f64], dim: usize, k: usize) {
        let Some(cov) = &self.cov else { return };
        let n = self.active.len();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = vec![0.0; n];
        let factor = cov.factor().expect("factor computed at construction");
        lower_mul(&factor.lower, n, &z, &mut x);
        for (j, &i) in self.active.iter().enumerate() {
            values[i * dim + k] = x[j];
        }
    }
}

impl PathSampler for FactorSampler {
    fn path(&self, index: u64) -> GridPath {
        let d = self.model.params.d;
        let mut rng = stream(self.seed, domain::PATH, index);
        let mut values = vec![0.0; self.times.len() * d];
        for k in 0..d {
            self.fill(&mut rng, &mut values, d, k);
        }
        GridPath {
            times: self.times.clone(),
            values,
            dim: d,
            model: self.model,
            seed: self.seed,
        }
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn model(&self) -> &CovModel {
        &self.model
    }
}

/// Circulant embedding of fractional Gaussian noise. Exact in law for fBm
/// (and `c_H^{-1} B^H`) on a uniform grid with a power-of-two step count.
pub struct CirculantSampler {
    model: CovModel,
    times: Vec<f64>,
    n: usize,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    seed: u64,
    /// Smallest embedding eigenvalue relative to the largest.
    pub min_eigen_ratio: f64,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("model", &self.model)
            .field("n", &self.n)
            .field("min_eigen_ratio", &self.min_eigen_ratio)
            .finish()
    }
}

/// fGn autocovariance at integer lag `k` for unit step.
fn fgn_autocov(k: usize, h: f64) -> f64 {
    let e = 2.0 * h;
    let k = k as f64;
    let p = |x: f64| if x == 0.0 { 0.0 } else { x.abs().powf(e) };
    0.5 * (p(k + 1.0) - 2.0 * p(k) + p(k - 1.0))
}

impl CirculantSampler {
    /// Returns `Ok(None)` when the embedding spectrum is negative beyond
    /// `-1e-8` relative, in which case factorization must be used.
    pub fn new(model: CovModel, n_steps: usize, horizon: f64, seed: u64) -> Result<Option<Self>> {
        model.validate()?;
        if !matches!(model.kind, CovKind::Fbm | CovKind::FbmScaled) {
            return Err(Error::domain(
                "circulant embedding needs stationary increments (FBM)",
            ));
        }
        if n_steps < 2 || !n_steps.is_power_of_two() {
            return Err(Error::domain(format!(
                "circulant sampling needs a power-of-two step count, got {n_steps}"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::domain("horizon must be positive"));
        }
        let h = model.params.h;
        let dt = horizon / n_steps as f64;
        let mut scale = dt.powf(2.0 * h);
        if model.kind == CovKind::FbmScaled {
            let c = compute_c_h(h)?;
            scale /= c * c;
        }
        let m = 2 * n_steps;
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= n_steps { j } else { m - j };
                Complex::new(fgn_autocov(lag, h) * scale, 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::MAX, f64::min);
        let ratio = min / max;
        if ratio < -1e-8 {
            return Ok(None);
        }
        let sqrt_eig = row
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(Some(CirculantSampler {
            model,
            times: uniform_grid(n_steps, horizon),
            n: n_steps,
            sqrt_eig,
            fft,
            seed,
            min_eigen_ratio: ratio,
        }))
    }
}

impl PathSampler for CirculantSampler {
    fn path(&self, index: u64) -> GridPath {
        let d = self.model.params.d;
        let m = 2 * self.n;
        let mut rng = stream(self.seed, domain::PATH, index);
        let mut values = vec![0.0; (self.n + 1) * d];
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for k in 0..d {
            for (b, &s) in buf.iter_mut().zip(&self.sqrt_eig) {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *b = Complex::new(re * s, im * s);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let mut x = 0.0;
            for i in 0..self.n {
                x += buf[i].re;
                values[(i + 1) * d + k] = x;
            }
        }
        GridPath {
            times: self.times.clone(),
            values,
            dim: d,
            model: self.model,
            seed: self.seed,
        }
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn model(&self) -> &CovModel {
        &self.model
    }
}

/// Paths of an fBm-type model via circulant embedding, with factorization
/// fallback reported in `fallback`.
pub struct CirculantOutput {
    pub paths: Vec<GridPath>,
    pub fallback: bool,
    pub min_eigen_ratio: f64,
}

pub fn sample_fbm_circulant(
    params: ModelParams,
    n_steps: usize,
    horizon: f64,
    seed: u64,
    replicas: usize,
) -> Result<CirculantOutput> {
    let model = CovModel::new(CovKind::Fbm, params)?;
    match CirculantSampler::new(model, n_steps, horizon, seed)? {
        Some(s) => Ok(CirculantOutput {
            paths: draw(&s, replicas),
            fallback: false,
            min_eigen_ratio: s.min_eigen_ratio,
        }),
        None => {
            let s = FactorSampler::new(model, uniform_grid(n_steps, horizon), seed)?;
            Ok(CirculantOutput {
                paths: draw(&s, replicas),
                fallback: true,
                min_eigen_ratio: f64::NAN,
            })
        }
    }
}

fn draw<S: PathSampler + ?Sized>(s: &S, replicas: usize) -> Vec<GridPath> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| s.path(r))
        .collect()
}

/// `replicas` exact paths on `grid` by factorization.
pub fn sample_paths(
    model: &CovModel,
    grid: &[f64],
    seed: u64,
    replicas: usize,
) -> Result<Vec<GridPath>> {
    if replicas == 0 {
        return Ok(Vec::new());
    }
    let s = FactorSampler::new(*model, grid.to_vec(), seed)?;
    Ok(draw(&s, replicas))
}

/// Circulant sampler for fBm-type models on power-of-two grids, the
/// factorization sampler otherwise.
pub fn auto_sampler(
    model: &CovModel,
    n_steps: usize,
    horizon: f64,
    seed: u64,
) -> Result<Box<dyn PathSampler>> {
    if matches!(model.kind, CovKind::Fbm | CovKind::FbmScaled)
        && n_steps >= 2
        && n_steps.is_power_of_two()
    {
        if let Some(s) = CirculantSampler::new(*model, n_steps, horizon, seed)? {
            return Ok(Box::new(s));
        }
    }
    Ok(Box::new(FactorSampler::new(
        *model,
        uniform_grid(n_steps, horizon),
        seed,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{covariance, Summary};

    #[test]
    fn zero_replicas() {
        let m = CovModel::fbm(0.3, 1).unwrap();
        assert!(sample_paths(&m, &uniform_grid(8, 1.0), 1, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn deterministic() {
        let m = CovModel::rl(0.3, 2).unwrap();
        let g = uniform_grid(16, 1.0);
        let a = sample_paths(&m, &g, 9, 5).unwrap();
        let b = sample_paths(&m, &g, 9, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].values, a[1].values);
    }

    #[test]
    fn brownian_increments_uncorrelated() {
        let out = sample_fbm_circulant(ModelParams::new(0.5, 1), 64, 1.0, 3, 4000).unwrap();
        assert!(!out.fallback);
        let inc = |p: &GridPath, i: usize| p.values[i + 1] - p.values[i];
        let a: Vec<f64> = out.paths.iter().map(|p| inc(p, 10)).collect();
        let b: Vec<f64> = out.paths.iter().map(|p| inc(p, 11)).collect();
        let var = Summary::from_slice(&a).variance();
        assert!((var * 64.0 - 1.0).abs() < 0.1);
        let rho = covariance(&a, &b) / var;
        // stderr of a null correlation is 1/sqrt(n)
        assert!(rho.abs() < 3.0 / (4000f64).sqrt());
    }

    #[test]
    fn rescaling_maps_horizon() {
        let m = CovModel::fbm(0.25, 1).unwrap();
        let p = sample_paths(&m, &uniform_grid(4, 1.0), 1, 1)
            .unwrap()
            .remove(0);
        let q = p.rescaled(4.0);
        assert_eq!(q.horizon(), 4.0);
        assert!((q.values[4] - p.values[4] * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn non_uniform_rejected() {
        let m = CovModel::fbm(0.25, 1).unwrap();
        assert!(GridPath::new(vec![0.0, 1.0, 3.0], vec![0.0; 3], 1, m, 0).is_err());
        assert!(GridPath::new(vec![0.0], vec![0.0], 1, m, 0).is_err());
    }
}
