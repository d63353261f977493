//! Simulation and verification toolkit for local times, intersection local
//! times and large-deviation constants of fractional Brownian motion and
//! Riemann–Liouville processes.
//!
//! Analytic layers (kernels, constants, quadrature, fractional integrals)
//! are generic over [`Real`]; Monte Carlo drivers work in `f64`.

// NaN must fail domain checks, so they are written as `!(x > 0)`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod intersection;
pub mod ldconst;
pub mod linalg;
pub mod localtime;
pub mod moments;
pub mod params;
pub mod process_sim;
pub mod quad;
pub mod real;
pub mod report;
pub mod rkhs;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use params::ModelParams;
pub use process_sim::{CovKind, CovModel, GridPath};
pub use real::Real;
pub use report::{CheckReport, Verdict};

pub type ModelParams64 = ModelParams<f64>;
pub type CovModel64 = CovModel<f64>;
pub type CovMatrix64 = linalg::CovMatrix<f64>;
