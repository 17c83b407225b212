//! Numerical laboratory for quasi-stationary behaviour of absorbing
//! continuous-time Markov chains on tridiagonal state spaces.
//!
//! The crate builds truncated generators for a small zoo of models (killed
//! M/M/1 queue, killed birth-death chains, the critical linear birth-death
//! chain, the random walk on the integers), evaluates their transition
//! kernels by uniformization and by spectral decomposition with long-time
//! scaling, estimates decay parameters and invariant measure/vector pairs,
//! classifies recurrence and positivity through potential integrals, fits
//! polynomial correction exponents to `e^{lambda t} p_ij(t)`, and
//! cross-validates everything against closed-form oracles and path-level
//! Monte Carlo.
//!
//! ```
//! use qsd_core::{build_generator, ModelSpec, SpectralDecomposition};
//! use qsd_core::decay::decay_parameter;
//!
//! let spec = ModelSpec::killed_mm1(1.0, 4.0)?;
//! let est = decay_parameter(&spec, &[200, 400])?;
//! assert!((est.extrapolated - 1.0).abs() < 1e-5); // p + q - 2 sqrt(pq)
//!
//! let g = build_generator(&spec, 200)?;
//! let dec = SpectralDecomposition::decompose(&g)?;
//! let (survival, log_survival) = dec.survival(1, 2.0)?;
//! assert!(survival > 0.0 && log_survival < 0.0);
//! # Ok::<(), qsd_core::Error>(())
//! ```

pub mod acceptance;
pub mod asymptotics;
pub mod decay;
mod error;
pub mod generator;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod oracles;

pub use error::{Error, Result};
pub use generator::{build_generator, validate_generator, GeneratorDiagnostics, TruncatedGenerator};
pub use kernel::{
    conditional_distribution, survival_probability, transition_matrix, Kernel, KernelMethod,
    SpectralDecomposition,
};
pub use model::{ModelInput, ModelSpec};
