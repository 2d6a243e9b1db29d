//! Fleming–Viot particle systems on the cycle `Z/KZ` with uniform killing.
//!
//! The crate covers the underlying random walk and its conditioned law,
//! the stationary two-point correlations of the particle proportions (by a
//! linear solve and by a closed form in Chebyshev-type polynomials), exact
//! finite-`N` analysis of the particle generator, stochastic simulation, and
//! the time evolution of first and second moments.
//!
//! Numerical code is generic over [`Scalar`]; the aliases below fix the
//! common choices.

pub mod chebyshev;
pub mod circulant;
pub mod conditioned_walk;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod particle_system;
pub mod scalar;
pub mod stationary_covariance;

pub use error::{Error, Result};
pub use model::{ComplexSpectrum, Configuration, ModelParams, ProbVector};
pub use scalar::{Real, Scalar};

/// Exact rational scalar used by oracles and exact solves.
pub type Exact = num_rational::BigRational;

pub type Params = ModelParams<f64>;
pub type Params32 = ModelParams<f32>;
pub type ExactParams = ModelParams<Exact>;
pub type Prob = ProbVector<f64>;
pub type Matrix = linalg::DenseMatrix<f64>;
pub type Circulant = circulant::CirculantMatrix<f64>;
pub type MomentSet = stationary_covariance::StationaryMomentSet<f64>;
