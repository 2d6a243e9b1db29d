//! The `N`-particle process on `Z/KZ`.
//!
//! Each particle walks clockwise at rate 1 and anti-clockwise at rate
//! `theta`, and at rate `p` jumps onto the position of another particle
//! chosen uniformly. The process is a Markov chain on occupation vectors
//! with generator
//! `L f(eta) = sum_{i != j} eta(i) [1{j = i+1} + theta 1{j = i-1} + p eta(j)/(N-1)] (f(T_{i->j} eta) - f(eta))`.

mod estimate;
mod generator;
mod simulation;
mod state_space;

pub use estimate::{
    estimate_moments, estimate_stationary, read_trajectory_csv, write_trajectory_csv, MomentEstimate,
    StationaryEstimate, TrajectoryRow,
};
pub use generator::{
    apply_function, full_generator, generator_moments, kolmogorov_products, reversibility_report,
    stationary_distribution_dense, stationary_distribution_exact, transient_distribution, transition_rate,
    FullGenerator, MomentFunction, ReversibilityReport, DENSE_LIMIT, SOLVE_LIMIT,
};
pub use simulation::{
    default_burn_in, simulate, simulate_ensemble, simulate_literal, simulate_stationary_ensemble, TrajectoryEnsemble,
};
pub use state_space::{state_count, StateSpace, STATE_GUARD};
