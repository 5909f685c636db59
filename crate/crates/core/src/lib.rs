//! Numerical toolkit for the reflected stochastic heat equation on `[0, 1]`
//! with Dirichlet boundary conditions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod invariant;
pub mod kernel;
pub mod noise;
pub mod quad;
pub mod solver;
pub mod tridiag;

pub use error::{Error, Result};
pub use kernel::KernelConfig;
pub use noise::{sample_noise, Grid, NoiseField};
pub use solver::{
    free_run, penalized_run, run, run_observed, run_with_noise, step, Coefficients, FieldSnapshot, Forcing,
    InitialProfile, ReflectionIncrements, Scheme, SolverConfig, Trajectory,
};
