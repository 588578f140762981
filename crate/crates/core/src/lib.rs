//! Reduced dynamics of a driven, damped quantum parametric oscillator.
//!
//! The oscillator couples to a Drude thermal bath, starting from the joint
//! system–bath Gibbs state, and to a blackbody radiation field that is
//! switched on at t = 0. Everything is linear, so the reduced state stays
//! Gaussian and is fixed by its first and second moments. The pipeline:
//!
//! 1. [`spectral`]: damping kernels and Matsubara coefficients;
//! 2. [`noise`]: noise kernels, correlation functions and the two-time matrix R;
//! 3. [`propagator`]: fundamental solutions of the forward and reversed equations;
//! 4. [`moments`]: quadrature functionals, moments and the density matrix.
//!
//! [`oracles`] holds independent reference computations and [`validation`]
//! the acceptance suite built on them.

pub mod error;
pub mod model;
pub mod moments;
pub mod noise;
pub mod numerics;
pub mod oracles;
pub mod propagator;
pub mod spectral;
pub mod validation;

pub use error::{Error, Result};
pub use model::{validate_params, DriveSpec, InitialState, PhysicalParams, Profile, TimeGrid, Validation};
pub use spectral::{DampingKernelSplit, KernelPart, MatsubaraTable};
pub use moments::{CovarianceTrajectory, GaussianState, MomentFunctionals, MomentOptions, Simulation};
pub use noise::{BbRegularization, NoiseTable};
pub use propagator::{FundamentalSolutions, VuSet};
