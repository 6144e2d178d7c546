//! Numerical treatment of variational problems whose running cost depends on
//! a trailing segment of the trajectory (a delay of length `r`) as well as on
//! the instantaneous derivative.
//!
//! The crate provides:
//!
//! * covector-valued measures on the delay window and their normalized
//!   cumulative functions ([`measures`]);
//! * trajectories that glue a history function to a C1 Hermite spline, with
//!   segment extraction and admissible perturbations ([`trajectory`]);
//! * problem definitions carrying the integrand together with its segment
//!   differential (as a measure) and velocity differential ([`problem`]);
//! * evaluation of the cost functional and its directional derivatives
//!   ([`criterion`]);
//! * the first-order stationarity data with its advance term, residual
//!   constancy diagnostics, and identity checks ([`euler_lagrange`]);
//! * a projected-gradient descent solver on the free Hermite degrees of
//!   freedom ([`solver`]);
//! * seeded randomized identity suites ([`suites`]).
//!
//! Everything is generic over the scalar type via [`scalar::Real`]
//! (`f32`/`f64`); `*64` aliases below fix the common `f64` instantiation.

pub mod criterion;
pub mod error;
pub mod euler_lagrange;
pub mod measures;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod scalar;
pub mod trajectory;

pub use criterion::{directional_derivative, evaluate_j, gradient, problem_breakpoints, rule_for};
pub use error::{CoreError, CoreResult};
pub use euler_lagrange::{
    advance_integral, el_data, fubini_identity_check, weak_stationarity, ElReport,
    WeakStationarity,
};
pub use measures::{Covector, CovectorMeasure, SegmentClosure, SegmentFn};
pub use problem::{
    validate_d2, validate_d3, DelayLagrangian, DistributedDelayLagrangian, Kernel,
    PointDelayLagrangian,
};
pub use quadrature::QuadratureRule;
pub use solver::{
    convergence_study, minimize, minimize_with, IterationRecord, LevelReport, SolveConfig,
    SolveResult,
};
pub use scalar::Real;
pub use trajectory::{
    affine_initial_guess, basis_perturbations, delay_steps, dof_count, HistoryFunction,
    Perturbation, Trajectory,
};

pub type Covector64 = Covector<f64>;
pub type CovectorMeasure64 = CovectorMeasure<f64>;
pub type QuadratureRule64 = QuadratureRule<f64>;
pub type HistoryFunction64 = HistoryFunction<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type Perturbation64 = Perturbation<f64>;

pub type Covector32 = Covector<f32>;
pub type CovectorMeasure32 = CovectorMeasure<f32>;
pub type Trajectory32 = Trajectory<f32>;
