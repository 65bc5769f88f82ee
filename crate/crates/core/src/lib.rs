//! Quasi-Newton primal-dual interior point method for linear programming.
//!
//! Newton steps factorize the normal equations; the quasi-Newton steps that follow
//! reuse that factorization through a limited-memory Broyden update. The [`checks`]
//! module verifies the convergence analysis on recorded traces.

// `!(a <= b)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod broyden;
pub mod checks;
pub mod driver;
pub mod error;
pub mod faults;
pub mod generate;
pub mod io;
pub mod kkt;
pub mod lp;
pub mod neighborhood;

pub use broyden::{
    broyden_update, dense_broyden, gamma_coefficients, qn_direction, record_step, QuasiNewtonState, SecantPair,
};
pub use checks::{complexity_fit, composite_error_check, verify_trace, CheckReport, ComplexityFit};
pub use driver::{
    run, step_size_plan, SolveOutcome, SolverOptions, Status, StepMode, StepRecord, StepType, TheoryConstants,
    TraceDetail, Variant,
};
pub use error::{CoreError, Result};
pub use generate::{
    cold_start, generate_centered, generate_solved, random_secant_history, GeneratedInstance, InstanceKind,
    SecantHistory,
};
pub use kkt::{factorize, newton_rhs, KktFactor};
pub use lp::{evaluate_f, mu, Direction, IteratePoint, Problem, Residuals};
pub use neighborhood::{n2_proximity, proximity, Neighborhood, Proximity};
