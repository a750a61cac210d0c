//! Optimal affine combination of two asymptotically normal estimators
//! under a strictly convex trace-AMSE risk, together with numerical
//! verification that the optimum behaves correctly under invertible affine
//! reparameterisations of the weight space:
//!
//! - optimal weights transform covariantly through the chart map
//!   (`W_B_opt = I - W_A_opt` for the standard mirrored charts, and
//!   `W2_opt = T(W1_opt)` for arbitrary invertible affine `T`), and
//! - the resulting combined estimator is the same point regardless of the
//!   chart used to find it.
//!
//! The crate is organised bottom-up: a dense [`matrix`] kernel, the
//! statistical [`model`] with its validation gates, quadratic [`risk`]
//! evaluation with analytic and finite-difference gradients, affine
//! [`reparam`]eterisations and pullbacks, closed-form and iterative
//! [`solver`]s, and the seeded verification [`harness`].

pub mod harness;
pub mod matrix;
pub mod model;
pub mod reparam;
pub mod risk;
pub mod solver;

pub use harness::{
    instance_ridge, partition_joint, placeholder_estimators, random_instance,
    run_general_equivariance, run_sweep, run_verification, run_verification_on,
    EquivarianceTrial, SweepData, Thresholds, VerificationReport,
};
pub use matrix::{kron, random_spd, vectorize, Matrix, MatrixError, SpdCertificate};
pub use model::{
    build_model, build_risk_spec, validate_assumptions, JointModel, ModelError, RiskSpec,
};
pub use reparam::{pullback_risk, transform_gradient, AffineMap, Chart, PullbackRisk};
pub use risk::{
    amse, fd_gradient, fd_gradient_default, gradient, hessian, risk, ConvexityCertificate,
    RiskEvaluator, WeightMatrix,
};
pub use solver::{
    chart_risk, combine, solve_closed_form, solve_iterative, solve_iterative_with,
    CombinedEstimate, SolveError, SolveMethod, SolveResult,
};
