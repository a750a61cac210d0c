//! Verification harness: seeded random instances, paired solves in the two
//! standard charts, residual reports, general-map equivariance trials, and
//! scalar risk sweeps.
//!
//! Instance recipe: one `2K x 2K` SPD draw (`random_spd` with ridge
//! `0.05 * 2K`) partitioned into `V1`, `C`, `V2`; identity risk weighting;
//! zero bias. Placeholder base estimates are `[1..K]` and `[K+1..2K]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::matrix::{
    self, kron, random_normal, random_spd, unvectorize, vectorize, Matrix, MatrixError,
};
use crate::model::{build_model, build_risk_spec, ModelError, RiskSpec};
use crate::reparam::{AffineMap, Chart};
use crate::risk::{hessian, RiskEvaluator, WeightMatrix};
use crate::solver::{
    chart_risk, combine, solve_closed_form, solve_iterative, SolveError, SolveMethod,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};

/// RNG streams carved out of one seed, so trial stages stay independent.
const STREAM_GRAD_CHECK: u64 = 1;
const STREAM_AFFINE_MAPS: u64 = 2;

/// Pass/fail ceilings for the paired-run residuals. The gradient-check
/// ceiling is method-independent; the Hessian check is a positivity bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub weight_covariance: f64,
    pub estimator_gap: f64,
    pub risk_gap: f64,
    pub grad_check: f64,
}

impl Thresholds {
    pub fn iterative() -> Self {
        Thresholds {
            weight_covariance: 1e-6,
            estimator_gap: 1e-5,
            risk_gap: 1e-10,
            grad_check: 1e-5,
        }
    }

    pub fn closed_form() -> Self {
        Thresholds {
            weight_covariance: 1e-10,
            estimator_gap: 1e-10,
            risk_gap: 1e-10,
            grad_check: 1e-5,
        }
    }

    pub fn for_method(method: SolveMethod) -> Self {
        match method {
            SolveMethod::Iterative => Thresholds::iterative(),
            SolveMethod::ClosedForm => Thresholds::closed_form(),
        }
    }
}

/// Residual metrics from one paired optimisation run.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub seed: u64,
    pub dim: usize,
    pub method: SolveMethod,
    /// `|| W_B_opt - (I - W_A_opt) ||_F`
    pub weight_covariance_residual: f64,
    /// `|| theta_A_star - theta_B_star ||_2`
    pub estimator_gap: f64,
    /// `| R_A(W_A_opt) - R_B(W_B_opt) |`
    pub risk_gap: f64,
    pub grad_check_rel_err: f64,
    pub hessian_min_eig: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub const CSV_HEADER: &'static str = "seed,dim,method,weight_covariance_residual,estimator_gap,risk_gap,grad_check_rel_err,hessian_min_eig,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.dim,
            self.method.label(),
            self.weight_covariance_residual,
            self.estimator_gap,
            self.risk_gap,
            self.grad_check_rel_err,
            self.hessian_min_eig,
            self.pass
        )
    }
}

/// Scalar risk slice along `W = w I` with its mirror through the `FormB`
/// chart.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepData {
    pub grid: Vec<f64>,
    pub f_values: Vec<f64>,
    pub g_values: Vec<f64>,
    pub argmin_f: f64,
    pub argmin_g: f64,
    /// `max_i | g(w_i) - f(1 - w_i) |`
    pub max_mirror_residual: f64,
    pub max_abs_f: f64,
}

/// One random-map equivariance trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivarianceTrial {
    /// `|| argmin(pullback) - T(argmin(base)) ||_F`
    pub transport_residual: f64,
    /// Gap between the combined estimates produced in the two charts.
    pub estimator_gap: f64,
}

/// Deterministic placeholder base estimates `[1..K]` and `[K+1..2K]`.
pub fn placeholder_estimators(dim: usize) -> (Vec<f64>, Vec<f64>) {
    let theta1: Vec<f64> = (1..=dim).map(|i| i as f64).collect();
    let theta2: Vec<f64> = (dim + 1..=2 * dim).map(|i| i as f64).collect();
    (theta1, theta2)
}

/// Ridge used when drawing the `2K x 2K` joint covariance for a
/// `K`-dimensional instance; keeps the conditioning mild enough for the
/// residual thresholds to be meaningful.
pub fn instance_ridge(dim: usize) -> f64 {
    0.05 * (2 * dim) as f64
}

/// Splits a `2K x 2K` joint covariance into `(V1, V2, C)` blocks.
pub fn partition_joint(sigma: &Matrix, dim: usize) -> (Matrix, Matrix, Matrix) {
    let mut v1 = Matrix::zeros(dim, dim);
    let mut v2 = Matrix::zeros(dim, dim);
    let mut c = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            v1[(i, j)] = sigma[(i, j)];
            c[(i, j)] = sigma[(i, dim + j)];
            v2[(i, j)] = sigma[(dim + i, dim + j)];
        }
    }
    (v1, v2, c)
}

/// Builds the seeded random instance: partitioned SPD joint covariance,
/// identity weighting, zero bias.
pub fn random_instance(dim: usize, seed: u64) -> Result<RiskSpec, ModelError> {
    let sigma = random_spd(2 * dim, seed, instance_ridge(dim));
    let (v1, v2, c) = partition_joint(&sigma, dim);
    let zeros = vec![0.0; dim];
    let model = build_model(v1, v2, c, &zeros, &zeros)?;
    build_risk_spec(model, Matrix::identity(dim))
}

/// Maximum relative Frobenius error between the analytic and
/// finite-difference gradients over `trials` seeded random weight points.
pub fn grad_check_max_rel_err(
    spec: &RiskSpec,
    seed: u64,
    trials: usize,
) -> Result<f64, MatrixError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_GRAD_CHECK);
    let k = spec.dim();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let w = WeightMatrix::new(random_normal(k, k, &mut rng))?;
        let analytic = spec.gradient(&w)?;
        let fd = spec.fd_gradient_default(&w)?;
        let rel = analytic.sub(&fd)?.frobenius_norm() / (1.0 + analytic.frobenius_norm());
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn solve_chart(
    spec: &RiskSpec,
    chart: &Chart,
    method: SolveMethod,
) -> Result<crate::solver::SolveResult, SolveError> {
    match method {
        SolveMethod::ClosedForm => solve_closed_form(spec, chart),
        SolveMethod::Iterative => {
            let evaluator = chart_risk(spec, chart)?;
            solve_iterative(
                &evaluator,
                &WeightMatrix::zeros(spec.dim()),
                DEFAULT_TOL,
                DEFAULT_MAX_ITER,
            )
        }
    }
}

/// Full paired run on a generated instance.
pub fn run_verification(
    dim: usize,
    seed: u64,
    method: SolveMethod,
    thresholds: &Thresholds,
) -> Result<VerificationReport, SolveError> {
    let spec = random_instance(dim, seed)?;
    run_verification_on(&spec, seed, method, thresholds)
}

/// Full paired run on an injected instance: solve both charts, combine
/// with the placeholder estimates, and report residuals.
pub fn run_verification_on(
    spec: &RiskSpec,
    seed: u64,
    method: SolveMethod,
    thresholds: &Thresholds,
) -> Result<VerificationReport, SolveError> {
    let dim = spec.dim();
    let res_a = solve_chart(spec, &Chart::FormA, method)?;
    let res_b = solve_chart(spec, &Chart::FormB, method)?;

    let mirrored = Matrix::identity(dim).sub(res_a.w_opt.as_matrix())?;
    let weight_covariance_residual = res_b
        .w_opt
        .as_matrix()
        .sub(&mirrored)?
        .frobenius_norm();

    let (theta1, theta2) = placeholder_estimators(dim);
    let est_a = combine(&theta1, &theta2, &Chart::FormA, &res_a.w_opt)?;
    let est_b = combine(&theta1, &theta2, &Chart::FormB, &res_b.w_opt)?;
    let estimator_gap = Matrix::col_vector(&est_a.theta_star)?
        .sub(&Matrix::col_vector(&est_b.theta_star)?)?
        .two_norm();

    let risk_gap = (res_a.risk_at_opt - res_b.risk_at_opt).abs();
    let grad_check_rel_err = grad_check_max_rel_err(spec, seed, 3)?;
    let (_, convexity) = hessian(spec)?;
    let hessian_min_eig = convexity.hessian_min_eigenvalue;

    let pass = weight_covariance_residual <= thresholds.weight_covariance
        && estimator_gap <= thresholds.estimator_gap
        && risk_gap <= thresholds.risk_gap
        && grad_check_rel_err <= thresholds.grad_check
        && hessian_min_eig > 0.0;

    Ok(VerificationReport {
        seed,
        dim,
        method,
        weight_covariance_residual,
        estimator_gap,
        risk_gap,
        grad_check_rel_err,
        hessian_min_eig,
        pass,
    })
}

/// Independent minimiser of a pulled-back quadratic: one exact Newton step
/// in column-stacked coordinates.
///
/// The chart Hessian comes from conjugating the base Hessian with the
/// inverse coordinate map (`vec(A W B) = (B^T ⊗ A) vec(W)`), and the
/// gradient from the chain rule, so no optimum-transport identity enters
/// this route.
fn pullback_argmin_newton(spec: &RiskSpec, map: &AffineMap) -> Result<Matrix, SolveError> {
    let dim = spec.dim();
    let (h_base, _) = hessian(spec)?;
    let inv = map.invert()?;
    let s_inv = kron(&inv.b().transpose(), inv.a());
    let h_chart = s_inv.transpose().matmul(&h_base)?.matmul(&s_inv)?;

    let start = map.k_off().clone(); // T(0)
    let pulled = crate::reparam::pullback_risk(spec.clone(), map.clone())?;
    let grad = pulled.gradient(&WeightMatrix::new(start.clone())?)?;
    let delta = matrix::solve(&h_chart, &vectorize(&grad))?;
    let w_star = vectorize(&start).sub(&delta)?;
    Ok(unvectorize(&w_star, dim, dim)?)
}

/// Equivariance trials over seeded random well-conditioned maps.
///
/// For each map `T`, minimises the pulled-back risk independently
/// (iteratively from zero, or by the exact Newton route for the closed
/// form) and compares against the transported base optimum `T(W_opt)`;
/// also checks that both charts combine to the same estimate.
pub fn run_general_equivariance(
    dim: usize,
    seed: u64,
    n_maps: usize,
    method: SolveMethod,
) -> Result<Vec<EquivarianceTrial>, SolveError> {
    let spec = random_instance(dim, seed)?;
    run_general_equivariance_on(&spec, seed, n_maps, method)
}

pub fn run_general_equivariance_on(
    spec: &RiskSpec,
    seed: u64,
    n_maps: usize,
    method: SolveMethod,
) -> Result<Vec<EquivarianceTrial>, SolveError> {
    let dim = spec.dim();
    let base = solve_chart(spec, &Chart::FormA, method)?;
    let (theta1, theta2) = placeholder_estimators(dim);
    let est_base = combine(&theta1, &theta2, &Chart::FormA, &base.w_opt)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_AFFINE_MAPS);
    let mut trials = Vec::with_capacity(n_maps);
    for _ in 0..n_maps {
        let map = AffineMap::random_well_conditioned(dim, &mut rng);
        let transported = map.apply(base.w_opt.as_matrix())?;

        let w_pullback = match method {
            SolveMethod::ClosedForm => pullback_argmin_newton(spec, &map)?,
            SolveMethod::Iterative => {
                let pulled = crate::reparam::pullback_risk(spec.clone(), map.clone())?;
                solve_iterative(
                    &pulled,
                    &WeightMatrix::zeros(dim),
                    DEFAULT_TOL,
                    DEFAULT_MAX_ITER,
                )?
                .w_opt
                .into_matrix()
            }
        };

        let transport_residual = w_pullback.sub(&transported)?.frobenius_norm();

        let chart = Chart::General(map);
        let est_chart = combine(
            &theta1,
            &theta2,
            &chart,
            &WeightMatrix::new(w_pullback)?,
        )?;
        let estimator_gap = Matrix::col_vector(&est_chart.theta_star)?
            .sub(&Matrix::col_vector(&est_base.theta_star)?)?
            .two_norm();

        trials.push(EquivarianceTrial {
            transport_residual,
            estimator_gap,
        });
    }
    Ok(trials)
}

/// Evaluates `f(w) = R(w I)` and the `FormB` mirror `g(w)` on a uniform
/// grid, recording grid minima and the worst mirror residual.
pub fn run_sweep(
    spec: &RiskSpec,
    grid_min: f64,
    grid_max: f64,
    n_points: usize,
) -> Result<SweepData, MatrixError> {
    assert!(n_points >= 2, "sweep needs at least two grid points");
    let dim = spec.dim();
    let eye = Matrix::identity(dim);
    let pulled = crate::reparam::pullback_risk(spec.clone(), AffineMap::form_b(dim))?;

    let f_at = |w: f64| -> Result<f64, MatrixError> {
        spec.value(&WeightMatrix::new(eye.scale(w))?)
    };

    let step = (grid_max - grid_min) / (n_points - 1) as f64;
    let mut grid = Vec::with_capacity(n_points);
    let mut f_values = Vec::with_capacity(n_points);
    let mut g_values = Vec::with_capacity(n_points);
    let mut max_mirror_residual = 0.0f64;
    let mut max_abs_f = 0.0f64;
    for i in 0..n_points {
        let w = grid_min + step * i as f64;
        let f = f_at(w)?;
        let g = pulled.value(&WeightMatrix::new(eye.scale(w))?)?;
        max_mirror_residual = max_mirror_residual.max((g - f_at(1.0 - w)?).abs());
        max_abs_f = max_abs_f.max(f.abs());
        grid.push(w);
        f_values.push(f);
        g_values.push(g);
    }

    let argmin = |values: &[f64]| -> f64 {
        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if *v < values[best] {
                best = i;
            }
        }
        grid[best]
    };

    Ok(SweepData {
        argmin_f: argmin(&f_values),
        argmin_g: argmin(&g_values),
        grid,
        f_values,
        g_values,
        max_mirror_residual,
        max_abs_f,
    })
}
