//! Minimisation of the (possibly pulled-back) risk and construction of the
//! combined estimator.
//!
//! Two routes to the unique minimiser:
//!
//! - [`solve_closed_form`]: the first-order condition of the quadratic
//!   objective gives `W_opt M = N` in base coordinates; other charts are
//!   reached by transporting the base optimum through the chart map.
//! - [`solve_iterative`]: limited-memory BFGS with a strong Wolfe line
//!   search, usable with any [`RiskEvaluator`]. Both routes are checked
//!   against each other in the test suite.

use thiserror::Error;

use crate::matrix::{self, Matrix, MatrixError};
use crate::model::{ModelError, RiskSpec};
use crate::reparam::{pullback_risk, Chart, PullbackRisk};
use crate::risk::{RiskEvaluator, WeightMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

const LBFGS_MEMORY: usize = 8;
const WOLFE_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_LINE_SEARCH_STEPS: usize = 60;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("maximum iterations ({iterations}) exceeded: gradient norm {grad_norm:e} still above tolerance {tol:e}")]
    MaxIterationsExceeded {
        last: Box<WeightMatrix>,
        grad_norm: f64,
        iterations: usize,
        tol: f64,
    },
    #[error("non-finite objective or gradient encountered at iteration {iteration}")]
    NonFiniteEncountered { iteration: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    ClosedForm,
    Iterative,
}

impl SolveMethod {
    pub fn label(&self) -> &'static str {
        match self {
            SolveMethod::ClosedForm => "closed",
            SolveMethod::Iterative => "iterative",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub w_opt: WeightMatrix,
    pub risk_at_opt: f64,
    pub grad_norm_at_opt: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

/// The combined estimate `theta_star` together with the chart and weight
/// that produced it.
#[derive(Debug, Clone)]
pub struct CombinedEstimate {
    pub theta_star: Vec<f64>,
    pub chart: Chart,
    pub w_used: WeightMatrix,
}

/// The risk evaluator for a chart: the base spec for `FormA`, a pullback
/// otherwise.
#[derive(Debug, Clone)]
pub enum ChartRisk {
    Base(RiskSpec),
    Pulled(PullbackRisk),
}

pub fn chart_risk(spec: &RiskSpec, chart: &Chart) -> Result<ChartRisk, MatrixError> {
    match chart {
        Chart::FormA => Ok(ChartRisk::Base(spec.clone())),
        other => Ok(ChartRisk::Pulled(pullback_risk(
            spec.clone(),
            other.map(spec.dim()),
        )?)),
    }
}

impl RiskEvaluator for ChartRisk {
    fn dim(&self) -> usize {
        match self {
            ChartRisk::Base(s) => s.dim(),
            ChartRisk::Pulled(p) => p.dim(),
        }
    }

    fn value(&self, w: &WeightMatrix) -> Result<f64, MatrixError> {
        match self {
            ChartRisk::Base(s) => s.value(w),
            ChartRisk::Pulled(p) => p.value(w),
        }
    }

    fn gradient(&self, w: &WeightMatrix) -> Result<Matrix, MatrixError> {
        match self {
            ChartRisk::Base(s) => s.gradient(w),
            ChartRisk::Pulled(p) => p.gradient(w),
        }
    }
}

/// Solves the base-chart normal equations `W M = N` and transports the
/// optimum into the requested chart.
pub fn solve_closed_form(spec: &RiskSpec, chart: &Chart) -> Result<SolveResult, SolveError> {
    // M is symmetric, so W = N M^-1 comes from M W^T = N^T.
    let wt = matrix::solve(spec.m_matrix(), &spec.n_matrix().transpose())?;
    let w_base = wt.transpose();
    let w_chart = WeightMatrix::new(chart.from_base(&w_base)?)?;

    let evaluator = chart_risk(spec, chart)?;
    let risk_at_opt = evaluator.value(&w_chart)?;
    let grad_norm_at_opt = evaluator.gradient(&w_chart)?.frobenius_norm();

    Ok(SolveResult {
        w_opt: w_chart,
        risk_at_opt,
        grad_norm_at_opt,
        iterations: 0,
        method: SolveMethod::ClosedForm,
    })
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

struct LinePoint {
    alpha: f64,
    w: WeightMatrix,
    value: f64,
    grad: Matrix,
    dphi: f64,
}

fn eval_line<E: RiskEvaluator>(
    eval: &E,
    w: &Matrix,
    dir: &Matrix,
    alpha: f64,
) -> Result<Option<LinePoint>, MatrixError> {
    let candidate = w.add(&dir.scale(alpha))?;
    if candidate.check_finite().is_err() {
        return Ok(None);
    }
    let wm = WeightMatrix::new(candidate)?;
    let value = eval.value(&wm)?;
    if !value.is_finite() {
        return Ok(None);
    }
    let grad = eval.gradient(&wm)?;
    if grad.check_finite().is_err() {
        return Ok(None);
    }
    let dphi = dot(&grad, dir);
    Ok(Some(LinePoint {
        alpha,
        w: wm,
        value,
        grad,
        dphi,
    }))
}

/// Strong Wolfe line search: bracketing with doubling steps, then
/// bisection zoom. The Armijo test carries a rounding allowance so the
/// search still terminates when objective differences fall below the
/// floating-point noise floor.
fn line_search<E: RiskEvaluator>(
    eval: &E,
    w: &Matrix,
    f0: f64,
    dphi0: f64,
    dir: &Matrix,
) -> Result<Option<LinePoint>, MatrixError> {
    let noise = 16.0 * f64::EPSILON * (1.0 + f0.abs());
    let armijo = |p: &LinePoint| p.value <= f0 + WOLFE_C1 * p.alpha * dphi0 + noise;
    let curvature = |p: &LinePoint| p.dphi.abs() <= -WOLFE_C2 * dphi0;

    let zoom = |mut lo: LinePoint, mut hi_alpha: f64| -> Result<Option<LinePoint>, MatrixError> {
        for _ in 0..MAX_LINE_SEARCH_STEPS {
            if (hi_alpha - lo.alpha).abs() <= 1e-12 * (1.0 + lo.alpha.abs()) {
                return Ok(Some(lo));
            }
            let alpha = 0.5 * (lo.alpha + hi_alpha);
            match eval_line(eval, w, dir, alpha)? {
                Some(p) if armijo(&p) && p.value < lo.value + noise => {
                    if curvature(&p) {
                        return Ok(Some(p));
                    }
                    if p.dphi * (hi_alpha - lo.alpha) >= 0.0 {
                        hi_alpha = lo.alpha;
                    }
                    lo = p;
                }
                _ => hi_alpha = alpha,
            }
        }
        Ok(Some(lo))
    };

    let mut prev: Option<LinePoint> = None;
    let mut alpha = 1.0;
    for _ in 0..MAX_LINE_SEARCH_STEPS {
        match eval_line(eval, w, dir, alpha)? {
            None => {
                // stepped outside the finite region; shrink back
                if let Some(p) = prev.take() {
                    return zoom(p, alpha);
                }
                alpha *= 0.5;
            }
            Some(p) => {
                let worse_than_prev = prev.as_ref().is_some_and(|q| p.value >= q.value);
                if !armijo(&p) || worse_than_prev {
                    return match prev.take() {
                        Some(q) => zoom(q, p.alpha),
                        None => zoom_from_origin(eval, w, f0, dphi0, dir, p.alpha),
                    };
                }
                if curvature(&p) {
                    return Ok(Some(p));
                }
                if p.dphi >= 0.0 {
                    let hi = prev.take().map_or(0.0, |q| q.alpha);
                    return zoom(p, hi);
                }
                alpha = p.alpha * 2.0;
                prev = Some(p);
            }
        }
    }
    Ok(prev)
}

/// Zoom when the very first trial already violates Armijo: bisect down
/// from the origin until a sufficient-decrease point appears.
fn zoom_from_origin<E: RiskEvaluator>(
    eval: &E,
    w: &Matrix,
    f0: f64,
    dphi0: f64,
    dir: &Matrix,
    mut hi: f64,
) -> Result<Option<LinePoint>, MatrixError> {
    let noise = 16.0 * f64::EPSILON * (1.0 + f0.abs());
    for _ in 0..MAX_LINE_SEARCH_STEPS {
        let alpha = 0.5 * hi;
        match eval_line(eval, w, dir, alpha)? {
            Some(p) if p.value <= f0 + WOLFE_C1 * alpha * dphi0 + noise => {
                if p.dphi.abs() <= -WOLFE_C2 * dphi0 || p.dphi >= 0.0 {
                    return Ok(Some(p));
                }
                // decrease holds but slope is still steep; the minimiser
                // lies between alpha and hi, pick the midpoint region
                match eval_line(eval, w, dir, 0.5 * (alpha + hi))? {
                    Some(q) if q.value <= p.value => return Ok(Some(q)),
                    _ => return Ok(Some(p)),
                }
            }
            _ => hi = alpha,
        }
        if hi <= f64::MIN_POSITIVE {
            break;
        }
    }
    Ok(None)
}

/// L-BFGS two-loop recursion applied to the current gradient.
fn lbfgs_direction(history: &[(Matrix, Matrix, f64)], grad: &Matrix) -> Matrix {
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * dot(s, &q);
        q = q.sub(&y.scale(alpha)).expect("same dims");
        alphas.push(alpha);
    }
    // initial scaling gamma = s.y / y.y from the most recent pair
    if let Some((s, y, _)) = history.last() {
        let sy = dot(s, y);
        let yy = dot(y, y);
        if yy > 0.0 && sy > 0.0 {
            q = q.scale(sy / yy);
        }
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        q = q.add(&s.scale(alpha - beta)).expect("same dims");
    }
    q.scale(-1.0)
}

/// Minimises an evaluator by L-BFGS with a strong Wolfe line search.
///
/// Stops when the gradient Frobenius norm reaches `tol`. The risk at the
/// accepted iterates is nonincreasing.
pub fn solve_iterative<E: RiskEvaluator>(
    evaluator: &E,
    w0: &WeightMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult, SolveError> {
    solve_iterative_with(evaluator, w0, tol, max_iter, |_, _, _| {})
}

/// [`solve_iterative`] with an observer called as `(iteration, risk,
/// grad_norm)` at the start point and after every accepted step.
pub fn solve_iterative_with<E: RiskEvaluator>(
    evaluator: &E,
    w0: &WeightMatrix,
    tol: f64,
    max_iter: usize,
    mut observer: impl FnMut(usize, f64, f64),
) -> Result<SolveResult, SolveError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut w = w0.clone();
    let mut f = evaluator.value(&w)?;
    let mut g = evaluator.gradient(&w)?;
    if !f.is_finite() || g.check_finite().is_err() {
        return Err(SolveError::NonFiniteEncountered { iteration: 0 });
    }
    observer(0, f, g.frobenius_norm());

    let mut history: Vec<(Matrix, Matrix, f64)> = Vec::new();
    for iteration in 0..max_iter {
        let grad_norm = g.frobenius_norm();
        if grad_norm <= tol {
            return Ok(SolveResult {
                w_opt: w,
                risk_at_opt: f,
                grad_norm_at_opt: grad_norm,
                iterations: iteration,
                method: SolveMethod::Iterative,
            });
        }

        let mut dir = lbfgs_direction(&history, &g);
        let mut dphi0 = dot(&g, &dir);
        if dphi0 >= 0.0 {
            // degenerate curvature information; fall back to steepest descent
            history.clear();
            dir = g.scale(-1.0);
            dphi0 = -dot(&g, &g);
        }

        let accepted = line_search(evaluator, w.as_matrix(), f, dphi0, &dir)?
            .ok_or(SolveError::NonFiniteEncountered { iteration })?;

        let s = accepted.w.as_matrix().sub(w.as_matrix())?;
        let y = accepted.grad.sub(&g)?;
        let sy = dot(&s, &y);
        if sy > 1e-12 * s.frobenius_norm() * y.frobenius_norm() {
            if history.len() == LBFGS_MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }

        w = accepted.w;
        f = accepted.value;
        g = accepted.grad;
        observer(iteration + 1, f, g.frobenius_norm());
    }

    let grad_norm = g.frobenius_norm();
    if grad_norm <= tol {
        return Ok(SolveResult {
            w_opt: w,
            risk_at_opt: f,
            grad_norm_at_opt: grad_norm,
            iterations: max_iter,
            method: SolveMethod::Iterative,
        });
    }
    Err(SolveError::MaxIterationsExceeded {
        last: Box::new(w),
        grad_norm,
        iterations: max_iter,
        tol,
    })
}

/// Evaluates the chart's combination map on a pair of base estimates.
///
/// Every chart combines as `(I - W_base) theta1 + W_base theta2` where
/// `W_base` is the chart weight expressed in base coordinates, so the two
/// coefficient matrices always sum to the identity.
pub fn combine(
    theta1: &[f64],
    theta2: &[f64],
    chart: &Chart,
    w: &WeightMatrix,
) -> Result<CombinedEstimate, SolveError> {
    let k = w.dim();
    if theta1.len() != k || theta2.len() != k {
        return Err(MatrixError::DimensionMismatch {
            op: "combine",
            left_rows: k,
            left_cols: 1,
            right_rows: theta1.len(),
            right_cols: theta2.len(),
        }
        .into());
    }
    let t1 = Matrix::col_vector(theta1)?;
    let t2 = Matrix::col_vector(theta2)?;
    let w_base = chart.to_base(w.as_matrix())?;
    let coeff1 = Matrix::identity(k).sub(&w_base)?;
    let theta_star = coeff1.matmul(&t1)?.add(&w_base.matmul(&t2)?)?;
    Ok(CombinedEstimate {
        theta_star: theta_star.data().to_vec(),
        chart: chart.clone(),
        w_used: w.clone(),
    })
}
