//! Risk evaluation: AMSE matrix, weighted trace risk, analytic gradient,
//! Kronecker Hessian, and finite-difference gradient oracles.
//!
//! For a weight matrix `W` the combined estimator has asymptotic error
//! matrix
//!
//! ```text
//! AMSE(W) = (I-W) V1 (I-W)^T + W V2 W^T
//!         + (I-W) C W^T + W C^T (I-W)^T + b(W) b(W)^T,
//! b(W)    = (I-W) b1 + W b2,
//! ```
//!
//! and the scalar objective is `R(W) = tr(Omega^-1 AMSE(W))`, an exactly
//! quadratic function of `W`. Its analytic gradient is
//! `grad R(W) = 2 Omega^-1 (W M - N)` with the cached coefficients
//! `M = V1 + V2 - C - C^T + Lambda` and `N = V1 - C - b1 delta_b^T`; the
//! Hessian in column-stacked coordinates is the constant matrix
//! `H = 2 (M ⊗ Omega^-1)`. The analytic gradient is gated behind the
//! central-difference oracle in the test suite before anything downstream
//! relies on it.

use crate::matrix::{kron, sym_eigen_extremes, Matrix, MatrixError};
use crate::model::{ModelError, RiskSpec};

/// Central differences use per-entry steps `h = CBRT_EPS * (1 + |w_ij|)`
/// by default.
pub const FD_DEFAULT_STEP: f64 = 6.055454452393343e-6; // cbrt(f64::EPSILON)

/// Unconstrained weight matrix; square with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Matrix);

impl WeightMatrix {
    pub fn new(m: Matrix) -> Result<Self, MatrixError> {
        if !m.is_square() {
            return Err(MatrixError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        m.check_finite()?;
        Ok(WeightMatrix(m))
    }

    pub fn zeros(dim: usize) -> Self {
        WeightMatrix(Matrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl std::ops::Deref for WeightMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Evidence that the risk is strictly convex: the Hessian's minimum
/// eigenvalue together with its two Kronecker factors. The spectrum
/// product law ties them together:
/// `hessian_min = 2 * m_min * omega_inv_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityCertificate {
    pub hessian_min_eigenvalue: f64,
    pub m_min_eigenvalue: f64,
    pub omega_inv_min_eigenvalue: f64,
}

fn check_weight_dims(spec: &RiskSpec, w: &WeightMatrix) -> Result<(), MatrixError> {
    if w.dim() != spec.dim() {
        return Err(MatrixError::DimensionMismatch {
            op: "risk evaluation",
            left_rows: spec.dim(),
            left_cols: spec.dim(),
            right_rows: w.dim(),
            right_cols: w.dim(),
        });
    }
    Ok(())
}

/// AMSE matrix at `w`; symmetrised to remove floating-point skew.
pub fn amse(spec: &RiskSpec, w: &WeightMatrix) -> Result<Matrix, MatrixError> {
    check_weight_dims(spec, w)?;
    let model = spec.model();
    let e = Matrix::identity(spec.dim()).sub(w)?;

    let variance = e
        .matmul(model.v1())?
        .matmul(&e.transpose())?
        .add(&w.matmul(model.v2())?.matmul(&w.transpose())?)?;
    let cross = e.matmul(model.c())?.matmul(&w.transpose())?;
    let bias = e.matmul(model.b1())?.add(&w.matmul(model.b2())?)?;

    variance
        .add(&cross)?
        .add(&cross.transpose())?
        .add(&bias.matmul(&bias.transpose())?)
        .map(|m| m.symmetrized())
}

/// Weighted trace risk `tr(Omega^-1 AMSE(W))`.
pub fn risk(spec: &RiskSpec, w: &WeightMatrix) -> Result<f64, MatrixError> {
    let a = amse(spec, w)?;
    let oi = spec.omega_inv();
    let k = spec.dim();
    let mut tr = 0.0;
    for i in 0..k {
        for j in 0..k {
            tr += oi[(i, j)] * a[(j, i)];
        }
    }
    Ok(tr)
}

/// Analytic matrix gradient `2 Omega^-1 (W M - N)`.
pub fn gradient(spec: &RiskSpec, w: &WeightMatrix) -> Result<Matrix, MatrixError> {
    check_weight_dims(spec, w)?;
    let inner = w.matmul(spec.m_matrix())?.sub(spec.n_matrix())?;
    Ok(spec.omega_inv().matmul(&inner)?.scale(2.0))
}

/// Entrywise central difference of the risk with a uniform step.
pub fn fd_gradient(spec: &RiskSpec, w: &WeightMatrix, step: f64) -> Result<Matrix, MatrixError> {
    spec.fd_gradient(w, step)
}

/// Central difference with per-entry steps `h_ij = FD_DEFAULT_STEP * (1 + |w_ij|)`.
pub fn fd_gradient_default(spec: &RiskSpec, w: &WeightMatrix) -> Result<Matrix, MatrixError> {
    spec.fd_gradient_default(w)
}

/// Dense Hessian `2 (M ⊗ Omega^-1)` with its convexity certificate.
///
/// The Hessian does not depend on `W`: the objective is quadratic.
pub fn hessian(spec: &RiskSpec) -> Result<(Matrix, ConvexityCertificate), ModelError> {
    let h = kron(spec.m_matrix(), spec.omega_inv()).scale(2.0);
    let (h_min, _) = sym_eigen_extremes(&h.symmetrized())?;
    let cert = ConvexityCertificate {
        hessian_min_eigenvalue: h_min,
        m_min_eigenvalue: spec.m_cert().min_eigenvalue,
        omega_inv_min_eigenvalue: 1.0 / spec.omega_cert().max_eigenvalue(),
    };
    Ok((h, cert))
}

/// A scalar objective over weight matrices with value, analytic gradient,
/// and finite-difference gradient oracles.
///
/// The base risk implements this directly; pulled-back risks wrap another
/// evaluator behind an affine change of coordinates. The finite-difference
/// defaults are shared so every implementation is checked by the same
/// oracle machinery.
pub trait RiskEvaluator {
    fn dim(&self) -> usize;

    fn value(&self, w: &WeightMatrix) -> Result<f64, MatrixError>;

    fn gradient(&self, w: &WeightMatrix) -> Result<Matrix, MatrixError>;

    /// Entrywise central difference `(R(W + h E_ij) - R(W - h E_ij)) / 2h`
    /// with uniform step `h`.
    fn fd_gradient(&self, w: &WeightMatrix, step: f64) -> Result<Matrix, MatrixError> {
        let k = self.dim();
        let mut g = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                g[(i, j)] = self.fd_entry(w, i, j, step)?;
            }
        }
        Ok(g)
    }

    /// Central difference with per-entry steps scaled by entry magnitude.
    fn fd_gradient_default(&self, w: &WeightMatrix) -> Result<Matrix, MatrixError> {
        let k = self.dim();
        let mut g = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let h = FD_DEFAULT_STEP * (1.0 + w.as_matrix()[(i, j)].abs());
                g[(i, j)] = self.fd_entry(w, i, j, h)?;
            }
        }
        Ok(g)
    }

    #[doc(hidden)]
    fn fd_entry(
        &self,
        w: &WeightMatrix,
        i: usize,
        j: usize,
        h: f64,
    ) -> Result<f64, MatrixError> {
        let mut plus = w.as_matrix().clone();
        plus[(i, j)] += h;
        let mut minus = w.as_matrix().clone();
        minus[(i, j)] -= h;
        let f_plus = self.value(&WeightMatrix::new(plus)?)?;
        let f_minus = self.value(&WeightMatrix::new(minus)?)?;
        Ok((f_plus - f_minus) / (2.0 * h))
    }
}

impl RiskEvaluator for RiskSpec {
    fn dim(&self) -> usize {
        RiskSpec::dim(self)
    }

    fn value(&self, w: &WeightMatrix) -> Result<f64, MatrixError> {
        risk(self, w)
    }

    fn gradient(&self, w: &WeightMatrix) -> Result<Matrix, MatrixError> {
        gradient(self, w)
    }
}
